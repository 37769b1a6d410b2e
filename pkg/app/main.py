"""
CLI do simulador.

    wpt-harvest-sim <subcomando> --scenario cenario.toml --out saida/ [--workers N]

Subcomandos de sweep: s11, rect-eff, mpp, end-to-end, coldstart, link.
Além deles: calibrate (reescreve defaults.toml) e verify (confere hashes).

Códigos de saída: 0 ok, 2 cenário inválido, 3 falha de simulação,
4 verificação divergente, 1 erro inesperado. Em erro, um resumo JSON vai
para stderr.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

from app import TOOL_NAME, __version__
from app.config.settings import settings
from app.core.errors import (
    HarvestError, InvalidQuantityError, ScenarioError, ScenarioParseError, ScenarioSchemaError,
)
from app.core.logging_config import setup_logging
from app.scenarios.runner import SUBCOMMAND_KIND, load_scenario, run_scenario, verify_outputs
from app.scenarios.schema import CalibrationTargets

logger = logging.getLogger("rfh.cli")

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_INVALID_SCENARIO = 2
EXIT_SIMULATION_FAILED = 3
EXIT_VERIFY_MISMATCH = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=TOOL_NAME, description="Simulador da cadeia de recepção RF → DC → PMIC.")
    parser.add_argument("--version", action="version", version=f"{TOOL_NAME} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", type=Path, required=True, help="arquivo TOML do cenário")
    common.add_argument("--out", type=Path, default=settings.output_dir, help="diretório de saída")
    common.add_argument("--workers", type=int, default=None, help="workers paralelos (default: RFH_WORKERS)")

    for name in SUBCOMMAND_KIND:
        sub.add_parser(name, parents=[common], help=f"sweep '{SUBCOMMAND_KIND[name].value}'")
    sub.add_parser("calibrate", parents=[common], help="ajusta os knobs e escreve defaults.toml em --out")
    verify = sub.add_parser("verify", parents=[common], help="confere o hash do cenário nos CSVs de --out")
    verify.add_argument("--rerun", action="store_true", help="reexecuta e compara os bytes")
    return parser


def _fail(code: int, summary: dict) -> int:
    print(json.dumps(summary, ensure_ascii=False, default=str), file=sys.stderr)
    return code


def _calibrate(args: argparse.Namespace) -> int:
    # import tardio: o script puxa o solver inteiro
    from app.scripts.calibrate import run_calibration, write_defaults

    scenario = load_scenario(args.scenario).scenario
    result = run_calibration(scenario.calibration or CalibrationTargets())
    print(write_defaults(result, args.out))
    return EXIT_OK


def _verify(args: argparse.Namespace) -> int:
    report = verify_outputs(args.scenario, args.out, rerun=args.rerun, workers=args.workers)
    for path in report.checked:
        print(f"ok {path}")
    if report.ok:
        return EXIT_OK
    mismatches = [{"file": str(p), "reason": r} for p, r in report.mismatches]
    if not report.checked and not mismatches:
        mismatches.append({"file": str(args.out), "reason": "nenhum CSV do cenário encontrado"})
    return _fail(EXIT_VERIFY_MISMATCH, {"error": "verify_mismatch", "mismatches": mismatches})


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(settings.app_env, settings.log_level)
    workers = args.workers or settings.workers

    try:
        if args.command == "calibrate":
            return _calibrate(args)
        if args.command == "verify":
            return _verify(args)
        result = run_scenario(args.scenario, args.out, subcommand=args.command, workers=workers)
        for path in result.files:
            print(path)
        return EXIT_OK
    except FileNotFoundError as e:
        return _fail(EXIT_INVALID_SCENARIO, {"error": "scenario_not_found", "message": str(e)})
    except (ScenarioParseError, ScenarioSchemaError, InvalidQuantityError) as e:
        return _fail(EXIT_INVALID_SCENARIO, e.summary())
    except ScenarioError as e:
        # arquivo ilegível ou tabela sem dados para desenhar
        code = EXIT_INVALID_SCENARIO if type(e) is ScenarioError else EXIT_SIMULATION_FAILED
        return _fail(code, e.summary())
    except HarvestError as e:
        return _fail(EXIT_SIMULATION_FAILED, e.summary())
    except Exception as e:
        logger.error("cli_unexpected_error", extra={
            "event": "cli_unexpected_error", "error_type": type(e).__name__,
        }, exc_info=True)
        return _fail(EXIT_UNEXPECTED, {"error": "unexpected", "type": type(e).__name__, "message": str(e)})


if __name__ == "__main__":
    sys.exit(main())
