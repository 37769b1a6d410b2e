# app/scenarios/runner.py
"""
Execução de cenários: lê o arquivo, despacha para o motor certo e escreve
CSV (e SVG) com cabeçalho de proveniência. A montagem das tabelas é sempre
feita aqui, na ordem da grade, independente do número de workers.
"""
import logging
import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from app import TOOL_NAME, __version__
from app.config.defaults import CalibratedDefaults, load_defaults
from app.core.enums import LoadMode, SweepKind
from app.core.errors import HarvestError, ScenarioError, ScenarioSchemaError
from app.core.parallel import ordered_map
from app.core.tables import HASH_KEY, ResultTable, embedded_hash, scenario_hash
from app.core.units import ComplexImpedance, Frequency, PowerLevel
from app.scenarios.plots import PlotSpec, emit_svg
from app.scenarios.presets import ResolvedFrontend, resolve_frontend
from app.scenarios.schema import (
    ColdStartSweep, EndToEndSweep, LinkSweep, MppRatioSweep, RectEfficiencySweep, S11Sweep, Scenario,
    parse_scenario_text,
)
from app.tools.link import LinkBudget, range_for_power, received_power
from app.tools.mpp import find_mpp
from app.tools.network import s11_sweep
from app.tools.pmic import PmicConfig, end_to_end_efficiency, simulate_cold_start
from app.tools.rectifier import efficiency_sweep

logger = logging.getLogger("rfh.scenarios")

SUBCOMMAND_KIND = {
    "s11": SweepKind.S11,
    "rect-eff": SweepKind.RECT_EFFICIENCY,
    "mpp": SweepKind.MPP_RATIO,
    "end-to-end": SweepKind.END_TO_END,
    "coldstart": SweepKind.COLD_START,
    "link": SweepKind.LINK,
}


@dataclass
class LoadedScenario:
    path: Path
    raw: bytes
    scenario: Scenario

    @property
    def sha256(self) -> str:
        return scenario_hash(self.raw)


@dataclass
class RunResult:
    tables: list[ResultTable] = field(default_factory=list)
    files: list[Path] = field(default_factory=list)


def load_scenario(path: Path) -> LoadedScenario:
    path = Path(path)
    raw = path.read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise ScenarioError(f"{path}: arquivo não é UTF-8") from e
    return LoadedScenario(path, raw, parse_scenario_text(text, str(path)))


def _provenance(loaded: LoadedScenario, kind: str, defaults: CalibratedDefaults) -> dict[str, str]:
    return {
        "tool": f"{TOOL_NAME} {__version__}",
        "scenario": loaded.scenario.name,
        HASH_KEY: loaded.sha256,
        "kind": kind,
        "defaults": "calibrated" if defaults.calibration.calibrated else "seed",
    }


def _pmic_config(scenario: Scenario, defaults: CalibratedDefaults) -> PmicConfig:
    return PmicConfig.from_defaults(defaults, **scenario.pmic.overrides())


# ── Sweeps ───────────────────────────────────────────────────────────────────

def _run_s11(sweep: S11Sweep, fe: ResolvedFrontend) -> tuple[list[ResultTable], PlotSpec]:
    termination = ComplexImpedance(sweep.termination) if sweep.termination is not None else fe.s11_termination
    resp = s11_sweep(fe.circuit.matching.network(), termination, sweep.grid(), ComplexImpedance(sweep.z_ref))
    table = ResultTable(
        "s11", ["frequency", "s11_db", "z_in_re", "z_in_im"], ["Hz", "dB", "Ohm", "Ohm"],
    )
    for f, s_db, z in zip(resp.frequency_grid, resp.s11_db(), resp.input_impedance):
        table.add_row([f, s_db, z.real, z.imag])
    f_min, s_min = resp.minimum()
    logger.info("s11_minimum", extra={"event": "s11_minimum", "frequency_hz": f_min, "s11_db": s_min})
    return [table], PlotSpec("frequency", ["s11_db"], title=f"S11 ({fe.name})", x_scale=1e-9)


def _generic_efficiency_point(fe: ResolvedFrontend, p: PowerLevel, sweep: RectEfficiencySweep) -> list:
    harvester = fe.harvester.harvester_at(p)
    try:
        if sweep.load_mode == LoadMode.MPP_TRACKED:
            res = find_mpp(harvester, (sweep.load_min, sweep.load_max), sweep.coarse_points)
            return [p.value_dbm, res.output_power_at_mpp / p.watts, res.mpp_ratio,
                    res.optimal_load_resistance, res.mpp_voltage, ""]
        op = harvester.solve_dc(fe.circuit.load_resistance)
        return [p.value_dbm, op.power / p.watts, math.nan, op.load_resistance, op.voltage, ""]
    except HarvestError as e:
        return [p.value_dbm, math.nan, math.nan, math.nan, math.nan, e.short()]


def _run_rect_efficiency(sweep: RectEfficiencySweep, fe: ResolvedFrontend, workers: Optional[int]):
    table = ResultTable(
        "rect_efficiency",
        ["input_power", "efficiency", "mpp_ratio", "load_resistance", "dc_voltage", "errors"],
        ["dBm", "1", "1", "Ohm", "V", ""],
    )
    powers = sweep.powers.levels()
    if fe.is_rectifier:
        h = fe.harvester
        points = efficiency_sweep(
            fe.circuit, powers, sweep.load_mode, h.steps_per_period, h.max_periods,
            (sweep.load_min, sweep.load_max), sweep.coarse_points, workers,
        )
        for pt in points:
            table.add_row([pt.power.value_dbm, pt.efficiency, pt.mpp_ratio, pt.load_resistance,
                           pt.dc_output_voltage, pt.error])
    else:
        for row in ordered_map(lambda p: _generic_efficiency_point(fe, p, sweep), powers, workers):
            table.add_row(row)
    return [table], PlotSpec("input_power", ["efficiency"], title=f"Eficiência RF→DC ({fe.name})", percent=True)


def _mpp_row(fe: ResolvedFrontend, p: PowerLevel, sweep: MppRatioSweep) -> list:
    try:
        res = find_mpp(fe.harvester.harvester_at(p), (sweep.load_min, sweep.load_max), sweep.coarse_points)
        return [p.value_dbm, res.mpp_ratio, res.optimal_load_resistance, res.open_circuit_voltage,
                res.output_power_at_mpp, "" if res.unimodal else "not_unimodal"]
    except HarvestError as e:
        return [p.value_dbm, math.nan, math.nan, math.nan, math.nan, e.short()]


def _run_mpp(sweep: MppRatioSweep, fe: ResolvedFrontend, workers: Optional[int]):
    table = ResultTable(
        "mpp_ratio",
        ["input_power", "mpp_ratio", "optimal_load", "open_circuit_voltage", "output_power", "errors"],
        ["dBm", "1", "Ohm", "V", "W", ""],
    )
    for row in ordered_map(lambda p: _mpp_row(fe, p, sweep), sweep.powers.levels(), workers):
        table.add_row(row)
    tables = [table]
    if sweep.inset_power is not None:
        res = find_mpp(
            fe.harvester.harvester_at(PowerLevel(sweep.inset_power)),
            (sweep.load_min, sweep.load_max), sweep.coarse_points,
        )
        inset = ResultTable("load_trace", ["load_resistance", "output_power"], ["Ohm", "W"])
        for r, pw in res.load_sweep_trace:
            inset.add_row([r, pw])
        tables.append(inset)
    return tables, PlotSpec("input_power", ["mpp_ratio"], title=f"Razão de MPP ({fe.name})", percent=True)


def _run_end_to_end(sweep: EndToEndSweep, fe: ResolvedFrontend, cfg: PmicConfig, workers: Optional[int]):
    table = ResultTable(
        "end_to_end",
        ["input_power", "efficiency", "harvested_power", "storage_power", "operating_voltage", "errors"],
        ["dBm", "1", "W", "W", "V", ""],
    )
    for pt in end_to_end_efficiency(cfg, fe.harvester, sweep.powers.levels(), sweep.hold_voltage, workers):
        table.add_row([pt.power.value_dbm, pt.efficiency, pt.harvested_power, pt.storage_power,
                       pt.operating_voltage, pt.error])
    return [table], PlotSpec("input_power", ["efficiency"], title=f"Eficiência ponta a ponta ({fe.name})",
                             percent=True)


def _run_cold_start(sweep: ColdStartSweep, fe: ResolvedFrontend, cfg: PmicConfig):
    trace = simulate_cold_start(
        cfg, PowerLevel(sweep.input_power), fe.harvester, sweep.duration, sweep.dt, sweep.record_interval,
    )
    markers = [(m.value, t) for m, t in trace.milestones]
    spec = PlotSpec("time", ["v_storage"], title="Partida a frio", step=True, markers=markers)
    return [trace.samples_table(), trace.milestones_table()], spec


def _run_link(sweep: LinkSweep):
    lb = LinkBudget(PowerLevel(sweep.tx_power), sweep.tx_gain, sweep.rx_gain, Frequency(sweep.frequency))
    table = ResultTable("link", ["distance", "received_power"], ["m", "dBm"])
    for d in np.linspace(sweep.distance_start, sweep.distance_stop, sweep.points):
        table.add_row([d, received_power(lb.at(float(d))).value_dbm])
    tables = [table]
    if sweep.targets:
        ranges = ResultTable("link_range", ["target_power", "distance", "errors"], ["dBm", "m", ""])
        for target in sweep.targets:
            try:
                ranges.add_row([target, range_for_power(lb, PowerLevel(target)), ""])
            except HarvestError as e:
                ranges.add_row([target, math.nan, e.short()])
        tables.append(ranges)
    return tables, PlotSpec("distance", ["received_power"], title="Enlace em espaço livre")


# ── Entrada ──────────────────────────────────────────────────────────────────

def _output_paths(scenario: Scenario, tables: list[ResultTable], out_dir: Path) -> list[Path]:
    paths = []
    for i, table in enumerate(tables):
        if i == 0 and scenario.outputs.csv:
            paths.append(out_dir / scenario.outputs.csv)
        elif i == 0:
            paths.append(out_dir / f"{scenario.name}.csv")
        else:
            paths.append(out_dir / f"{scenario.name}_{table.name}.csv")
    return paths


def run_scenario(
    path: Path,
    out_dir: Path,
    subcommand: Optional[str] = None,
    workers: Optional[int] = None,
    defaults: Optional[CalibratedDefaults] = None,
) -> RunResult:
    """Executa o sweep do cenário e escreve as saídas em `out_dir`."""
    t0 = time.perf_counter()
    loaded = load_scenario(path)
    scenario = loaded.scenario
    sweep = scenario.sweep
    if sweep is None:
        raise ScenarioSchemaError(f"{path}: cenário sem [sweep]", ["sweep"])
    kind = SweepKind(sweep.kind)
    if subcommand is not None and SUBCOMMAND_KIND.get(subcommand) != kind:
        raise ScenarioSchemaError(
            f"Subcomando {subcommand!r} não corresponde ao sweep {kind.value!r}", ["sweep.kind"],
        )

    d = defaults or load_defaults()
    if kind != SweepKind.LINK and not d.calibration.calibrated:
        logger.warning("uncalibrated_defaults", extra={
            "event": "uncalibrated_defaults", "scenario": scenario.name, "kind": kind.value,
        })
    if kind == SweepKind.LINK:
        tables, plot = _run_link(sweep)
    else:
        fe = resolve_frontend(scenario.frontend, d)
        if kind == SweepKind.S11:
            tables, plot = _run_s11(sweep, fe)
        elif kind == SweepKind.RECT_EFFICIENCY:
            tables, plot = _run_rect_efficiency(sweep, fe, workers)
        elif kind == SweepKind.MPP_RATIO:
            tables, plot = _run_mpp(sweep, fe, workers)
        elif kind == SweepKind.END_TO_END:
            tables, plot = _run_end_to_end(sweep, fe, _pmic_config(scenario, d), workers)
        else:
            tables, plot = _run_cold_start(sweep, fe, _pmic_config(scenario, d))

    out_dir = Path(out_dir)
    result = RunResult(tables=tables)
    for table, target in zip(tables, _output_paths(scenario, tables, out_dir)):
        table.provenance = _provenance(loaded, kind.value, d)
        result.files.append(table.write_csv(target))
    if scenario.outputs.plot:
        svg = out_dir / (scenario.outputs.svg or f"{scenario.name}.svg")
        result.files.append(emit_svg(tables[0], plot, svg))

    logger.info("scenario_done", extra={
        "event": "scenario_done", "scenario": scenario.name, "kind": kind.value,
        "files": len(result.files), "duration_ms": int((time.perf_counter() - t0) * 1000),
    })
    return result


# ── Verificação ──────────────────────────────────────────────────────────────

@dataclass
class VerifyReport:
    checked: list[Path] = field(default_factory=list)
    mismatches: list[tuple[Path, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return bool(self.checked) and not self.mismatches


def verify_outputs(path: Path, out_dir: Path, rerun: bool = False, workers: Optional[int] = None) -> VerifyReport:
    """Confere o hash embutido nos CSVs do cenário; com `rerun`, compara os bytes."""
    loaded = load_scenario(path)
    expected = loaded.sha256
    report = VerifyReport()
    name = loaded.scenario.name
    candidates = sorted(Path(out_dir).glob("*.csv"))
    for csv_path in candidates:
        found = embedded_hash(csv_path)
        if found is None:
            continue
        if csv_path.stem != name and not csv_path.stem.startswith(f"{name}_") \
                and csv_path.name != loaded.scenario.outputs.csv:
            continue
        report.checked.append(csv_path)
        if found != expected:
            report.mismatches.append((csv_path, "hash do cenário diferente"))

    if rerun and loaded.scenario.sweep is not None:
        with tempfile.TemporaryDirectory() as tmp:
            fresh = run_scenario(path, Path(tmp), workers=workers)
            for new in fresh.files:
                old = Path(out_dir) / new.name
                if not old.exists():
                    report.mismatches.append((old, "arquivo ausente"))
                elif old.read_bytes() != new.read_bytes():
                    report.mismatches.append((old, "bytes diferentes na reexecução"))
                elif old not in report.checked:
                    report.checked.append(old)
    return report
