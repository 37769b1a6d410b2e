"""
Calibração dos knobs declarados contra os alvos publicados da placa.

Uso:
    python -m app.scripts.calibrate --out app/config
    python -m app.scripts.calibrate --scenario scenarios/calibration.toml --out app/config

O laço:
1. Escala de Is do diodo: seção áurea em log(is_scale) maximizando a
   eficiência de retificação no MPP em `rectifier_power`.
2. Capacitância efetiva: admitância na fundamental do retificador no MPP em
   `match_power` dá R_p = 1/Re(Y); C_eff é ajustada para o mínimo de S11 cair
   na frequência alvo com essa terminação.
3. Tabela de η do boost nos pontos `low_power` e `peak_power` para atingir as
   eficiências ponta a ponta alvo (η limitada a 0.95).
4. Corrente quiescente para o balanço de potência cruzar zero em `floor_power`.
   Os passos 3 e 4 se alimentam e são repetidos `iterations` vezes.
5. Partida a frio: C_boost pelo tempo de wake-up, carga de inrush por
   bissecção no tempo de operação normal, corrente de carga por bissecção no
   tempo de carga completa.
6. Mede os defaults resultantes pelos caminhos ponta a ponta e de partida a
   frio; `calibrated = true` só quando todas as janelas de aceitação fecham.
7. Escreve `defaults.toml` com o bloco de proveniência.
"""
import argparse
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from app import TOOL_NAME, __version__
from app.config.defaults import CalibratedDefaults, load_defaults, render_defaults
from app.config.settings import settings
from app.core.enums import Milestone
from app.core.errors import CalibrationError, HarvestError
from app.core.logging_config import log_operation, setup_logging
from app.core.units import ComplexImpedance, PowerLevel
from app.scenarios.schema import CalibrationTargets
from app.tools.matching import fit_effective_capacitance, s11_minimum_frequency
from app.tools.mpp import RectifierFrontend, RectifierHarvester, find_mpp, golden_section_max, harvester_output
from app.tools.pmic import (
    STARTUP_SEQUENCE, PmicConfig, end_to_end_efficiency, energy_positive_floor, simulate_cold_start,
)
from app.tools.rectifier import DiodeModel, fundamental_input_impedance, solve_steady_state, table1_circuit

logger = logging.getLogger("rfh.calibrate")

_IS_SCALE_BOUNDS = (0.1, 10.0)
_CALIB_LOAD_RANGE = (300.0, 100e3)
_CALIB_COARSE = 12
_ETA_MAX = 0.95
_ETA_MIN = 0.05
_BISECT_ITER = 20
_CALIB_DT = 5e-3


@dataclass
class CalibrationResult:
    defaults: CalibratedDefaults
    provenance: list[str] = field(default_factory=list)
    check: Optional["CalibrationCheck"] = None

    def note(self, text: str) -> None:
        logger.info("calibration_step", extra={"event": "calibration_step", "note": text})
        self.provenance.append(text)


def _update(d: CalibratedDefaults, section: str, **values) -> CalibratedDefaults:
    return d.model_copy(update={section: getattr(d, section).model_copy(update=values)})


def _mpp_efficiency(d: CalibratedDefaults, p: PowerLevel) -> tuple[float, float]:
    """(eficiência no MPP, carga ótima) do circuito da Tabela com os defaults `d`."""
    circuit = table1_circuit(p, defaults=d)
    res = find_mpp(RectifierHarvester(circuit), _CALIB_LOAD_RANGE, _CALIB_COARSE)
    return res.output_power_at_mpp / circuit.available_power, res.optimal_load_resistance


# ── Passos ───────────────────────────────────────────────────────────────────

def calibrate_diode(d: CalibratedDefaults, t: CalibrationTargets, result: CalibrationResult) -> CalibratedDefaults:
    p = PowerLevel(t.rectifier_power)
    evaluated: dict[float, float] = {}

    def efficiency(log_scale: float) -> float:
        trial = _update(d, "calibration", is_scale=math.exp(log_scale))
        try:
            eff, _ = _mpp_efficiency(trial, p)
        except HarvestError as e:
            logger.warning("calibration_point_failed", extra={"event": "calibration_point_failed", "code": e.code})
            eff = -math.inf
        evaluated[log_scale] = eff
        return eff

    lo, hi = (math.log(v) for v in _IS_SCALE_BOUNDS)
    golden_section_max(efficiency, lo, hi, 0.05)
    best = max(evaluated, key=evaluated.get)
    if not math.isfinite(evaluated[best]):
        raise CalibrationError("Nenhuma escala de Is produziu solução válida")
    scale = math.exp(best)
    result.note(f"is_scale = {scale:.6g} (eficiência de retificação {evaluated[best]:.4f} em {p})")
    return _update(d, "calibration", is_scale=scale)


def calibrate_matching(d: CalibratedDefaults, t: CalibrationTargets, result: CalibrationResult) -> CalibratedDefaults:
    p = PowerLevel(t.match_power)
    _, r_opt = _mpp_efficiency(d, p)
    sol = solve_steady_state(table1_circuit(p, r_opt, defaults=d)).raise_if_not_converged()
    y = 1.0 / fundamental_input_impedance(sol).value
    if y.real <= 0:
        raise CalibrationError("Admitância do retificador sem parte real positiva", {"y": [y.real, y.imag]})
    r_p = 1.0 / y.real
    c_large_signal = y.imag / sol.circuit.source.frequency.omega
    circuit = table1_circuit(p, r_opt, defaults=d)
    fitted = fit_effective_capacitance(circuit.matching, ComplexImpedance(r_p))
    f_min, s_min = s11_minimum_frequency(fitted, ComplexImpedance(r_p))
    result.note(
        f"R_p = {r_p:.6g} Ohm e C_eff = {fitted.effective_diode_capacitance:.6g} F em {p} "
        f"(C de grande sinal {c_large_signal:.4g} F; mínimo de S11 {s_min:.2f} dB em {f_min / 1e6:.2f} MHz)"
    )
    return _update(
        d, "calibration",
        rectifier_parallel_resistance=r_p,
        effective_diode_capacitance=fitted.effective_diode_capacitance,
    )


def _harvested(d: CalibratedDefaults, p: PowerLevel, fraction: float) -> tuple[float, float]:
    circuit = table1_circuit(p, defaults=d)
    h = harvester_output(RectifierHarvester(circuit), fraction, _CALIB_LOAD_RANGE, 8)
    return h.operating_power, h.operating_voltage


def calibrate_pmic_power(d: CalibratedDefaults, t: CalibrationTargets, result: CalibrationResult) -> CalibratedDefaults:
    cfg = PmicConfig.from_defaults(d)
    duty, hold = cfg.harvest_duty, t.hold_voltage
    low, peak, floor = PowerLevel(t.low_power), PowerLevel(t.peak_power), PowerLevel(t.floor_power)
    p_low, _ = _harvested(d, low, cfg.mppt_fraction)
    p_peak, _ = _harvested(d, peak, cfg.mppt_fraction)
    p_floor, _ = _harvested(d, floor, cfg.mppt_fraction)
    if min(p_low, p_peak, p_floor) <= 0:
        raise CalibrationError("Potência colhida nula em um dos pontos de calibração")

    i_q = d.pmic.regulator_quiescent_current
    eta_low = eta_peak = d.boost.constant_efficiency
    for it in range(t.iterations):
        # 3. η necessária nos dois pontos
        eta_low = (t.low_efficiency * low.watts + hold * i_q) / (duty * p_low)
        eta_peak = (t.peak_efficiency * peak.watts + hold * i_q) / (duty * p_peak)
        eta_low = min(max(eta_low, _ETA_MIN), _ETA_MAX)
        eta_peak = min(max(eta_peak, _ETA_MIN), _ETA_MAX)
        # 4. I_q pelo piso; abaixo de low_power a tabela trava na borda
        eta_floor = eta_low if p_floor <= p_low else eta_peak
        i_q = duty * eta_floor * p_floor / hold
        result.note(f"iteração {it + 1}: η(-) = {eta_low:.4f}, η(+) = {eta_peak:.4f}, I_q = {i_q:.4g} A")

    d = _update(
        d, "boost",
        powers=[p_low, p_peak],
        voltages=[cfg.normal_min_voltage, cfg.boost_max_voltage],
        efficiencies=[[eta_low, eta_low], [eta_peak, eta_peak]],
    )
    return _update(d, "pmic", regulator_quiescent_current=i_q)


def _bisect(
    f: Callable[[float], Optional[float]], lo: float, hi: float, target: float, what: str,
) -> float:
    """Bissecção em escala log para f crescente; `None` conta como +∞."""
    def value(x: float) -> float:
        v = f(x)
        return math.inf if v is None else v

    if value(lo) > target or value(hi) < target:
        raise CalibrationError(f"Alvo de {what} fora do alcance do knob", {"lo": lo, "hi": hi, "target": target})
    for _ in range(_BISECT_ITER):
        mid = math.sqrt(lo * hi)
        if value(mid) < target:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


def calibrate_cold_start(d: CalibratedDefaults, t: CalibrationTargets, result: CalibrationResult) -> CalibratedDefaults:
    p = PowerLevel(t.cold_start_power)
    cfg0 = PmicConfig.from_defaults(d)
    h = harvester_output(RectifierHarvester(table1_circuit(p, defaults=d)), cfg0.mppt_fraction, _CALIB_LOAD_RANGE, 8)
    duration = 1.5 * t.full_time

    def first(cfg: PmicConfig, kind: Milestone) -> Optional[float]:
        return simulate_cold_start(cfg, p, lambda: h, duration, _CALIB_DT, duration).first(kind)

    # 5a. C_boost: tempo de wake-up é proporcional a C (sem carga durante o cold start)
    c = d.pmic.storage_capacitance
    for _ in range(3):
        t_wake = first(PmicConfig.from_defaults(d, storage_capacitance=c), Milestone.WAKE_UP_COMPLETE)
        if t_wake is None:
            c *= 0.5
            continue
        c *= t.wake_time / t_wake
    d = _update(d, "pmic", storage_capacitance=c)

    # 5b/5c. inrush e carga, duas rodadas porque um afeta o outro
    for _ in range(2):
        inrush = _bisect(
            lambda q: first(PmicConfig.from_defaults(d, inrush_charge=q), Milestone.NORMAL_OPERATION),
            1e-7, 1e-3, t.normal_time, "tempo de operação normal",
        )
        d = _update(d, "pmic", inrush_charge=inrush)
        load = _bisect(
            lambda i: first(PmicConfig.from_defaults(d, output_load_current=i), Milestone.OVERCHARGE_PROTECT),
            1e-9, 1e-4, t.full_time, "tempo de carga completa",
        )
        d = _update(d, "pmic", output_load_current=load)

    cfg = PmicConfig.from_defaults(d)
    trace = simulate_cold_start(cfg, p, lambda: h, duration, _CALIB_DT, duration)
    times = {m.value: trace.first(m) for m in (Milestone.WAKE_UP_COMPLETE, Milestone.NORMAL_OPERATION,
                                               Milestone.OVERCHARGE_PROTECT)}
    result.note(
        f"C_boost = {c:.4g} F, inrush = {d.pmic.inrush_charge:.4g} C, carga = {d.pmic.output_load_current:.4g} A; "
        f"marcos em {p}: " + ", ".join(f"{k} {v if v is None else round(v, 2)} s" for k, v in times.items())
    )
    return d


# ── Verificação dos alvos ────────────────────────────────────────────────────

_PEAK_EFFICIENCY_TOL = 0.05
_LOW_EFFICIENCY_MIN = 0.30
_FLOOR_WINDOW = (-17.0, -15.0)
_MILESTONE_TOL = 0.20
_CHECK_DT = 1e-3


@dataclass
class CalibrationCheck:
    """Resultado dos defaults calibrados contra as janelas de aceitação."""

    targets: CalibrationTargets
    peak_efficiency: float
    low_efficiency: float
    floor_dbm: Optional[float]
    milestone_times: dict[Milestone, Optional[float]]
    sequence: list[Milestone]

    def failures(self) -> list[str]:
        t = self.targets
        out = []
        if not abs(self.peak_efficiency - t.peak_efficiency) <= _PEAK_EFFICIENCY_TOL:
            out.append(f"eficiência em {t.peak_power} dBm = {self.peak_efficiency:.4f}")
        if not self.low_efficiency > _LOW_EFFICIENCY_MIN:
            out.append(f"eficiência em {t.low_power} dBm = {self.low_efficiency:.4f}")
        if self.floor_dbm is None or not _FLOOR_WINDOW[0] <= self.floor_dbm <= _FLOOR_WINDOW[1]:
            out.append(f"piso energético = {self.floor_dbm}")
        expected = {
            Milestone.WAKE_UP_COMPLETE: t.wake_time,
            Milestone.NORMAL_OPERATION: t.normal_time,
            Milestone.OVERCHARGE_PROTECT: t.full_time,
        }
        for kind, target in expected.items():
            got = self.milestone_times.get(kind)
            if got is None or abs(got - target) > _MILESTONE_TOL * target:
                out.append(f"{kind.value} em {got} s (alvo {target} s)")
        # UVLO pode se repetir antes da operação normal; vale a ordem da primeira ocorrência
        first_seen = list(dict.fromkeys(self.sequence))
        if first_seen != list(STARTUP_SEQUENCE) or self.sequence[-1:] != [STARTUP_SEQUENCE[-1]]:
            out.append("sequência de partida " + " → ".join(m.value for m in self.sequence))
        return out


def check_calibration(d: CalibratedDefaults, t: CalibrationTargets) -> CalibrationCheck:
    """Mede os defaults `d` pelos mesmos caminhos dos cenários ponta a ponta e de partida a frio."""
    cfg = PmicConfig.from_defaults(d)
    fe = RectifierFrontend(table1_circuit(defaults=d))
    peak, low = end_to_end_efficiency(cfg, fe, [PowerLevel(t.peak_power), PowerLevel(t.low_power)], t.hold_voltage)
    lo, hi = _FLOOR_WINDOW
    grid = [PowerLevel(float(x)) for x in range(int(lo) - 2, int(hi) + 3)]
    floor = energy_positive_floor(end_to_end_efficiency(cfg, fe, grid, t.hold_voltage))

    duration = 1.5 * t.full_time
    trace = simulate_cold_start(cfg, PowerLevel(t.cold_start_power), fe, duration, _CHECK_DT, duration)
    return CalibrationCheck(
        targets=t,
        peak_efficiency=peak.efficiency,
        low_efficiency=low.efficiency,
        floor_dbm=floor,
        milestone_times={m: trace.first(m) for m in STARTUP_SEQUENCE},
        sequence=trace.sequence(),
    )


@log_operation("rfh.calibrate")
def run_calibration(targets: CalibrationTargets, defaults: Optional[CalibratedDefaults] = None) -> CalibrationResult:
    d = defaults or load_defaults()
    # parte sempre do diodo sem escala
    d = _update(d, "calibration", is_scale=1.0, rs_scale=1.0)
    result = CalibrationResult(d)
    d = calibrate_diode(d, targets, result)
    d = calibrate_matching(d, targets, result)
    d = calibrate_pmic_power(d, targets, result)
    d = calibrate_cold_start(d, targets, result)

    check = check_calibration(d, targets)
    failures = check.failures()
    result.check = check
    floor = "ausente" if check.floor_dbm is None else f"{check.floor_dbm:.2f} dBm"
    result.note(
        f"verificação: η {check.peak_efficiency:.4f} em {targets.peak_power} dBm, "
        f"η {check.low_efficiency:.4f} em {targets.low_power} dBm, piso {floor}"
    )
    for failure in failures:
        result.note(f"fora da janela: {failure}")
    if failures:
        logger.warning("calibration_out_of_window", extra={
            "event": "calibration_out_of_window", "failures": failures,
        })
    result.defaults = _update(d, "calibration", calibrated=not failures)
    return result


def write_defaults(result: CalibrationResult, out_dir: Path) -> Path:
    header = [
        f"Defaults do simulador {TOOL_NAME} {__version__}.",
        "",
        "Gerado por app.scripts.calibrate.",
        "Knobs ajustados: escala de Is, C_eff/R_p, tabela de η do boost, I_q,",
        "C_boost, carga de inrush e corrente de carga do trilho regulado.",
        "",
        *result.provenance,
    ]
    path = Path(out_dir) / "defaults.toml"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_defaults(result.defaults, header), encoding="utf-8")
    return path


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="python -m app.scripts.calibrate", description=__doc__.splitlines()[1])
    parser.add_argument("--scenario", type=Path, help="cenário com seção [calibration] (opcional)")
    parser.add_argument("--out", type=Path, default=settings.defaults_file.parent)
    args = parser.parse_args(argv)

    setup_logging(settings.app_env, settings.log_level)
    targets = CalibrationTargets()
    if args.scenario is not None:
        from app.scenarios.runner import load_scenario

        scenario = load_scenario(args.scenario).scenario
        targets = scenario.calibration or targets
    path = write_defaults(run_calibration(targets), args.out)
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
