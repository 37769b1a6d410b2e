# app/tools/mpp.py
"""
Ponto de máxima potência (MPP) de um coletor DC visto pela carga.

Um coletor é qualquer objeto com `solve_dc(load) -> DcOperatingPoint`: o
retificador não linear ou as fontes analíticas de referência (Thévenin e a
curva fracionária usada para frontends comerciais sem esquemático).
A busca faz um varrimento logarítmico grosso da carga e refina por seção
áurea em log R em torno do melhor ponto.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Protocol, Union, runtime_checkable

import numpy as np
from scipy.optimize import brentq

from app.core.errors import InvalidQuantityError, NotConvergedError, UnreachableTargetError
from app.core.logging_config import log_operation
from app.core.parallel import ordered_map
from app.core.units import PowerLevel
from app.tools.rectifier import RectifierCircuit, solve_steady_state

logger = logging.getLogger("rfh.mpp")

OPEN_CIRCUIT_LOAD = 1e9
DEFAULT_LOAD_RANGE = (100.0, 1e6)
DEFAULT_COARSE_POINTS = 25
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class DcOperatingPoint:
    load_resistance: float
    voltage: float
    converged: bool = True

    @property
    def current(self) -> float:
        return self.voltage / self.load_resistance

    @property
    def power(self) -> float:
        return self.voltage ** 2 / self.load_resistance


@runtime_checkable
class DcHarvester(Protocol):
    available_power: float

    def solve_dc(self, load_resistance: float) -> DcOperatingPoint: ...


@runtime_checkable
class HarvesterFrontend(Protocol):
    def harvester_at(self, p: PowerLevel) -> DcHarvester: ...


def _check_load(load_resistance: float) -> None:
    if not (load_resistance > 0 and math.isfinite(load_resistance)):
        raise InvalidQuantityError("Carga precisa ser > 0 e finita", {"load_resistance": load_resistance})


# ── Coletores ────────────────────────────────────────────────────────────────

@dataclass
class RectifierHarvester:
    """Retificador não linear; cada carga é um regime periódico completo (com cache)."""

    circuit: RectifierCircuit
    steps_per_period: Optional[int] = None
    max_periods: Optional[int] = None
    strict: bool = False
    _cache: dict[float, DcOperatingPoint] = field(default_factory=dict, repr=False, compare=False)

    @property
    def available_power(self) -> float:
        return self.circuit.available_power

    def solve_dc(self, load_resistance: float) -> DcOperatingPoint:
        _check_load(load_resistance)
        hit = self._cache.get(load_resistance)
        if hit is not None:
            return hit
        sol = solve_steady_state(
            self.circuit.with_load(load_resistance), self.steps_per_period, self.max_periods,
        )
        if self.strict:
            sol.raise_if_not_converged()
        op = DcOperatingPoint(load_resistance, sol.dc_output_voltage, sol.converged)
        self._cache[load_resistance] = op
        return op

    def open_circuit_voltage(self) -> float:
        return self.solve_dc(OPEN_CIRCUIT_LOAD).voltage


@dataclass(frozen=True)
class TheveninSource:
    """Fonte DC linear: V = Voc·RL/(R + RL)."""

    open_circuit_voltage: float
    resistance: float

    def __post_init__(self):
        if self.open_circuit_voltage < 0 or self.resistance <= 0:
            raise InvalidQuantityError(
                "Thévenin precisa de Voc ≥ 0 e R > 0",
                {"voc": self.open_circuit_voltage, "resistance": self.resistance},
            )

    @classmethod
    def from_available_power(cls, power_w: float, resistance: float) -> "TheveninSource":
        return cls(math.sqrt(4.0 * resistance * power_w), resistance)

    @property
    def available_power(self) -> float:
        return self.open_circuit_voltage ** 2 / (4.0 * self.resistance)

    def solve_dc(self, load_resistance: float) -> DcOperatingPoint:
        _check_load(load_resistance)
        v = self.open_circuit_voltage * load_resistance / (self.resistance + load_resistance)
        return DcOperatingPoint(load_resistance, v)


@dataclass(frozen=True)
class FractionalCurveSource:
    """Curva I = Isc·(1 − (V/Voc)^m) com o MPP em `mpp_ratio`·Voc.

    O expoente m sai de (1/(m+1))^(1/m) = mpp_ratio, que só tem solução para
    1/e < mpp_ratio < 1.
    """

    open_circuit_voltage: float
    short_circuit_current: float
    mpp_ratio: float
    available_power: float = math.nan

    def __post_init__(self):
        if not (1.0 / math.e < self.mpp_ratio < 1.0):
            raise InvalidQuantityError(
                "Razão de MPP fora de (1/e, 1)", {"mpp_ratio": self.mpp_ratio}
            )
        if self.open_circuit_voltage <= 0 or self.short_circuit_current <= 0:
            raise InvalidQuantityError("Voc e Isc precisam ser > 0")

    @cached_property
    def exponent(self) -> float:
        return _exponent_for_ratio(self.mpp_ratio)

    @property
    def mpp_power(self) -> float:
        m = self.exponent
        return self.mpp_ratio * self.open_circuit_voltage * self.short_circuit_current * m / (m + 1.0)

    def current(self, v: float) -> float:
        x = min(max(v / self.open_circuit_voltage, 0.0), 1.0)
        return self.short_circuit_current * (1.0 - x ** self.exponent)

    def solve_dc(self, load_resistance: float) -> DcOperatingPoint:
        _check_load(load_resistance)
        voc = self.open_circuit_voltage
        v = brentq(lambda u: self.current(u) - u / load_resistance, 0.0, voc, xtol=1e-15, rtol=1e-12)
        return DcOperatingPoint(load_resistance, float(v))


def _exponent_for_ratio(ratio: float) -> float:
    return float(brentq(lambda m: (1.0 / (m + 1.0)) ** (1.0 / m) - ratio, 1e-9, 1e9, rtol=1e-14))


# ── Frontends (coletor em função da potência de entrada) ─────────────────────

@dataclass(frozen=True)
class RectifierFrontend:
    circuit: RectifierCircuit
    steps_per_period: Optional[int] = None
    max_periods: Optional[int] = None

    def harvester_at(self, p: PowerLevel) -> RectifierHarvester:
        return RectifierHarvester(self.circuit.with_input_power(p), self.steps_per_period, self.max_periods)


@dataclass(frozen=True)
class TheveninFrontend:
    """Fonte linear que entrega `efficiency` da potência disponível no casamento."""

    resistance: float
    efficiency: float = 1.0

    def harvester_at(self, p: PowerLevel) -> TheveninSource:
        return TheveninSource.from_available_power(self.efficiency * p.watts, self.resistance)


@dataclass(frozen=True)
class LinearShiftFrontend:
    """Frontend comercial modelado só pelo comportamento do MPP.

    A razão de MPP desloca linearmente com a potência de entrada
    (`ratio_at_reference` + `slope_per_db`·ΔP), o Voc escala com √P e a
    potência no MPP é `efficiency`·P disponível.
    """

    ratio_at_reference: float = 0.70
    slope_per_db: float = 0.004
    reference_power: PowerLevel = PowerLevel(0.0)
    voc_at_reference: float = 1.0
    efficiency: float = 0.3

    def ratio_at(self, p: PowerLevel) -> float:
        ratio = self.ratio_at_reference + self.slope_per_db * (p.value_dbm - self.reference_power.value_dbm)
        return min(max(ratio, 1.0 / math.e + 1e-6), 1.0 - 1e-6)

    def harvester_at(self, p: PowerLevel) -> FractionalCurveSource:
        ratio = self.ratio_at(p)
        m = _exponent_for_ratio(ratio)
        voc = self.voc_at_reference * math.sqrt(p.watts / self.reference_power.watts)
        isc = self.efficiency * p.watts / (ratio * voc * m / (m + 1.0))
        return FractionalCurveSource(voc, isc, ratio, p.watts)


Frontend = Union[HarvesterFrontend, RectifierCircuit]


def as_frontend(obj: Frontend) -> HarvesterFrontend:
    if isinstance(obj, RectifierCircuit):
        return RectifierFrontend(obj)
    return obj


# ── Busca do MPP ─────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class MppResult:
    optimal_load_resistance: float
    mpp_voltage: float
    open_circuit_voltage: float
    mpp_ratio: float
    output_power_at_mpp: float
    load_sweep_trace: list[tuple[float, float]]
    unimodal: bool = True
    converged: bool = True


def _local_maxima(powers: np.ndarray) -> int:
    """Número de picos do varrimento grosso, ignorando ruído relativo < 1e-9."""
    tol = 1e-9 * float(np.max(np.abs(powers))) if powers.size else 0.0
    d = np.diff(powers)
    signs = np.sign(np.where(np.abs(d) <= tol, 0.0, d))
    signs = signs[signs != 0]
    if signs.size == 0:
        return 1
    peaks = int(np.sum((signs[:-1] > 0) & (signs[1:] < 0)))
    # picos nas bordas
    peaks += int(signs[0] < 0) + int(signs[-1] > 0)
    return max(peaks, 1)


def golden_section_max(f, a: float, b: float, tol: float) -> float:
    """Seção áurea em [a, b] maximizando f (unimodal). Devolve o centro do intervalo final."""
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


@log_operation("rfh.mpp")
def find_mpp(
    harvester: Union[DcHarvester, RectifierCircuit],
    load_range: tuple[float, float] = DEFAULT_LOAD_RANGE,
    coarse_points: int = DEFAULT_COARSE_POINTS,
    tolerance: float = 1e-3,
) -> MppResult:
    """MPP sobre a carga resistiva.

    Args:
        harvester: Coletor DC (ou circuito retificador, embrulhado em `RectifierHarvester`).
        load_range: (R mínima, R máxima) do varrimento logarítmico.
        coarse_points: Pontos do varrimento grosso (≥ 8).
        tolerance: Largura relativa final do intervalo em R (hi/lo − 1).

    Returns:
        O melhor ponto entre todos os avaliados; portanto a potência no MPP
        nunca é menor que a de qualquer ponto do traço.
    """
    if isinstance(harvester, RectifierCircuit):
        harvester = RectifierHarvester(harvester)
    lo, hi = load_range
    if not (0 < lo < hi and math.isfinite(hi)):
        raise InvalidQuantityError("Faixa de carga inválida", {"load_range": [lo, hi]})
    if coarse_points < 8:
        raise InvalidQuantityError("coarse_points precisa ser ≥ 8", {"coarse_points": coarse_points})

    evaluated: dict[float, DcOperatingPoint] = {}

    def power_at_log(log_r: float) -> float:
        r = float(math.exp(log_r))
        op = evaluated.get(r)
        if op is None:
            op = evaluated[r] = harvester.solve_dc(r)
        return op.power

    # 1. Varrimento grosso
    loads = np.logspace(math.log10(lo), math.log10(hi), coarse_points)
    trace = []
    for r in loads:
        op = harvester.solve_dc(float(r))
        evaluated[float(r)] = op
        trace.append((float(r), op.power))
    powers = np.array([p for _, p in trace])
    unimodal = _local_maxima(powers) == 1
    if not unimodal:
        logger.warning("mpp_not_unimodal", extra={"event": "mpp_not_unimodal", "peaks": _local_maxima(powers)})

    # 2. Refinamento em volta do máximo global do varrimento
    i = int(np.argmax(powers))
    a = math.log(loads[max(i - 1, 0)])
    b = math.log(loads[min(i + 1, coarse_points - 1)])
    golden_section_max(power_at_log, a, b, math.log1p(tolerance))

    best = max(evaluated.values(), key=lambda op: (op.power, -op.load_resistance))
    voc = harvester.solve_dc(OPEN_CIRCUIT_LOAD).voltage
    if voc <= 0:
        ratio = math.nan
    else:
        ratio = best.voltage / voc
    converged = all(op.converged for op in evaluated.values())
    logger.info("mpp_found", extra={
        "event": "mpp_found", "load": best.load_resistance, "power_w": best.power,
        "mpp_ratio": ratio, "evaluations": len(evaluated),
    })
    return MppResult(
        optimal_load_resistance=best.load_resistance,
        mpp_voltage=best.voltage,
        open_circuit_voltage=voc,
        mpp_ratio=ratio,
        output_power_at_mpp=best.power,
        load_sweep_trace=trace,
        unimodal=unimodal,
        converged=converged,
    )


def mpp_ratio_sweep(
    frontend: Frontend,
    input_powers: list[PowerLevel],
    load_range: tuple[float, float] = DEFAULT_LOAD_RANGE,
    coarse_points: int = DEFAULT_COARSE_POINTS,
    workers: Optional[int] = None,
) -> list[tuple[PowerLevel, float]]:
    """Razão Vmpp/Voc por potência de entrada, na ordem da lista."""
    if not input_powers:
        raise InvalidQuantityError("Lista de potências vazia")
    fe = as_frontend(frontend)

    def one(p: PowerLevel) -> tuple[PowerLevel, float]:
        return p, find_mpp(fe.harvester_at(p), load_range, coarse_points).mpp_ratio

    return ordered_map(one, input_powers, workers)


# ── Ponto de operação em fração de Voc ───────────────────────────────────────

def operating_point(harvester: DcHarvester, fraction: float, voc: Optional[float] = None) -> DcOperatingPoint:
    """Carga que leva a tensão a `fraction`·Voc (brentq em log R)."""
    if not 0.0 < fraction < 1.0:
        raise InvalidQuantityError("Fração precisa estar em (0, 1)", {"fraction": fraction})
    if voc is None:
        voc = harvester.solve_dc(OPEN_CIRCUIT_LOAD).voltage
    if voc <= 0:
        return DcOperatingPoint(OPEN_CIRCUIT_LOAD, 0.0)
    target = fraction * voc

    def gap(log_r: float) -> float:
        return harvester.solve_dc(math.exp(log_r)).voltage - target

    a, b = math.log(1e-3), math.log(OPEN_CIRCUIT_LOAD)
    if gap(a) > 0:
        raise UnreachableTargetError(
            "Tensão alvo abaixo do alcance mesmo com carga mínima",
            {"target_v": target, "voc": voc},
        )
    log_r = brentq(gap, a, b, xtol=1e-9, rtol=1e-9)
    return harvester.solve_dc(math.exp(log_r))


@dataclass(frozen=True)
class HarvesterOutput:
    """Saída do coletor vista pelo PMIC: Voc e a curva P(V) na saída DC."""

    open_circuit_voltage: float
    voltages: np.ndarray
    powers: np.ndarray
    mppt_fraction: float
    operating_voltage: float
    operating_power: float

    @property
    def max_power(self) -> float:
        return float(np.max(self.powers)) if self.powers.size else 0.0

    def power_at(self, v: float) -> float:
        if v <= 0 or v >= self.open_circuit_voltage:
            return 0.0
        return float(np.interp(v, self.voltages, self.powers))

    @classmethod
    def from_thevenin(cls, source: TheveninSource, fraction: float = 0.5) -> "HarvesterOutput":
        """Curva analítica; útil para PMIC sem passar pelo retificador."""
        voc, r = source.open_circuit_voltage, source.resistance
        v = np.linspace(0.0, voc, 65)
        p = v * (voc - v) / r
        v_op = fraction * voc
        return cls(voc, v, p, fraction, v_op, v_op * (voc - v_op) / r)


@log_operation("rfh.mpp")
def harvester_output(
    harvester: DcHarvester,
    fraction: float = 0.5,
    load_range: tuple[float, float] = DEFAULT_LOAD_RANGE,
    points: int = 16,
) -> HarvesterOutput:
    """Amostra a curva P(V) e o ponto de operação em `fraction`·Voc."""
    voc = harvester.solve_dc(OPEN_CIRCUIT_LOAD).voltage
    op = operating_point(harvester, fraction, voc) if voc > 0 else DcOperatingPoint(OPEN_CIRCUIT_LOAD, 0.0)
    samples = [(0.0, 0.0), (voc, 0.0), (op.voltage, op.power)]
    for r in np.logspace(math.log10(load_range[0]), math.log10(load_range[1]), points):
        s = harvester.solve_dc(float(r))
        samples.append((s.voltage, s.power))
    samples.sort()
    v = np.array([s[0] for s in samples])
    p = np.array([s[1] for s in samples])
    if not all(np.isfinite(p)):
        raise NotConvergedError("Curva do coletor com potência não finita")
    return HarvesterOutput(voc, v, p, fraction, op.voltage, op.power)
