# app/tools/rectifier.py
"""
Simulação não linear do retificador Schottky (dobrador de tensão ou meia onda).

O circuito vira uma pequena análise nodal modificada: capacitores e indutores
são trocados por modelos companheiros trapezoidais (passo fixo), a fonte de
Thévenin por um equivalente de Norton, e cada diodo por Rs em série com a
junção (Shockley ∥ Cj). A cada passo só as tensões de junção entram no Newton;
o resto da rede é resolvido pela inversa pré-calculada da matriz de condutâncias.

O regime periódico é obtido integrando períodos inteiros. Quando a carga do
capacitor de saída é lenta, um Newton de shooting sobre o mapa de um período
(com a sensibilidade exata propagada junto com a integração) salta para o
estado periódico e a periodicidade é reverificada por integração comum.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.config.defaults import CalibratedDefaults, load_defaults
from app.config.settings import settings
from app.core.enums import ElementKind, JunctionCapacitanceModel, LoadMode, Placement, RectifierTopology
from app.core.errors import (
    DegenerateSolutionError, HarvestError, InvalidQuantityError, NewtonConvergenceError,
    NotConvergedError, StepTooCoarseError,
)
from app.core.logging_config import log_operation
from app.core.parallel import ordered_map
from app.core.tables import ResultTable
from app.core.units import DEFAULT_Z0, ComplexImpedance, Frequency, PowerLevel, available_power, source_amplitude
from app.tools.matching import PiMatchDesign, build_table1_network
from app.tools.network import LumpedElement

logger = logging.getLogger("rfh.rectifier")

GND = -1
DEFAULT_LOAD = 5e3

_EXP_LIMIT = 40.0
_NEWTON_ATOL = 1e-12
_NEWTON_RTOL = 1e-10
_NEWTON_MAX_ITER = 100
_GMIN = 1e-12

_PERIODICITY_TOL = 1e-6
_STEP_CHANGE_LIMIT = 0.5
_WARMUP_PERIODS = 8
_RESHOOT_INTERVAL = 50
_SHOOT_MAX_ITER = 30
_SHOOT_BACKTRACK = 8
_SHOOT_TOL = 1e-10


# ── Modelos ──────────────────────────────────────────────────────────────────

class DiodeModel(BaseModel):
    """Parâmetros de Shockley + capacitância de junção (estilo SPICE)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    saturation_current: float = Field(gt=0)
    ideality_factor: float = Field(ge=1.0, le=2.0)
    series_resistance: float = Field(ge=0)
    junction_capacitance_zero_bias: float = Field(ge=0)
    thermal_voltage: float = Field(default=0.02585, gt=0)
    junction_potential: float = Field(default=0.2, gt=0)
    grading_coefficient: float = Field(default=0.5, gt=0, lt=1)
    depletion_fc: float = Field(default=0.5, gt=0, lt=1)

    @property
    def nvt(self) -> float:
        return self.ideality_factor * self.thermal_voltage

    @property
    def critical_voltage(self) -> float:
        return self.nvt * math.log(self.nvt / (math.sqrt(2.0) * self.saturation_current))

    def scaled(self, is_scale: float = 1.0, rs_scale: float = 1.0) -> "DiodeModel":
        return self.model_copy(update={
            "saturation_current": self.saturation_current * is_scale,
            "series_resistance": self.series_resistance * rs_scale,
        })

    @classmethod
    def bat15_04w(cls, defaults: Optional[CalibratedDefaults] = None, calibrated: bool = True) -> "DiodeModel":
        """BAT15-04W do arquivo de defaults; `calibrated` aplica as escalas de Is/Rs."""
        d = defaults or load_defaults()
        base = cls(**d.diode.model_dump())
        if not calibrated:
            return base
        return base.scaled(d.calibration.is_scale, d.calibration.rs_scale)


@dataclass(frozen=True)
class SourceSpec:
    amplitude: float  # V de pico da fonte de Thévenin
    impedance: ComplexImpedance = ComplexImpedance(DEFAULT_Z0)
    frequency: Frequency = Frequency(915e6)

    @property
    def available_power(self) -> float:
        return available_power(self.amplitude, self.impedance)


@dataclass(frozen=True)
class RectifierCircuit:
    matching: Optional[PiMatchDesign]
    diode: DiodeModel
    output_capacitor: LumpedElement
    load_resistance: float
    source: SourceSpec
    topology: RectifierTopology = RectifierTopology.VOLTAGE_DOUBLER
    input_shunt_capacitance: float = 0.0
    junction_capacitance_model: JunctionCapacitanceModel = JunctionCapacitanceModel.CONSTANT

    def __post_init__(self):
        if not (self.load_resistance > 0 and math.isfinite(self.load_resistance)):
            raise InvalidQuantityError("Carga precisa ser > 0", {"load_resistance": self.load_resistance})
        if not self.source.amplitude >= 0:
            raise InvalidQuantityError("Amplitude da fonte precisa ser ≥ 0", {"amplitude": self.source.amplitude})
        if self.source.impedance.resistance <= 0:
            raise InvalidQuantityError("Fonte precisa de resistência > 0", {"z_source": str(self.source.impedance)})
        if self.input_shunt_capacitance < 0:
            raise InvalidQuantityError("Capacitância de pad precisa ser ≥ 0")
        if self.diode.series_resistance == 0 and self.diode.junction_capacitance_zero_bias > 0:
            # Cj sem Rs fecha laço só de capacitores com C3
            raise InvalidQuantityError(
                "Capacitância de junção exige resistência série > 0",
                {"series_resistance": 0.0, "junction_capacitance_zero_bias": self.diode.junction_capacitance_zero_bias},
            )

    @property
    def available_power(self) -> float:
        return self.source.available_power

    def with_load(self, load_resistance: float) -> "RectifierCircuit":
        return replace(self, load_resistance=load_resistance)

    def with_amplitude(self, amplitude: float) -> "RectifierCircuit":
        return replace(self, source=replace(self.source, amplitude=amplitude))

    def with_input_power(self, p: PowerLevel) -> "RectifierCircuit":
        return self.with_amplitude(source_amplitude(p, self.source.impedance))

    def with_diode(self, diode: DiodeModel) -> "RectifierCircuit":
        return replace(self, diode=diode)


def table1_circuit(
    input_power: PowerLevel = PowerLevel(0.0),
    load_resistance: float = DEFAULT_LOAD,
    defaults: Optional[CalibratedDefaults] = None,
    q_config: Optional[dict[str, Optional[float]]] = None,
) -> RectifierCircuit:
    """Circuito completo da Tabela de projeto com o diodo calibrado."""
    d = defaults or load_defaults()
    design = build_table1_network(q_config, d)
    c3 = LumpedElement(
        ElementKind.CAPACITOR, d.matching.output_capacitor, Placement.SHUNT,
        d.matching.q_output_capacitor, name="C3",
    )
    z_src = ComplexImpedance(DEFAULT_Z0)
    return RectifierCircuit(
        matching=design,
        diode=DiodeModel.bat15_04w(d),
        output_capacitor=c3,
        load_resistance=load_resistance,
        source=SourceSpec(source_amplitude(input_power, z_src), z_src, design.target_frequency),
        input_shunt_capacitance=d.calibration.input_shunt_capacitance,
    )


# ── Netlist ──────────────────────────────────────────────────────────────────

@dataclass
class _Netlist:
    nodes: list[str] = field(default_factory=list)
    resistors: list[tuple[int, int, float, str]] = field(default_factory=list)
    capacitors: list[tuple[int, int, float, str]] = field(default_factory=list)
    inductors: list[tuple[int, int, float, str]] = field(default_factory=list)
    junctions: list[tuple[int, int, str]] = field(default_factory=list)
    source_node: int = 0
    source_conductance: float = 0.0
    input_node: int = 0
    output_node: int = 0
    input_branch: tuple[str, int] = ("source", 0)

    def node(self, name: str) -> int:
        self.nodes.append(name)
        return len(self.nodes) - 1

    def add_lumped(self, e: LumpedElement, n1: int, n2: int, f_hz: float, label: str) -> tuple[str, int]:
        """Adiciona o elemento (com ESR interna se tiver Q) e devolve o ramo reativo."""
        if e.kind == ElementKind.RESISTOR:
            self.resistors.append((n1, n2, e.value, label))
            return ("resistor", len(self.resistors) - 1)
        if e.is_lossy:
            k = self.node(f"{label}_esr")
            self.resistors.append((n1, k, float(e.esr(f_hz)), "esr"))
            n1 = k
        if e.kind == ElementKind.CAPACITOR:
            self.capacitors.append((n1, n2, e.value, label))
            return ("capacitor", len(self.capacitors) - 1)
        self.inductors.append((n1, n2, e.value, label))
        return ("inductor", len(self.inductors) - 1)

    def add_diode(self, anode: int, cathode: int, diode: DiodeModel, label: str) -> None:
        if diode.series_resistance > 0:
            j = self.node(f"{label}_j")
            self.resistors.append((anode, j, diode.series_resistance, "diode_rs"))
            anode = j
        self.junctions.append((anode, cathode, label))


def _build_netlist(c: RectifierCircuit) -> _Netlist:
    net = _Netlist()
    f_hz = c.source.frequency.hertz
    w = c.source.frequency.omega

    # 1. Fonte (Norton) e reatância de fonte como elemento série
    src = net.node("src")
    net.source_node = src
    net.source_conductance = 1.0 / c.source.impedance.resistance
    a, feed = src, ("source", 0)
    xs = c.source.impedance.reactance
    if xs != 0.0:
        a = net.node("src_x")
        if xs > 0:
            feed = net.add_lumped(LumpedElement(ElementKind.INDUCTOR, xs / w), src, a, f_hz, "Xs")
        else:
            feed = net.add_lumped(LumpedElement(ElementKind.CAPACITOR, -1.0 / (w * xs)), src, a, f_hz, "Xs")

    # 2. Rede de casamento (C_eff não entra: os diodos trazem a própria Cj)
    if c.matching is not None:
        b = net.node("b")
        net.add_lumped(c.matching.dc_block, a, b, f_hz, "C1")
        net.add_lumped(c.matching.shunt_capacitor, b, GND, f_hz, "C2")
        rect_in = net.node("in")
        feed = net.add_lumped(c.matching.series_inductor, b, rect_in, f_hz, "L1")
    else:
        rect_in = a
    net.input_node = rect_in
    net.input_branch = feed

    if c.input_shunt_capacitance > 0:
        net.capacitors.append((rect_in, GND, c.input_shunt_capacitance, "pad"))

    # 3. Diodos e saída
    out = net.node("out")
    net.output_node = out
    if c.topology == RectifierTopology.VOLTAGE_DOUBLER:
        net.add_diode(GND, rect_in, c.diode, "D2")
    net.add_diode(rect_in, out, c.diode, "D1")
    net.add_lumped(c.output_capacitor, out, GND, f_hz, "C3")
    net.resistors.append((out, GND, c.load_resistance, "load"))

    for idx in range(len(net.nodes)):
        net.resistors.append((idx, GND, 1.0 / _GMIN, "gmin"))
    return net


def _incidence(n_nodes: int, branches: list[tuple]) -> np.ndarray:
    m = np.zeros((n_nodes, len(branches)))
    for col, (n1, n2, *_rest) in enumerate(branches):
        if n1 != GND:
            m[n1, col] += 1.0
        if n2 != GND:
            m[n2, col] -= 1.0
    return m


# ── Dispositivo ──────────────────────────────────────────────────────────────

def _shockley(v: np.ndarray, i_s: float, nvt: float) -> tuple[np.ndarray, np.ndarray]:
    """Corrente e condutância; acima de 40·nVt a exponencial vira reta tangente."""
    arg = v / nvt
    clipped = np.minimum(arg, _EXP_LIMIT)
    e = np.exp(clipped)
    i = i_s * (np.expm1(clipped) + e * (arg - clipped))
    return i, i_s / nvt * e


def _junction_charge(v: np.ndarray, d: DiodeModel, depletion: bool) -> tuple[np.ndarray, np.ndarray]:
    cj0 = d.junction_capacitance_zero_bias
    if not depletion:
        return cj0 * v, np.full_like(v, cj0)
    vj, m, fc = d.junction_potential, d.grading_coefficient, d.depletion_fc
    vfc = fc * vj
    base = 1.0 - np.minimum(v, vfc) / vj
    q_dep = cj0 * vj / (1.0 - m) * (1.0 - base ** (1.0 - m))
    c_dep = cj0 * base ** (-m)
    # acima de fc·vj a capacitância é extrapolada linearmente
    c_fc = cj0 * (1.0 - fc) ** (-m)
    q_fc = cj0 * vj / (1.0 - m) * (1.0 - (1.0 - fc) ** (1.0 - m))
    dv = np.maximum(v - vfc, 0.0)
    k = m / (vj * (1.0 - fc))
    below = v < vfc
    q = np.where(below, q_dep, q_fc + c_fc * (dv + 0.5 * k * dv ** 2))
    c = np.where(below, c_dep, c_fc * (1.0 + k * dv))
    return q, c


# ── Integrador ───────────────────────────────────────────────────────────────

@dataclass
class _PeriodRecord:
    x: np.ndarray        # (steps + 1, N) tensões nodais, inclui o estado inicial
    ic: np.ndarray       # (steps + 1, nc)
    il: np.ndarray       # (steps + 1, nl)
    icj: np.ndarray      # (steps + 1, K) corrente capacitiva de junção
    i_diode: np.ndarray  # (steps + 1, K) corrente de Shockley


@dataclass
class _ShootResult:
    state: Optional[np.ndarray]
    iterations: int


class _TransientEngine:
    def __init__(self, c: RectifierCircuit, steps: int):
        self.circuit = c
        self.net = _build_netlist(c)
        self.steps = steps
        period = 1.0 / c.source.frequency.hertz
        self.h = period / steps
        self.k2 = 2.0 / self.h

        net = self.net
        n = len(net.nodes)
        self.n_nodes = n
        self.cinc = _incidence(n, net.capacitors)
        self.linc = _incidence(n, net.inductors)
        self.binc = _incidence(n, net.junctions)
        self.rinc = _incidence(n, net.resistors)
        self.cinc_t, self.linc_t, self.binc_t = self.cinc.T, self.linc.T, self.binc.T
        self.gc = np.array([2.0 * cap / self.h for *_n, cap, _l in net.capacitors])
        self.gl = np.array([self.h / (2.0 * ind) for *_n, ind, _l in net.inductors])
        self.gr = np.array([1.0 / r for *_n, r, _l in net.resistors])
        self.r_tags = [tag for *_n, _r, tag in net.resistors]

        g = self.rinc @ np.diag(self.gr) @ self.rinc.T
        if net.capacitors:
            g += self.cinc @ np.diag(self.gc) @ self.cinc_t
        if net.inductors:
            g += self.linc @ np.diag(self.gl) @ self.linc_t
        g[net.source_node, net.source_node] += net.source_conductance
        self.ginv = np.linalg.inv(g)
        self.ginvb = self.ginv @ self.binc
        self.m = self.binc_t @ self.ginvb
        self.k = len(net.junctions)
        self.eye_k = np.eye(self.k)

        nc, nl = len(net.capacitors), len(net.inductors)
        self.sx = slice(0, n)
        self.sc = slice(n, n + nc)
        self.sl = slice(n + nc, n + nc + nl)
        self.sj = slice(n + nc + nl, n + nc + nl + self.k)
        self.size = n + nc + nl + self.k

        phase = 2.0 * np.pi * np.arange(steps + 1) / steps
        self.j_phase = c.source.amplitude * net.source_conductance * np.sin(phase)

        d = c.diode
        self.diode = d
        self.nvt = d.nvt
        self.vcrit = d.critical_voltage
        self.depletion = c.junction_capacitance_model == JunctionCapacitanceModel.DEPLETION

    # 1. Newton nas tensões de junção
    def _limit(self, v_old: np.ndarray, v_new: np.ndarray) -> np.ndarray:
        dv = v_new - v_old
        mask = (v_new > self.vcrit) & (np.abs(dv) > 2.0 * self.nvt)
        if not mask.any():
            return v_new
        pos = v_old + self.nvt * np.log1p(np.maximum(dv, -0.999999 * self.nvt) / self.nvt)
        neg = self.nvt * np.log(np.maximum(v_new / self.nvt, 1e-300))
        return np.where(mask, np.where(v_old > 0, pos, neg), v_new)

    def _solve_junctions(self, w, vold, qold, icj_old, step: int):
        v = vold.copy()
        i_prev = None
        v_prev = None
        for _ in range(_NEWTON_MAX_ITER):
            i_d, g = _shockley(v, self.diode.saturation_current, self.nvt)
            q, c = _junction_charge(v, self.diode, self.depletion)
            i = i_d + self.k2 * (q - qold) - icj_old
            if i_prev is not None:
                small_i = np.abs(i - i_prev) <= _NEWTON_ATOL + _NEWTON_RTOL * np.abs(i)
                stalled = np.abs(v - v_prev) <= 4e-16 * np.maximum(np.abs(v), self.nvt)
                if np.all(small_i | stalled):
                    return v, i_d, i, q, g, c
            f = v + self.m @ i - w
            jac = self.eye_k + self.m * (g + self.k2 * c)[None, :]
            dv = np.linalg.solve(jac, -f)
            i_prev, v_prev = i, v
            v = self._limit(v, v + dv)
        raise NewtonConvergenceError(
            "Newton das junções não convergiu",
            {"step": step, "v": v.tolist(), "max_iter": _NEWTON_MAX_ITER},
        )

    # 2. Um passo trapezoidal (coluna 0 = estado, demais = tangentes)
    def advance(self, s: np.ndarray, step: int):
        x, ic, il, icj = s[self.sx], s[self.sc], s[self.sl], s[self.sj]
        vc = self.cinc_t @ x
        vl = self.linc_t @ x
        rhs = self.cinc @ (self.gc[:, None] * vc + ic) - self.linc @ (il + self.gl[:, None] * vl)
        rhs[self.net.source_node, 0] += self.j_phase[step + 1]
        y = self.ginv @ rhs
        w = self.binc_t @ y
        vold = self.binc_t @ x
        qold, cold = _junction_charge(vold[:, 0], self.diode, self.depletion)
        v, i_d, i_tot, q, g, c = self._solve_junctions(w[:, 0], vold[:, 0], qold, icj[:, 0], step)

        width = s.shape[1]
        cur = np.empty((self.k, width))
        new_icj = np.empty((self.k, width))
        cur[:, 0] = i_tot
        new_icj[:, 0] = self.k2 * (q - qold) - icj[:, 0]
        if width > 1:
            d = g + self.k2 * c
            jac = self.eye_k + self.m * d[None, :]
            dvold = vold[:, 1:]
            hist = self.k2 * cold[:, None] * dvold + icj[:, 1:]
            dv = np.linalg.solve(jac, w[:, 1:] + self.m @ hist)
            cur[:, 1:] = d[:, None] * dv - hist
            new_icj[:, 1:] = self.k2 * (c[:, None] * dv - cold[:, None] * dvold) - icj[:, 1:]

        x_new = y - self.ginvb @ cur
        out = np.empty_like(s)
        out[self.sx] = x_new
        out[self.sc] = self.gc[:, None] * (self.cinc_t @ x_new - vc) - ic
        out[self.sl] = il + self.gl[:, None] * (self.linc_t @ x_new + vl)
        out[self.sj] = new_icj
        return out, i_d

    def run_period(self, s: np.ndarray, record: bool = False):
        rec = None
        if record:
            rec = _PeriodRecord(
                x=np.empty((self.steps + 1, self.n_nodes)),
                ic=np.empty((self.steps + 1, self.sc.stop - self.sc.start)),
                il=np.empty((self.steps + 1, self.sl.stop - self.sl.start)),
                icj=np.empty((self.steps + 1, self.k)),
                i_diode=np.empty((self.steps + 1, self.k)),
            )
            self._store(rec, 0, s[:, 0], _shockley(self.binc_t @ s[self.sx, 0], self.diode.saturation_current, self.nvt)[0])
        for n in range(self.steps):
            s, i_d = self.advance(s, n)
            if record:
                self._store(rec, n + 1, s[:, 0], i_d)
        return s, rec

    def _store(self, rec: _PeriodRecord, k: int, s: np.ndarray, i_d: np.ndarray) -> None:
        rec.x[k] = s[self.sx]
        rec.ic[k] = s[self.sc]
        rec.il[k] = s[self.sl]
        rec.icj[k] = s[self.sj]
        rec.i_diode[k] = i_d

    # 3. Shooting
    def period_map(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        batch = np.hstack([s[:, None], np.eye(self.size)])
        end, _ = self.run_period(batch)
        return end[:, 0], end[:, 1:]

    def _state_scale(self, *states: np.ndarray) -> np.ndarray:
        scale = np.empty(self.size)
        for sl, floor in ((self.sx, 1e-9), (self.sc, 1e-15), (self.sl, 1e-15), (self.sj, 1e-15)):
            if sl.stop > sl.start:
                peak = max(float(np.max(np.abs(st[sl]))) for st in states)
                scale[sl] = max(peak, floor)
        return scale

    def shoot(self, s0: np.ndarray) -> _ShootResult:
        s = s0[:, 0].copy()
        try:
            phi, jac = self.period_map(s)
        except NewtonConvergenceError:
            return _ShootResult(None, 0)
        resid = phi - s
        eye = np.eye(self.size)
        for it in range(1, _SHOOT_MAX_ITER + 1):
            scale = self._state_scale(phi, s)
            err = float(np.max(np.abs(resid) / scale))
            logger.debug("shooting_iteration", extra={"event": "shooting_iteration", "iteration": it, "error": err})
            if err <= _SHOOT_TOL:
                return _ShootResult(phi[:, None], it)
            try:
                delta = np.linalg.solve(jac - eye, -resid)
            except np.linalg.LinAlgError:
                return _ShootResult(None, it)
            lam, accepted = 1.0, False
            for _ in range(_SHOOT_BACKTRACK):
                trial = s + lam * delta
                try:
                    phi_t, jac_t = self.period_map(trial)
                except NewtonConvergenceError:
                    lam *= 0.5
                    continue
                resid_t = phi_t - trial
                if float(np.max(np.abs(resid_t) / scale)) < err:
                    s, phi, jac, resid = trial, phi_t, jac_t, resid_t
                    accepted = True
                    break
                lam *= 0.5
            if not accepted:
                return _ShootResult(None, it)
        return _ShootResult(None, _SHOOT_MAX_ITER)


# ── Solução ──────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class EnergyBalance:
    """Energias de um período (J). Fecha por Tellegen sobre as médias de passo."""

    input_energy: float
    resistive_loss: float
    diode_dissipation: float
    load_energy: float
    stored_change: float

    @property
    def residual(self) -> float:
        return self.input_energy - (
            self.resistive_loss + self.diode_dissipation + self.load_energy + self.stored_change
        )

    @property
    def relative_residual(self) -> float:
        scale = max(abs(self.input_energy), self.load_energy, 1e-300)
        return abs(self.residual) / scale


@dataclass(frozen=True)
class SteadyStateSolution:
    circuit: RectifierCircuit
    time: np.ndarray
    node_waveforms: dict[str, np.ndarray]
    diode_currents: dict[str, np.ndarray]
    input_voltage: np.ndarray
    input_current: np.ndarray
    dc_output_voltage: float
    dc_output_power: float
    input_power_available: float
    input_power_delivered: float
    efficiency: float
    fundamental_input_impedance: Optional[ComplexImpedance]
    converged: bool
    periods: int
    shooting_iterations: int
    periodicity_error: float
    energy: EnergyBalance
    steps_per_period: int

    def raise_if_not_converged(self) -> "SteadyStateSolution":
        if not self.converged:
            raise NotConvergedError(
                f"Regime periódico não atingido em {self.periods} períodos",
                {"periods": self.periods, "periodicity_error": self.periodicity_error},
            )
        return self


def _periodicity_error(prev: np.ndarray, cur: np.ndarray) -> float:
    peak = float(np.max(np.abs(cur)))
    if peak == 0.0:
        return 0.0
    return float(np.max(np.abs(cur - prev))) / peak


def _branch_voltages(x: np.ndarray, inc: np.ndarray) -> np.ndarray:
    return x @ inc


def _midpoint_energy(v: np.ndarray, i: np.ndarray, h: float) -> np.ndarray:
    """Σ h·v̄·ī por coluna (v, i com shape (steps + 1, ramos))."""
    vm = 0.5 * (v[1:] + v[:-1])
    im = 0.5 * (i[1:] + i[:-1])
    return h * np.sum(vm * im, axis=0)


def _energy_balance(eng: _TransientEngine, rec: _PeriodRecord) -> EnergyBalance:
    net, h = eng.net, eng.h
    x = rec.x
    v_src = x[:, net.source_node]
    i_src = eng.j_phase - net.source_conductance * v_src
    e_in = float(_midpoint_energy(v_src[:, None], i_src[:, None], h)[0])

    vr = _branch_voltages(x, eng.rinc)
    e_r = _midpoint_energy(vr, vr * eng.gr[None, :], h)
    tags = np.array(eng.r_tags)
    load = float(np.sum(e_r[tags == "load"]))
    diode_rs = float(np.sum(e_r[tags == "diode_rs"]))
    resistive = float(np.sum(e_r[(tags != "load") & (tags != "diode_rs")]))

    stored = 0.0
    if net.capacitors:
        stored += float(np.sum(_midpoint_energy(_branch_voltages(x, eng.cinc), rec.ic, h)))
    if net.inductors:
        stored += float(np.sum(_midpoint_energy(_branch_voltages(x, eng.linc), rec.il, h)))
    vj = _branch_voltages(x, eng.binc)
    stored += float(np.sum(_midpoint_energy(vj, rec.icj, h)))
    junction = float(np.sum(_midpoint_energy(vj, rec.i_diode, h)))

    return EnergyBalance(
        input_energy=e_in,
        resistive_loss=resistive,
        diode_dissipation=junction + diode_rs,
        load_energy=load,
        stored_change=stored,
    )


def _fundamental_phasor(samples: np.ndarray) -> complex:
    n = samples.size
    k = np.arange(1, n + 1)
    return complex(2.0 / n * np.sum(samples * np.exp(-2j * np.pi * k / n)))


def _input_current(eng: _TransientEngine, rec: _PeriodRecord) -> np.ndarray:
    kind, idx = eng.net.input_branch
    if kind == "inductor":
        return rec.il[1:, idx]
    if kind == "capacitor":
        return rec.ic[1:, idx]
    v_src = rec.x[1:, eng.net.source_node]
    return eng.j_phase[1:] - eng.net.source_conductance * v_src


def _check_resolution(eng: _TransientEngine, rec: _PeriodRecord) -> None:
    i_d = rec.i_diode
    for col, (_a, _c, label) in enumerate(eng.net.junctions):
        peak = float(np.max(np.abs(i_d[:, col])))
        if peak <= 1e-15:
            continue
        jump = float(np.max(np.abs(np.diff(i_d[:, col]))))
        if jump > _STEP_CHANGE_LIMIT * peak:
            raise StepTooCoarseError(
                f"Corrente do diodo {label} varia {jump / peak:.2f}× o pico em um passo; aumente steps_per_period",
                {"diode": label, "relative_jump": jump / peak, "steps_per_period": eng.steps},
            )


def _zero_solution(c: RectifierCircuit, steps: int) -> SteadyStateSolution:
    net = _build_netlist(c)
    period = 1.0 / c.source.frequency.hertz
    zeros = np.zeros(steps)
    return SteadyStateSolution(
        circuit=c,
        time=np.arange(1, steps + 1) * period / steps,
        node_waveforms={name: zeros.copy() for name in net.nodes},
        diode_currents={label: zeros.copy() for *_n, label in net.junctions},
        input_voltage=zeros.copy(),
        input_current=zeros.copy(),
        dc_output_voltage=0.0,
        dc_output_power=0.0,
        input_power_available=0.0,
        input_power_delivered=0.0,
        efficiency=0.0,
        fundamental_input_impedance=None,
        converged=True,
        periods=0,
        shooting_iterations=0,
        periodicity_error=0.0,
        energy=EnergyBalance(0.0, 0.0, 0.0, 0.0, 0.0),
        steps_per_period=steps,
    )


@log_operation("rfh.rectifier")
def solve_steady_state(
    c: RectifierCircuit,
    steps_per_period: Optional[int] = None,
    max_periods: Optional[int] = None,
    accelerate: bool = True,
    check_resolution: bool = True,
    settle_periods: int = 0,
) -> SteadyStateSolution:
    """Regime periódico do retificador.

    Args:
        c: Circuito completo.
        steps_per_period: Passos trapezoidais por período da portadora (≥ 64).
        max_periods: Limite de períodos integrados na trajetória (≥ 10); as
            integrações internas do shooting não contam.
        accelerate: Liga o Newton de shooting após o aquecimento.
        check_resolution: Verifica se o passo resolve a corrente dos diodos.
        settle_periods: Períodos extras integrados depois da convergência; a
            solução vem do último deles e os períodos entram em `periods`.

    Returns:
        Solução com `converged=False` quando o limite de períodos é atingido
        sem periodicidade; o resultado nunca é descartado silenciosamente.
    """
    steps = steps_per_period or settings.steps_per_period
    max_periods = max_periods or settings.max_periods
    if steps < 64:
        raise InvalidQuantityError("steps_per_period precisa ser ≥ 64", {"steps_per_period": steps})
    if max_periods < 10:
        raise InvalidQuantityError("max_periods precisa ser ≥ 10", {"max_periods": max_periods})
    if settle_periods < 0:
        raise InvalidQuantityError("settle_periods precisa ser ≥ 0", {"settle_periods": settle_periods})
    if c.source.amplitude == 0.0:
        return _zero_solution(c, steps)

    eng = _TransientEngine(c, steps)
    s = np.zeros((eng.size, 1))
    prev_x = None
    rec = None
    periods = shooting_iterations = 0
    converged = False
    periodicity = math.inf
    next_shot = min(_WARMUP_PERIODS, max_periods - 2)

    while periods < max_periods:
        s, rec = eng.run_period(s, record=True)
        periods += 1
        if prev_x is not None:
            periodicity = _periodicity_error(prev_x, rec.x[1:])
            if periodicity <= _PERIODICITY_TOL:
                converged = True
                break
        prev_x = rec.x[1:]
        if accelerate and periods >= next_shot and periods < max_periods - 1:
            shot = eng.shoot(s)
            shooting_iterations += shot.iterations
            next_shot = periods + _RESHOOT_INTERVAL
            if shot.state is not None:
                s = shot.state
                prev_x = None

    if converged:
        prev_x = rec.x[1:]
        for _ in range(settle_periods):
            s, rec = eng.run_period(s, record=True)
            periods += 1
            periodicity = _periodicity_error(prev_x, rec.x[1:])
            prev_x = rec.x[1:]

    if not converged:
        logger.warning("steady_state_not_converged", extra={
            "event": "steady_state_not_converged", "periods": periods, "periodicity_error": periodicity,
        })
    if check_resolution:
        _check_resolution(eng, rec)

    net = eng.net
    x = rec.x[1:]
    v_out = x[:, net.output_node]
    v_dc = float(np.mean(v_out))
    p_dc = v_dc ** 2 / c.load_resistance
    p_avail = c.available_power
    energy = _energy_balance(eng, rec)
    period = 1.0 / c.source.frequency.hertz

    v_in = x[:, net.input_node]
    i_in = _input_current(eng, rec)
    v1, i1 = _fundamental_phasor(v_in), _fundamental_phasor(i_in)
    z_fund = None
    if abs(i1) > 1e-18 and abs(v1) > 0:
        z_fund = ComplexImpedance.from_complex(v1 / i1)

    solution = SteadyStateSolution(
        circuit=c,
        time=np.arange(1, steps + 1) * eng.h,
        node_waveforms={name: x[:, idx].copy() for idx, name in enumerate(net.nodes)},
        diode_currents={label: rec.i_diode[1:, col].copy() for col, (*_n, label) in enumerate(net.junctions)},
        input_voltage=v_in.copy(),
        input_current=i_in.copy(),
        dc_output_voltage=v_dc,
        dc_output_power=p_dc,
        input_power_available=p_avail,
        input_power_delivered=energy.input_energy / period,
        efficiency=p_dc / p_avail,
        fundamental_input_impedance=z_fund,
        converged=converged,
        periods=periods,
        shooting_iterations=shooting_iterations,
        periodicity_error=periodicity,
        energy=energy,
        steps_per_period=steps,
    )
    logger.info("steady_state_done", extra={
        "event": "steady_state_converged" if converged else "steady_state_flagged",
        "periods": periods, "shooting_iterations": shooting_iterations,
        "v_dc": v_dc, "efficiency": solution.efficiency,
    })
    return solution


def fundamental_input_impedance(s: SteadyStateSolution) -> ComplexImpedance:
    """Z na fundamental no nó de entrada do retificador (após L1)."""
    s.raise_if_not_converged()
    if s.fundamental_input_impedance is None:
        raise DegenerateSolutionError("Corrente fundamental nula; impedância indefinida")
    return s.fundamental_input_impedance


# ── Sweeps ───────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class EfficiencyPoint:
    power: PowerLevel
    efficiency: float
    mpp_ratio: float
    load_resistance: float
    dc_output_voltage: float
    error: str = ""


def _efficiency_point(
    c: RectifierCircuit,
    p: PowerLevel,
    load_mode: LoadMode,
    steps: Optional[int],
    max_periods: Optional[int],
    load_range: tuple[float, float],
    coarse_points: int,
) -> EfficiencyPoint:
    from app.tools.mpp import RectifierHarvester, find_mpp

    circuit = c.with_input_power(p)
    harvester = RectifierHarvester(circuit, steps, max_periods)
    try:
        if load_mode == LoadMode.MPP_TRACKED:
            res = find_mpp(harvester, load_range, coarse_points)
            return EfficiencyPoint(
                p, res.output_power_at_mpp / circuit.available_power, res.mpp_ratio,
                res.optimal_load_resistance, res.mpp_voltage,
            )
        op = harvester.solve_dc(circuit.load_resistance)
        voc = harvester.open_circuit_voltage()
        ratio = op.voltage / voc if voc > 0 else math.nan
        return EfficiencyPoint(p, op.power / circuit.available_power, ratio, circuit.load_resistance, op.voltage)
    except HarvestError as e:
        logger.warning("sweep_point_failed", extra={"event": "sweep_point_failed", "power_dbm": p.value_dbm, "code": e.code})
        return EfficiencyPoint(p, math.nan, math.nan, math.nan, math.nan, e.short())


@log_operation("rfh.rectifier")
def efficiency_sweep(
    c: RectifierCircuit,
    input_powers: list[PowerLevel],
    load_mode: LoadMode = LoadMode.FIXED,
    steps_per_period: Optional[int] = None,
    max_periods: Optional[int] = None,
    load_range: tuple[float, float] = (100.0, 1e6),
    coarse_points: int = 25,
    workers: Optional[int] = None,
) -> list[EfficiencyPoint]:
    """Eficiência RF→DC por potência de entrada, na ordem da lista.

    Falhas de um ponto ficam no campo `error` e não abortam o sweep.
    """
    if not input_powers:
        raise InvalidQuantityError("Lista de potências vazia")
    return ordered_map(
        lambda p: _efficiency_point(c, p, load_mode, steps_per_period, max_periods, load_range, coarse_points),
        input_powers,
        workers,
    )


def waveform_table(s: SteadyStateSolution) -> ResultTable:
    """Dump de depuração: tempo, tensões nodais e correntes de diodo do último período."""
    names = list(s.node_waveforms)
    diodes = list(s.diode_currents)
    table = ResultTable(
        "waveforms",
        ["time"] + [f"v_{n}" for n in names] + [f"i_{d}" for d in diodes],
        ["s"] + ["V"] * len(names) + ["A"] * len(diodes),
    )
    for k, t in enumerate(s.time):
        table.add_row([t] + [s.node_waveforms[n][k] for n in names] + [s.diode_currents[d][k] for d in diodes])
    return table
