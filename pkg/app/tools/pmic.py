# app/tools/pmic.py
"""
Máquina de estados e balanço de energia do PMIC de colheita (estilo AEM30940).

Modos: asleep → cold_start → normal ⇄ uvlo_lockout, normal ⇄ overcharge_protect.
O armazenamento é um capacitor; a energia é atualizada por E = ½·C·v² a cada
passo. O trilho regulado tem carga própria (inrush) que é puxada do
armazenamento quando a saída é habilitada; se o armazenamento cai ao UVLO no
meio da carga, a saída desliga com o trilho parcialmente carregado.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.interpolate import RegularGridInterpolator

from app.config.defaults import CalibratedDefaults, load_defaults
from app.core.enums import Milestone, PmicMode
from app.core.errors import HarvestError, InvalidQuantityError, PmicError, SimulationAbortedError
from app.core.logging_config import log_operation
from app.core.parallel import ordered_map
from app.core.tables import ResultTable
from app.core.units import PowerLevel
from app.tools.mpp import Frontend, HarvesterOutput, as_frontend, harvester_output

logger = logging.getLogger("rfh.pmic")

DEFAULT_HOLD_VOLTAGE = 3.5
_ACTIVE_MODES = {PmicMode.NORMAL, PmicMode.OVERCHARGE_PROTECT}

_MODE_MILESTONE = {
    (PmicMode.ASLEEP, PmicMode.COLD_START): Milestone.COLD_START_BEGIN,
    (PmicMode.COLD_START, PmicMode.NORMAL): Milestone.WAKE_UP_COMPLETE,
    (PmicMode.NORMAL, PmicMode.UVLO_LOCKOUT): Milestone.UVLO_LOCKOUT,
    (PmicMode.UVLO_LOCKOUT, PmicMode.NORMAL): Milestone.OUTPUT_REENABLED,
    (PmicMode.NORMAL, PmicMode.OVERCHARGE_PROTECT): Milestone.OVERCHARGE_PROTECT,
    (PmicMode.OVERCHARGE_PROTECT, PmicMode.NORMAL): Milestone.OVERCHARGE_RELEASE,
}

# marcos que definem a sequência de partida; os demais são eventos auxiliares do trace
STARTUP_SEQUENCE = (
    Milestone.WAKE_UP_COMPLETE, Milestone.UVLO_LOCKOUT, Milestone.NORMAL_OPERATION, Milestone.OVERCHARGE_PROTECT,
)


# ── Curva do boost ───────────────────────────────────────────────────────────

@dataclass(frozen=True)
class BoostEfficiencyCurve:
    """η do boost: constante ou tabela (potência de entrada, tensão de entrada).

    A tabela é interpolada linearmente em (log10 P, V) e travada nas bordas.
    """

    constant: float = 0.8
    powers: tuple[float, ...] = ()
    voltages: tuple[float, ...] = ()
    table: tuple[tuple[float, ...], ...] = ()

    def __post_init__(self):
        if not 0 < self.constant <= 1:
            raise InvalidQuantityError("η do boost precisa estar em (0, 1]", {"constant": self.constant})
        if self.is_table:
            if len(self.powers) < 2 or len(self.voltages) < 2:
                raise InvalidQuantityError("Tabela do boost precisa de ≥ 2 potências e ≥ 2 tensões")
            arr = np.asarray(self.table, dtype=float)
            if arr.shape != (len(self.powers), len(self.voltages)):
                raise InvalidQuantityError("Tabela do boost com forma inconsistente", {"shape": list(arr.shape)})
            if np.any(arr <= 0) or np.any(arr > 1):
                raise InvalidQuantityError("η da tabela fora de (0, 1]")
            if min(self.powers) <= 0:
                raise InvalidQuantityError("Potências da tabela precisam ser > 0")

    @property
    def is_table(self) -> bool:
        return bool(self.powers or self.voltages or self.table)

    @cached_property
    def _interp(self) -> RegularGridInterpolator:
        return RegularGridInterpolator(
            (np.log10(self.powers), np.asarray(self.voltages, dtype=float)),
            np.asarray(self.table, dtype=float),
            method="linear",
        )

    def __call__(self, power_w: float, voltage: float) -> float:
        if not self.is_table:
            return self.constant
        if power_w <= 0:
            return float(self._interp([[math.log10(self.powers[0]), self.voltages[0]]])[0])
        lp = min(max(math.log10(power_w), math.log10(self.powers[0])), math.log10(self.powers[-1]))
        v = min(max(voltage, self.voltages[0]), self.voltages[-1])
        return float(self._interp([[lp, v]])[0])


# ── Configuração e estado ────────────────────────────────────────────────────

class PmicConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)

    cold_start_min_voltage: float = Field(default=0.380, gt=0)
    cold_start_min_power: float = Field(default=3e-6, gt=0)
    normal_min_voltage: float = Field(default=0.050, gt=0)
    mppt_fraction: float = Field(default=0.50, gt=0, lt=1)
    mppt_sample_period: float = Field(default=0.28, gt=0)
    mppt_sensing_window: float = Field(default=5.12e-3, ge=0)
    v_overcharge: float = Field(default=2.7, gt=0)
    v_uvlo: float = Field(default=2.2, gt=0)
    v_regulated: float = Field(default=1.2, gt=0)
    uvlo_hysteresis: float = Field(default=0.1, gt=0)
    overcharge_hysteresis: float = Field(default=0.05, gt=0)
    wake_voltage: Optional[float] = Field(default=None, gt=0)
    boost_max_voltage: float = Field(default=4.5, gt=0)
    boost_efficiency_curve: BoostEfficiencyCurve = BoostEfficiencyCurve()
    cold_start_efficiency: float = Field(default=0.5, gt=0, le=1)
    storage_capacitance: float = Field(gt=0)
    regulator_quiescent_current: float = Field(ge=0)
    inrush_charge: float = Field(ge=0)
    output_load_current: float = Field(default=0.0, ge=0)
    rail_leak_time_constant: float = Field(default=120.0, gt=0)

    @model_validator(mode="after")
    def _thresholds(self):
        if not self.v_uvlo < self.v_overcharge:
            raise ValueError("v_uvlo precisa ser menor que v_overcharge")
        if not self.reenable_voltage < self.v_overcharge:
            raise ValueError("v_uvlo + histerese precisa ficar abaixo de v_overcharge")
        if not self.v_overcharge <= self.boost_max_voltage:
            raise ValueError("v_overcharge acima da tensão máxima do boost")
        if self.mppt_sensing_window >= self.mppt_sample_period:
            raise ValueError("janela de sensing precisa ser menor que o período de amostragem")
        if self.wake_level <= self.v_uvlo:
            raise ValueError("nível de wake-up precisa ficar acima de v_uvlo")
        return self

    @property
    def wake_level(self) -> float:
        return self.wake_voltage if self.wake_voltage is not None else 0.95 * self.v_overcharge

    @property
    def reenable_voltage(self) -> float:
        return self.v_uvlo + self.uvlo_hysteresis

    @property
    def harvest_duty(self) -> float:
        return 1.0 - self.mppt_sensing_window / self.mppt_sample_period

    @classmethod
    def from_defaults(cls, defaults: Optional[CalibratedDefaults] = None, **overrides) -> "PmicConfig":
        d = defaults or load_defaults()
        b = d.boost
        curve = BoostEfficiencyCurve(
            b.constant_efficiency, tuple(b.powers), tuple(b.voltages), tuple(tuple(r) for r in b.efficiencies),
        )
        values = dict(
            storage_capacitance=d.pmic.storage_capacitance,
            inrush_charge=d.pmic.inrush_charge,
            regulator_quiescent_current=d.pmic.regulator_quiescent_current,
            output_load_current=d.pmic.output_load_current,
            cold_start_efficiency=d.pmic.cold_start_efficiency,
            rail_leak_time_constant=d.pmic.rail_leak_time_constant,
            boost_efficiency_curve=curve,
        )
        values.update(overrides)
        if "wake_voltage" not in overrides:
            v_ovch = overrides.get("v_overcharge", cls.model_fields["v_overcharge"].default)
            values["wake_voltage"] = d.pmic.wake_voltage_fraction * v_ovch
        return cls(**values)


@dataclass(frozen=True)
class PmicState:
    mode: PmicMode = PmicMode.ASLEEP
    v_storage: float = 0.0
    v_out_active: bool = False
    time: float = 0.0
    rail_voltage: float = 0.0  # carga do trilho regulado, em volts equivalentes

    def __post_init__(self):
        if self.v_out_active and self.mode not in _ACTIVE_MODES:
            raise PmicError("Saída ativa fora de normal/overcharge", {"mode": self.mode.value})
        if self.v_storage < 0 or not math.isfinite(self.v_storage):
            raise PmicError("Tensão de armazenamento inválida", {"v_storage": self.v_storage})


@dataclass(frozen=True)
class StepResult:
    state: PmicState
    harvested_power: float   # potência DC do coletor usada no passo (W)
    stored_power: float      # potência entregue ao armazenamento pelo boost/cold start (W)
    load_power: float        # potência retirada do armazenamento (W)
    events: tuple[Milestone, ...] = ()


# ── Passo ────────────────────────────────────────────────────────────────────

def _sensing_overlap(t0: float, t1: float, period: float, window: float) -> float:
    """Tempo de [t0, t1) que cai nas janelas [k·T, k·T + w) de leitura do Voc."""
    if window <= 0:
        return 0.0
    total = 0.0
    k = math.floor(t0 / period)
    while k * period < t1:
        a, b = k * period, k * period + window
        total += max(0.0, min(b, t1) - max(a, t0))
        k += 1
    return total


def _charge_to(v: float, energy_delta: float, c: float) -> float:
    e = 0.5 * c * v * v + energy_delta
    return math.sqrt(2.0 * e / c) if e > 0 else 0.0


def _enable_output(v: float, rail: float, config: PmicConfig) -> tuple[float, float, bool]:
    """Carrega o trilho a partir do armazenamento.

    Returns:
        (v_storage, rail_voltage, completo). Incompleto quando o armazenamento
        bateu no UVLO antes do trilho chegar a v_regulated.
    """
    c = config.storage_capacitance
    need = config.inrush_charge * max(0.0, 1.0 - rail / config.v_regulated)
    budget = max(0.0, c * (v - config.v_uvlo))
    if need <= budget:
        return v - need / c, config.v_regulated, True
    drawn = budget
    if config.inrush_charge > 0:
        rail += config.v_regulated * drawn / config.inrush_charge
    return config.v_uvlo, min(rail, config.v_regulated), False


def _operating_power(config: PmicConfig, h: HarvesterOutput) -> tuple[float, float]:
    if h.mppt_fraction == config.mppt_fraction:
        v_op, p = h.operating_voltage, h.operating_power
    else:
        v_op = config.mppt_fraction * h.open_circuit_voltage
        p = h.power_at(v_op)
    if v_op < config.normal_min_voltage:
        return v_op, 0.0
    return v_op, p


def step_detailed(
    state: PmicState,
    config: PmicConfig,
    h: HarvesterOutput,
    load_current_demand: float,
    dt: float,
) -> StepResult:
    """Avança um passo `dt` e devolve também as potências e os marcos do passo."""
    if not dt > 0 or dt > config.mppt_sample_period:
        raise InvalidQuantityError("dt precisa estar em (0, mppt_sample_period]", {"dt": dt})
    if not math.isfinite(load_current_demand) or load_current_demand < 0:
        raise InvalidQuantityError("Demanda de carga inválida", {"load_current_demand": load_current_demand})
    if not (math.isfinite(h.open_circuit_voltage) and math.isfinite(h.operating_power)):
        raise PmicError("Saída do coletor não finita", {"voc": h.open_circuit_voltage})

    c = config.storage_capacitance
    t0, t1 = state.time, state.time + dt
    mode, v, rail = state.mode, state.v_storage, state.rail_voltage
    events: list[Milestone] = []
    v_op, p_h = _operating_power(config, h)

    def switch(new: PmicMode) -> None:
        nonlocal mode
        events.append(_MODE_MILESTONE[(mode, new)])
        mode = new

    # 1. Acordar
    if mode == PmicMode.ASLEEP:
        if h.open_circuit_voltage >= config.cold_start_min_voltage and h.max_power >= config.cold_start_min_power:
            switch(PmicMode.COLD_START)
        else:
            return StepResult(replace(state, time=t1), 0.0, 0.0, 0.0)

    # 2. Balanço de energia do passo
    stored = load = 0.0
    if mode == PmicMode.COLD_START:
        stored = config.cold_start_efficiency * p_h
    else:
        duty = 1.0 - _sensing_overlap(t0, t1, config.mppt_sample_period, config.mppt_sensing_window) / dt
        stored = config.boost_efficiency_curve(p_h, v_op) * p_h * duty
        i_draw = config.regulator_quiescent_current
        if mode in _ACTIVE_MODES:
            i_draw += load_current_demand
        load = v * i_draw
        if mode == PmicMode.OVERCHARGE_PROTECT:
            # boost estrangulado: só repõe o que sai
            stored = min(stored, load)
    if not (math.isfinite(stored) and math.isfinite(load)):
        raise PmicError("Energia não finita no passo", {"stored": stored, "load": load})
    v = min(_charge_to(v, (stored - load) * dt, c), config.boost_max_voltage)

    if mode not in _ACTIVE_MODES:
        rail *= math.exp(-dt / config.rail_leak_time_constant)

    # 3. Transições
    def enable() -> None:
        nonlocal v, rail
        v, rail, complete = _enable_output(v, rail, config)
        if complete:
            events.append(Milestone.NORMAL_OPERATION)
        else:
            switch(PmicMode.UVLO_LOCKOUT)

    if mode == PmicMode.COLD_START and v >= config.wake_level:
        switch(PmicMode.NORMAL)
        enable()
    elif mode == PmicMode.UVLO_LOCKOUT and v >= config.reenable_voltage:
        switch(PmicMode.NORMAL)
        enable()
    elif mode == PmicMode.NORMAL:
        if v < config.v_uvlo:
            switch(PmicMode.UVLO_LOCKOUT)
        elif v >= config.v_overcharge:
            v = config.v_overcharge
            switch(PmicMode.OVERCHARGE_PROTECT)
    elif mode == PmicMode.OVERCHARGE_PROTECT:
        if v < config.v_overcharge - config.overcharge_hysteresis:
            switch(PmicMode.NORMAL)
        else:
            v = min(v, config.v_overcharge)

    new_state = PmicState(mode, v, mode in _ACTIVE_MODES, t1, rail)
    return StepResult(new_state, p_h, stored, load, tuple(events))


def step(
    state: PmicState,
    config: PmicConfig,
    h: HarvesterOutput,
    load_current_demand: float,
    dt: float,
) -> PmicState:
    return step_detailed(state, config, h, load_current_demand, dt).state


# ── Partida a frio ───────────────────────────────────────────────────────────

@dataclass(frozen=True)
class TraceSample:
    time: float
    mode: PmicMode
    v_storage: float
    harvested_power: float
    load_power: float
    v_out_active: bool


@dataclass
class SimulationTrace:
    samples: list[TraceSample] = field(default_factory=list)
    milestones: list[tuple[Milestone, float]] = field(default_factory=list)

    def milestone_times(self, kind: Milestone) -> list[float]:
        return [t for m, t in self.milestones if m == kind]

    def first(self, kind: Milestone) -> Optional[float]:
        times = self.milestone_times(kind)
        return times[0] if times else None

    def sequence(self, kinds: tuple[Milestone, ...] = STARTUP_SEQUENCE) -> list[Milestone]:
        """Marcos de `kinds` na ordem em que ocorreram, repetições consecutivas colapsadas.

        `cold_start_begin`, `output_reenabled` e `overcharge_release` ficam no trace
        mas não entram na sequência de partida.
        """
        out: list[Milestone] = []
        for m, _ in self.milestones:
            if m in kinds and (not out or out[-1] != m):
                out.append(m)
        return out

    def samples_table(self) -> ResultTable:
        table = ResultTable(
            "coldstart_trace",
            ["time", "mode", "v_storage", "harvested_power", "load_power", "v_out_active"],
            ["s", "", "V", "W", "W", ""],
        )
        for s in self.samples:
            table.add_row([s.time, s.mode.value, s.v_storage, s.harvested_power, s.load_power, s.v_out_active])
        return table

    def milestones_table(self) -> ResultTable:
        table = ResultTable("coldstart_milestones", ["event", "time"], ["", "s"])
        for m, t in self.milestones:
            table.add_row([m.value, t])
        return table


HarvesterSource = Callable[[], HarvesterOutput]


@log_operation("rfh.pmic")
def simulate_cold_start(
    config: PmicConfig,
    input_power: PowerLevel,
    frontend: Union[Frontend, HarvesterSource],
    duration: float,
    dt: float = 1e-3,
    record_interval: float = 0.1,
    load_current: Optional[float] = None,
) -> SimulationTrace:
    """Partida a frio em malha fechada com entrada RF constante.

    Args:
        config: Limiares e parâmetros do PMIC.
        input_power: Potência RF disponível.
        frontend: Frontend (ou circuito retificador) lido a cada amostra de MPPT.
            Um callable sem argumentos que devolve `HarvesterOutput` também é aceito.
        duration: Tempo simulado (s).
        dt: Passo fixo.
        record_interval: Intervalo entre amostras do trace; mudanças de modo
            sempre geram amostra.
        load_current: Corrente do trilho regulado; default `config.output_load_current`.
    """
    if not duration > 0:
        raise InvalidQuantityError("Duração precisa ser > 0", {"duration": duration})
    i_load = config.output_load_current if load_current is None else load_current

    if callable(frontend) and not hasattr(frontend, "harvester_at"):
        read_harvester = frontend
    else:
        fe = as_frontend(frontend)
        cached: dict[str, HarvesterOutput] = {}

        def read_harvester() -> HarvesterOutput:
            # entrada constante: a curva é a mesma em todas as amostras
            if "h" not in cached:
                cached["h"] = harvester_output(fe.harvester_at(input_power), config.mppt_fraction)
            return cached["h"]

    trace = SimulationTrace()
    state = PmicState()
    n_steps = int(round(duration / dt))
    steps_per_sample = max(1, int(round(config.mppt_sample_period / dt)))
    steps_per_record = max(1, int(round(record_interval / dt)))
    h: Optional[HarvesterOutput] = None

    for n in range(n_steps):
        if n % steps_per_sample == 0:
            try:
                h = read_harvester()
            except HarvestError as e:
                raise SimulationAbortedError(
                    f"Coletor falhou em t = {state.time:.3f} s: {e.message}", trace, {"cause": e.code},
                ) from e
        res = step_detailed(state, config, h, i_load, dt)
        # tempo reconstruído do índice para não acumular erro de soma
        state = replace(res.state, time=(n + 1) * dt)
        for m in res.events:
            trace.milestones.append((m, state.time))
            logger.info("pmic_milestone", extra={
                "event": "pmic_milestone", "milestone": m.value, "t": state.time, "v_storage": state.v_storage,
            })
        if res.events or (n + 1) % steps_per_record == 0:
            trace.samples.append(TraceSample(
                state.time, state.mode, state.v_storage, res.harvested_power, res.load_power, state.v_out_active,
            ))
    return trace


# ── Eficiência ponta a ponta ─────────────────────────────────────────────────

@dataclass(frozen=True)
class EndToEndPoint:
    power: PowerLevel
    efficiency: float
    harvested_power: float
    storage_power: float
    operating_voltage: float
    error: str = ""


def _end_to_end_point(config: PmicConfig, fe, p: PowerLevel, hold: float) -> EndToEndPoint:
    try:
        h = harvester_output(fe.harvester_at(p), config.mppt_fraction)
    except HarvestError as e:
        logger.warning("end_to_end_point_failed", extra={"event": "end_to_end_point_failed", "power_dbm": p.value_dbm})
        return EndToEndPoint(p, math.nan, math.nan, math.nan, math.nan, e.short())
    v_op, p_h = _operating_power(config, h)
    eta = config.boost_efficiency_curve(p_h, v_op)
    p_store = config.harvest_duty * eta * p_h - hold * config.regulator_quiescent_current
    return EndToEndPoint(p, p_store / p.watts, p_h, p_store, v_op)


@log_operation("rfh.pmic")
def end_to_end_efficiency(
    config: PmicConfig,
    frontend: Frontend,
    input_powers: list[PowerLevel],
    storage_hold_voltage: float = DEFAULT_HOLD_VOLTAGE,
    workers: Optional[int] = None,
) -> list[EndToEndPoint]:
    """Potência absorvida no nó de armazenamento mantido em `storage_hold_voltage`
    dividida pela potência RF disponível (negativa abaixo do piso energético)."""
    if not input_powers:
        raise InvalidQuantityError("Lista de potências vazia")
    if not config.v_uvlo <= storage_hold_voltage <= config.boost_max_voltage:
        raise InvalidQuantityError(
            "Tensão de hold fora de [v_uvlo, boost_max_voltage]", {"storage_hold_voltage": storage_hold_voltage},
        )
    fe = as_frontend(frontend)
    return ordered_map(lambda p: _end_to_end_point(config, fe, p, storage_hold_voltage), input_powers, workers)


def energy_positive_floor(points: list[EndToEndPoint]) -> Optional[float]:
    """Menor potência (dBm) com balanço ≥ 0, interpolando a travessia do zero."""
    pts = sorted((p.power.value_dbm, p.storage_power) for p in points if math.isfinite(p.storage_power))
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        if y0 < 0 <= y1:
            return x0 + (x1 - x0) * (-y0) / (y1 - y0)
    if pts and pts[0][1] >= 0:
        return pts[0][0]
    return None
