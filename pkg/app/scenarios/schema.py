# app/scenarios/schema.py
"""
Formato de cenário (TOML) e validação estrita.

Exemplo mínimo:

    name = "s11-sweep"

    [frontend]
    preset = "table1-custom"

    [sweep]
    kind = "s11"
    start = "100 MHz"
    stop = "2 GHz"
    points = 1901

Toda grandeza física é uma string com unidade; chaves desconhecidas são erro.
"""
import math
import re
import tomllib
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from app.core.enums import JunctionCapacitanceModel, LoadMode, RectifierTopology
from app.core.errors import ScenarioParseError, ScenarioSchemaError
from app.core.quantities import (
    Capacitance, Charge, Current, Db, Dbi, Dbm, FrequencyHz, Inductance, Meters, PowerW, Resistance, Seconds,
    Voltage,
)
from app.core.units import PowerLevel


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# ── Frontend e PMIC ──────────────────────────────────────────────────────────

class MatchingOverride(_Strict):
    dc_block: Optional[Capacitance] = None
    shunt_capacitor: Optional[Capacitance] = None
    series_inductor: Optional[Inductance] = None
    effective_diode_capacitance: Optional[Capacitance] = None
    target_frequency: Optional[FrequencyHz] = None
    q_dc_block: Optional[float] = Field(default=None, gt=0)
    q_shunt_capacitor: Optional[float] = Field(default=None, gt=0)
    q_series_inductor: Optional[float] = Field(default=None, gt=0)
    ideal: bool = False  # ignora todos os Q


class DiodeOverride(_Strict):
    saturation_current: Optional[Current] = None
    ideality_factor: Optional[float] = Field(default=None, ge=1.0, le=2.0)
    series_resistance: Optional[Resistance] = None
    junction_capacitance_zero_bias: Optional[Capacitance] = None
    junction_capacitance_model: JunctionCapacitanceModel = JunctionCapacitanceModel.CONSTANT
    calibrated: bool = True


class FrontendSpec(_Strict):
    preset: Literal["table1-custom", "epeas-hp", "epeas-lp"] = "table1-custom"
    topology: RectifierTopology = RectifierTopology.VOLTAGE_DOUBLER
    load_resistance: Optional[Resistance] = None
    output_capacitor: Optional[Capacitance] = None
    input_shunt_capacitance: Optional[Capacitance] = None
    steps_per_period: Optional[int] = Field(default=None, ge=64)
    max_periods: Optional[int] = Field(default=None, ge=10)
    matching: MatchingOverride = MatchingOverride()
    diode: DiodeOverride = DiodeOverride()


class PmicSpec(_Strict):
    cold_start_min_voltage: Optional[Voltage] = None
    cold_start_min_power: Optional[PowerW] = None
    mppt_fraction: Optional[float] = Field(default=None, gt=0, lt=1)
    mppt_sample_period: Optional[Seconds] = None
    mppt_sensing_window: Optional[Seconds] = None
    v_overcharge: Optional[Voltage] = None
    v_uvlo: Optional[Voltage] = None
    v_regulated: Optional[Voltage] = None
    uvlo_hysteresis: Optional[Voltage] = None
    wake_voltage: Optional[Voltage] = None
    storage_capacitance: Optional[Capacitance] = None
    inrush_charge: Optional[Charge] = None
    regulator_quiescent_current: Optional[Current] = None
    output_load_current: Optional[Current] = None
    boost_efficiency: Optional[float] = Field(default=None, gt=0, le=1)

    def overrides(self) -> dict:
        """Campos preenchidos, já no vocabulário de `PmicConfig`."""
        data = {k: v for k, v in self.model_dump().items() if v is not None}
        eta = data.pop("boost_efficiency", None)
        if eta is not None:
            from app.tools.pmic import BoostEfficiencyCurve

            data["boost_efficiency_curve"] = BoostEfficiencyCurve(eta)
        return data


# ── Grades ───────────────────────────────────────────────────────────────────

class PowerGrid(_Strict):
    """Lista explícita (`values`) ou faixa inclusiva (`start`, `stop`, `step`)."""

    values: Optional[list[Dbm]] = None
    start: Optional[Dbm] = None
    stop: Optional[Dbm] = None
    step: Optional[Db] = None

    @model_validator(mode="after")
    def _shape(self):
        ranged = (self.start, self.stop, self.step)
        if self.values is not None:
            if any(v is not None for v in ranged):
                raise ValueError("use `values` ou `start/stop/step`, não ambos")
            if not self.values:
                raise ValueError("grade de potência vazia")
            return self
        if any(v is None for v in ranged):
            raise ValueError("grade de potência precisa de `values` ou de `start`, `stop` e `step`")
        if self.step <= 0 or self.stop < self.start:
            raise ValueError("grade de potência vazia (step ≤ 0 ou stop < start)")
        return self

    def levels(self) -> list[PowerLevel]:
        if self.values is not None:
            return [PowerLevel(v) for v in self.values]
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        # arredonda para evitar 2.9999999 dBm nas linhas do CSV
        return [PowerLevel(round(self.start + i * self.step, 9)) for i in range(n)]


# ── Sweeps ───────────────────────────────────────────────────────────────────

class S11Sweep(_Strict):
    kind: Literal["s11"]
    start: FrequencyHz
    stop: FrequencyHz
    points: int = Field(ge=2)
    termination: Optional[Resistance] = None
    z_ref: Resistance = 50.0

    @model_validator(mode="after")
    def _range(self):
        if not self.stop > self.start:
            raise ValueError("stop precisa ser maior que start")
        return self

    def grid(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)


class RectEfficiencySweep(_Strict):
    kind: Literal["rect_efficiency"]
    powers: PowerGrid
    load_mode: LoadMode = LoadMode.MPP_TRACKED
    load_min: Resistance = 100.0
    load_max: Resistance = 1e6
    coarse_points: int = Field(default=25, ge=8)


class MppRatioSweep(_Strict):
    kind: Literal["mpp_ratio"]
    powers: PowerGrid
    load_min: Resistance = 100.0
    load_max: Resistance = 1e6
    coarse_points: int = Field(default=25, ge=8)
    inset_power: Optional[Dbm] = None  # traço P(R) extra, como o inset do gráfico de MPP


class EndToEndSweep(_Strict):
    kind: Literal["end_to_end"]
    powers: PowerGrid
    hold_voltage: Voltage = 3.5


class ColdStartSweep(_Strict):
    kind: Literal["cold_start"]
    input_power: Dbm
    duration: Seconds
    dt: Seconds = 1e-3
    record_interval: Seconds = 0.1


class LinkSweep(_Strict):
    kind: Literal["link"]
    tx_power: Dbm
    tx_gain: Dbi = 0.0
    rx_gain: Dbi = 0.0
    frequency: FrequencyHz = 915e6
    distance_start: Meters
    distance_stop: Meters
    points: int = Field(default=50, ge=1)
    targets: list[Dbm] = Field(default_factory=list)

    @model_validator(mode="after")
    def _range(self):
        if not 0 < self.distance_start <= self.distance_stop:
            raise ValueError("faixa de distância inválida")
        return self


Sweep = Annotated[
    Union[S11Sweep, RectEfficiencySweep, MppRatioSweep, EndToEndSweep, ColdStartSweep, LinkSweep],
    Field(discriminator="kind"),
]


# ── Calibração ───────────────────────────────────────────────────────────────

class CalibrationTargets(_Strict):
    """Alvos do laço de calibração (potências RF e tempos da partida a frio)."""

    rectifier_power: Dbm = 3.0
    match_power: Dbm = 0.0
    peak_power: Dbm = 3.0
    peak_efficiency: float = Field(default=0.57, gt=0, lt=1)
    low_power: Dbm = -10.0
    low_efficiency: float = Field(default=0.33, gt=0, lt=1)
    floor_power: Dbm = -16.5
    cold_start_power: Dbm = -15.0
    wake_time: Seconds = 35.0
    normal_time: Seconds = 56.0
    full_time: Seconds = 93.0
    hold_voltage: Voltage = 3.5
    iterations: int = Field(default=3, ge=1)


class OutputsSpec(_Strict):
    csv: Optional[str] = None
    svg: Optional[str] = None
    plot: bool = True


class Scenario(_Strict):
    name: str = Field(min_length=1, pattern=r"^[A-Za-z0-9_.\-]+$")
    frontend: FrontendSpec = FrontendSpec()
    pmic: PmicSpec = PmicSpec()
    sweep: Optional[Sweep] = None
    calibration: Optional[CalibrationTargets] = None
    outputs: OutputsSpec = OutputsSpec()

    @model_validator(mode="after")
    def _has_work(self):
        if self.sweep is None and self.calibration is None:
            raise ValueError("cenário precisa de [sweep] ou [calibration]")
        return self


# ── Leitura ──────────────────────────────────────────────────────────────────

_LINE_COL = re.compile(r"line (\d+), column (\d+)")


def parse_scenario_text(text: str, source: str = "<scenario>") -> Scenario:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        m = _LINE_COL.search(str(e))
        line, col = (int(m.group(1)), int(m.group(2))) if m else (None, None)
        raise ScenarioParseError(f"{source}: {e}", line, col) from e
    try:
        return Scenario.model_validate(raw)
    except ValidationError as e:
        keys = sorted({".".join(str(p) for p in err["loc"]) for err in e.errors()})
        detail = "; ".join(f"{'.'.join(str(p) for p in err['loc']) or '<raiz>'}: {err['msg']}" for err in e.errors())
        raise ScenarioSchemaError(f"{source}: {detail}", keys) from e
