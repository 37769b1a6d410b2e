# app/config/defaults.py
"""
Defaults versionados (componentes da Tabela de projeto, parâmetros do diodo,
knobs de calibração e do PMIC). O arquivo é escrito por `app.scripts.calibrate`
e lido aqui com validação estrita.
"""
import json
import tomllib
from functools import lru_cache
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from app.config.settings import settings
from app.core.errors import ScenarioParseError, ScenarioSchemaError
from app.core.quantities import (
    Capacitance, Charge, Current, FrequencyHz, Inductance, Resistance, Seconds, Voltage,
)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DiodeDefaults(_Strict):
    saturation_current: Current
    ideality_factor: float = Field(ge=1.0, le=2.0)
    series_resistance: Resistance
    junction_capacitance_zero_bias: Capacitance
    thermal_voltage: Voltage = 0.02585
    junction_potential: Voltage = 0.2
    grading_coefficient: float = Field(default=0.5, gt=0.0, lt=1.0)


class MatchingDefaults(_Strict):
    dc_block: Capacitance
    shunt_capacitor: Capacitance
    series_inductor: Inductance
    output_capacitor: Capacitance
    q_dc_block: Optional[float] = Field(default=None, gt=0)
    q_shunt_capacitor: Optional[float] = Field(default=None, gt=0)
    q_series_inductor: Optional[float] = Field(default=None, gt=0)
    q_output_capacitor: Optional[float] = Field(default=None, gt=0)
    target_frequency: FrequencyHz


class CalibrationKnobs(_Strict):
    calibrated: bool = False  # true só quando escrito por app.scripts.calibrate com os alvos atendidos
    is_scale: float = Field(default=1.0, gt=0)
    rs_scale: float = Field(default=1.0, gt=0)
    input_shunt_capacitance: Capacitance = 0.0
    effective_diode_capacitance: Capacitance
    rectifier_parallel_resistance: Resistance


class PmicDefaults(_Strict):
    storage_capacitance: Capacitance
    inrush_charge: Charge
    regulator_quiescent_current: Current
    output_load_current: Current
    cold_start_efficiency: float = Field(gt=0, le=1)
    rail_leak_time_constant: Seconds
    wake_voltage_fraction: float = Field(default=0.95, gt=0, le=1)


class BoostDefaults(_Strict):
    constant_efficiency: float = Field(default=0.8, gt=0, le=1)
    powers: list[float] = Field(default_factory=list)  # W
    voltages: list[float] = Field(default_factory=list)  # V
    efficiencies: list[list[float]] = Field(default_factory=list)

    @model_validator(mode="after")
    def _table_shape(self):
        if not self.powers and not self.voltages and not self.efficiencies:
            return self
        if len(self.efficiencies) != len(self.powers) or any(
            len(row) != len(self.voltages) for row in self.efficiencies
        ):
            raise ValueError("tabela do boost precisa ter len(powers) × len(voltages) entradas")
        return self


class CalibratedDefaults(_Strict):
    diode: DiodeDefaults
    matching: MatchingDefaults
    calibration: CalibrationKnobs
    pmic: PmicDefaults
    boost: BoostDefaults = BoostDefaults()


def parse_defaults(text: str, source: str = "<defaults>") -> CalibratedDefaults:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ScenarioParseError(f"{source}: {e}") from e
    try:
        return CalibratedDefaults.model_validate(raw)
    except ValidationError as e:
        keys = [".".join(str(p) for p in err["loc"]) for err in e.errors()]
        raise ScenarioSchemaError(f"{source}: defaults inválidos ({', '.join(keys)})", keys) from e


@lru_cache()
def load_defaults(path: Optional[Path] = None) -> CalibratedDefaults:
    path = Path(path or settings.defaults_file)
    return parse_defaults(path.read_text(encoding="utf-8"), str(path))


# ── Escrita ──────────────────────────────────────────────────────────────────

def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return f"{value:.9g}"
    if isinstance(value, list):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    return json.dumps(value, ensure_ascii=False)


def render_defaults(defaults: CalibratedDefaults, provenance: list[str]) -> str:
    """TOML determinístico com o bloco de proveniência em comentários."""
    lines = [f"# {line}".rstrip() for line in provenance]
    data = defaults.model_dump(mode="json")
    for section, values in data.items():
        lines.append("")
        lines.append(f"[{section}]")
        for key, value in values.items():
            if value is None:
                continue
            lines.append(f"{key} = {_toml_value(value)}")
    return "\n".join(lines) + "\n"
