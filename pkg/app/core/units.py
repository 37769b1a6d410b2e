# app/core/units.py
"""
Tipos de grandezas físicas e conversões usadas por todos os módulos.

Potências ficam em dBm (eixos dos gráficos) e são convertidas para watts sob
demanda; os solvers trabalham sempre em unidades lineares do SI.
"""
import math
import re
from dataclasses import dataclass

from app.core.errors import InvalidQuantityError, SingularNetworkError

DEFAULT_Z0 = 50.0


# ── Tipos de valor ───────────────────────────────────────────────────────────

@dataclass(frozen=True)
class PowerLevel:
    value_dbm: float

    def __post_init__(self):
        if not math.isfinite(self.value_dbm):
            raise InvalidQuantityError(
                f"Potência precisa ser finita: {self.value_dbm!r} dBm",
                {"value_dbm": self.value_dbm},
            )

    @property
    def watts(self) -> float:
        return dbm_to_watts(self)

    @classmethod
    def from_watts(cls, watts: float) -> "PowerLevel":
        return watts_to_dbm(watts)

    def __str__(self) -> str:
        return f"{self.value_dbm:g} dBm"


@dataclass(frozen=True)
class Frequency:
    hertz: float

    def __post_init__(self):
        if not (math.isfinite(self.hertz) and self.hertz > 0):
            raise InvalidQuantityError(
                f"Frequência precisa ser positiva: {self.hertz!r} Hz",
                {"hertz": self.hertz},
            )

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.hertz


@dataclass(frozen=True)
class ComplexImpedance:
    """Impedância R + jX. `resistance = inf` representa circuito aberto."""

    resistance: float
    reactance: float = 0.0

    def __post_init__(self):
        if math.isnan(self.resistance) or math.isnan(self.reactance):
            raise InvalidQuantityError("Impedância com NaN", {"r": self.resistance, "x": self.reactance})

    @property
    def value(self) -> complex:
        return complex(self.resistance, self.reactance)

    @property
    def is_open(self) -> bool:
        return math.isinf(self.resistance) or math.isinf(self.reactance)

    @property
    def is_passive(self) -> bool:
        return self.resistance >= 0

    @classmethod
    def from_complex(cls, z: complex) -> "ComplexImpedance":
        return cls(float(z.real), float(z.imag))

    @classmethod
    def open_circuit(cls) -> "ComplexImpedance":
        return cls(math.inf, 0.0)

    def __str__(self) -> str:
        sign = "+" if self.reactance >= 0 else "-"
        return f"{self.resistance:.6g} {sign} j{abs(self.reactance):.6g} Ω"


# ── Conversões de potência ───────────────────────────────────────────────────

def dbm_to_watts(p: PowerLevel | float) -> float:
    value = p.value_dbm if isinstance(p, PowerLevel) else float(p)
    if not math.isfinite(value):
        raise InvalidQuantityError(f"Potência não finita: {value!r} dBm", {"value_dbm": value})
    return 1e-3 * 10.0 ** (value / 10.0)


def watts_to_dbm(p: float) -> PowerLevel:
    if not (math.isfinite(p) and p > 0):
        raise InvalidQuantityError(f"Potência em watts precisa ser > 0: {p!r}", {"watts": p})
    return PowerLevel(10.0 * math.log10(p / 1e-3))


def available_power(amplitude: float, z_source: ComplexImpedance) -> float:
    """Potência disponível de uma fonte de Thévenin de pico `amplitude`: V²/(8·Re Zs)."""
    if z_source.resistance <= 0:
        raise InvalidQuantityError("Fonte precisa de resistência positiva", {"r": z_source.resistance})
    return amplitude ** 2 / (8.0 * z_source.resistance)


def source_amplitude(p: PowerLevel | float, z_source: ComplexImpedance) -> float:
    """Amplitude de pico que entrega `p` como potência disponível."""
    if z_source.resistance <= 0:
        raise InvalidQuantityError("Fonte precisa de resistência positiva", {"r": z_source.resistance})
    return math.sqrt(8.0 * z_source.resistance * dbm_to_watts(p))


# ── Reflexão ─────────────────────────────────────────────────────────────────

def reflection_coefficient(
    z_load: ComplexImpedance, z_ref: ComplexImpedance | None = None
) -> complex:
    """Γ de onda de potência: (Z − Z0*)/(Z + Z0). Igual ao clássico para Z0 real."""
    z_ref = z_ref or ComplexImpedance(DEFAULT_Z0)
    if z_ref.resistance <= 0 or z_ref.is_open:
        raise InvalidQuantityError("Impedância de referência precisa ter R > 0", {"z_ref": str(z_ref)})
    if z_load.is_open:
        return complex(1.0, 0.0)
    z = z_load.value
    z0 = z_ref.value
    den = z + z0
    if abs(den) == 0.0:
        raise SingularNetworkError("Z_load + Z_ref = 0: reflexão indefinida", frequency_hz=float("nan"))
    return (z - z0.conjugate()) / den


def s11_db(gamma: complex) -> float:
    mag = abs(gamma)
    if mag == 0.0:
        return -math.inf
    return 20.0 * math.log10(mag)


def vswr(gamma: complex) -> float:
    mag = abs(gamma)
    if mag >= 1.0:
        return math.inf
    return (1.0 + mag) / (1.0 - mag)


def mismatch_loss_db(gamma: complex) -> float:
    mag2 = abs(gamma) ** 2
    if mag2 >= 1.0:
        return math.inf
    return -10.0 * math.log10(1.0 - mag2)


# ── Parser de grandezas com unidade ──────────────────────────────────────────

_SI_PREFIX = {
    "f": 1e-15, "p": 1e-12, "n": 1e-9, "u": 1e-6, "µ": 1e-6, "μ": 1e-6,
    "m": 1e-3, "": 1.0, "k": 1e3, "M": 1e6, "G": 1e9,
}

_UNIT_ALIASES = {
    "Ω": "Ohm", "ohm": "Ohm", "Ohm": "Ohm", "ohms": "Ohm",
    "F": "F", "H": "H", "Hz": "Hz", "V": "V", "A": "A", "W": "W",
    "s": "s", "C": "C", "m": "m", "dBm": "dBm", "dBi": "dBi", "dB": "dB",
}

# unidades logarítmicas não aceitam prefixo
_LOG_UNITS = {"dBm", "dBi", "dB"}

_QUANTITY_RE = re.compile(
    r"^\s*(?P<num>[-+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?)\s*(?P<unit>\S*)\s*$"
)


def _split_unit(token: str) -> tuple[float, str]:
    if token in _UNIT_ALIASES:
        return 1.0, _UNIT_ALIASES[token]
    prefix, rest = token[:1], token[1:]
    if prefix in _SI_PREFIX and rest in _UNIT_ALIASES and _UNIT_ALIASES[rest] not in _LOG_UNITS:
        return _SI_PREFIX[prefix], _UNIT_ALIASES[rest]
    raise InvalidQuantityError(f"Unidade desconhecida: {token!r}", {"unit": token})


def parse_quantity(text: str, unit: str) -> float:
    """Converte `"2.2 pF"` em 2.2e-12 exigindo a unidade `unit` (ex.: "F").

    Números sem unidade são rejeitados: todo valor físico no arquivo de
    cenário precisa carregar a unidade explícita.
    """
    if not isinstance(text, str):
        raise InvalidQuantityError(f"Grandeza precisa ser texto com unidade: {text!r}", {"value": text})
    m = _QUANTITY_RE.match(text)
    if not m:
        raise InvalidQuantityError(f"Grandeza mal formada: {text!r}", {"value": text})
    token = m.group("unit")
    if not token:
        raise InvalidQuantityError(f"Unidade ausente em {text!r} (esperado {unit})", {"value": text})
    scale, found = _split_unit(token)
    expected = _UNIT_ALIASES.get(unit, unit)
    if found != expected:
        raise InvalidQuantityError(
            f"Unidade {found!r} incompatível em {text!r}; esperado {expected!r}",
            {"value": text, "expected": expected},
        )
    value = float(m.group("num")) * scale
    if not math.isfinite(value):
        raise InvalidQuantityError(f"Valor não finito: {text!r}", {"value": text})
    return value


def format_quantity(value: float, unit: str) -> str:
    """Inverso aproximado de `parse_quantity` para escrever arquivos de defaults."""
    if unit in _LOG_UNITS or value == 0:
        return f"{value:.9g} {unit}"
    for prefix in ("G", "M", "k", "", "m", "u", "n", "p", "f"):
        scale = _SI_PREFIX[prefix]
        if abs(value) >= scale:
            return f"{value / scale:.9g} {prefix}{unit}"
    return f"{value / 1e-15:.9g} f{unit}"
