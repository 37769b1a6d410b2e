# app/tools/network.py
"""
Motor de duas-portas lineares: elementos R/L/C concentrados com perda por Q,
cascata por matrizes ABCD e extração de S11 em sweeps de frequência.

Tudo é vetorizado sobre a grade de frequências (arrays `(n, 2, 2)`).
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from app.core.enums import ElementKind, Placement
from app.core.errors import InvalidQuantityError, SingularNetworkError
from app.core.units import DEFAULT_Z0, ComplexImpedance, Frequency, s11_db

logger = logging.getLogger("rfh.network")

FrequencyGrid = Union[Sequence[Frequency], Sequence[float], np.ndarray]
Termination = Union[ComplexImpedance, Callable[[np.ndarray], np.ndarray]]


# ── Elementos ────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class LumpedElement:
    """Elemento concentrado. `q_factor=None` significa ideal (Q ilimitado).

    O Q é interpretado na frequência de avaliação (R = |X(f)|/Q);
    `q_ref_frequency` fica só como documentação da folha de dados.
    """

    kind: ElementKind
    value: float
    placement: Placement = Placement.SERIES
    q_factor: Optional[float] = None
    q_ref_frequency: Optional[Frequency] = None
    name: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.value) and self.value > 0):
            raise InvalidQuantityError(
                f"Valor de elemento precisa ser > 0: {self.value!r}", {"kind": self.kind.value}
            )
        if self.q_factor is not None and not self.q_factor > 0:
            raise InvalidQuantityError(f"Q precisa ser > 0: {self.q_factor!r}", {"kind": self.kind.value})

    @property
    def is_lossy(self) -> bool:
        return self.q_factor is not None and self.kind != ElementKind.RESISTOR

    def with_value(self, value: float) -> "LumpedElement":
        return LumpedElement(self.kind, value, self.placement, self.q_factor, self.q_ref_frequency, self.name)

    def reactance(self, hertz: np.ndarray | float) -> np.ndarray | float:
        w = 2.0 * np.pi * np.asarray(hertz, dtype=float)
        if self.kind == ElementKind.INDUCTOR:
            return w * self.value
        if self.kind == ElementKind.CAPACITOR:
            return -1.0 / (w * self.value)
        return np.zeros_like(w)

    def esr(self, hertz: np.ndarray | float) -> np.ndarray | float:
        """Resistência série de perda R = |X|/Q (zero para elemento ideal)."""
        x = self.reactance(hertz)
        if not self.is_lossy:
            return np.zeros_like(np.asarray(x, dtype=float))
        return np.abs(x) / self.q_factor

    def impedance_array(self, hertz: np.ndarray) -> np.ndarray:
        if self.kind == ElementKind.RESISTOR:
            return np.full(np.shape(hertz), complex(self.value))
        return self.esr(hertz) + 1j * self.reactance(hertz)


def capacitor(value: float, placement: Placement = Placement.SERIES, q: Optional[float] = None, name: str = "") -> LumpedElement:
    return LumpedElement(ElementKind.CAPACITOR, value, placement, q, None, name)


def inductor(value: float, placement: Placement = Placement.SERIES, q: Optional[float] = None, name: str = "") -> LumpedElement:
    return LumpedElement(ElementKind.INDUCTOR, value, placement, q, None, name)


def resistor(value: float, placement: Placement = Placement.SERIES, name: str = "") -> LumpedElement:
    return LumpedElement(ElementKind.RESISTOR, value, placement, None, None, name)


def element_impedance(e: LumpedElement, f: Frequency) -> ComplexImpedance:
    z = complex(e.impedance_array(np.asarray(f.hertz)))
    return ComplexImpedance.from_complex(z)


# ── Cascata ABCD ─────────────────────────────────────────────────────────────

def _hertz_array(f) -> np.ndarray:
    if isinstance(f, Frequency):
        return np.asarray([f.hertz])
    if np.isscalar(f):
        return np.asarray([float(f)])
    if isinstance(f, np.ndarray):
        return f.astype(float).ravel()
    return np.asarray([x.hertz if isinstance(x, Frequency) else float(x) for x in f], dtype=float)


def _stage_abcd(e: LumpedElement, hz: np.ndarray) -> np.ndarray:
    m = np.zeros((hz.size, 2, 2), dtype=complex)
    m[:, 0, 0] = 1.0
    m[:, 1, 1] = 1.0
    z = e.impedance_array(hz)
    if e.placement == Placement.SERIES:
        m[:, 0, 1] = z
    else:
        m[:, 1, 0] = 1.0 / z
    return m


@dataclass(frozen=True)
class AbcdNetwork:
    """Duas-portas definida por uma lista ordenada de estágios (fonte → carga)."""

    stages: tuple = field(default_factory=tuple)

    def __call__(self, f) -> np.ndarray:
        """ABCD em `f`: matriz 2×2 para escalar, `(n, 2, 2)` para grade."""
        scalar = isinstance(f, Frequency) or np.isscalar(f)
        hz = _hertz_array(f)
        out = np.broadcast_to(np.eye(2, dtype=complex), (hz.size, 2, 2)).copy()
        for stage in self.stages:
            m = stage.matrices(hz) if isinstance(stage, AbcdNetwork) else _stage_abcd(stage, hz)
            out = np.matmul(out, m)
        return out[0] if scalar else out

    def matrices(self, hz: np.ndarray) -> np.ndarray:
        return self(hz)

    def elements(self) -> list[LumpedElement]:
        flat = []
        for stage in self.stages:
            flat.extend(stage.elements() if isinstance(stage, AbcdNetwork) else [stage])
        return flat


def cascade(stages: Iterable[Union[LumpedElement, AbcdNetwork]]) -> AbcdNetwork:
    stages = tuple(stages)
    if not stages:
        raise InvalidQuantityError("Cascata precisa de pelo menos um estágio")
    return AbcdNetwork(stages)


IDENTITY = AbcdNetwork(())


# ── Sweeps ───────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class TwoPortResponse:
    frequency_grid: np.ndarray  # Hz
    s11: np.ndarray
    input_impedance: np.ndarray  # complexo; inf = aberto

    def s11_db(self) -> np.ndarray:
        mag = np.abs(self.s11)
        with np.errstate(divide="ignore"):
            return 20.0 * np.log10(mag)

    def minimum(self) -> tuple[float, float]:
        """(frequência em Hz, |S11| em dB) do ponto de menor reflexão."""
        idx = int(np.argmin(np.abs(self.s11)))
        return float(self.frequency_grid[idx]), s11_db(complex(self.s11[idx]))

    def impedance_at(self, idx: int) -> ComplexImpedance:
        z = complex(self.input_impedance[idx])
        if math.isinf(z.real) or math.isinf(z.imag):
            return ComplexImpedance.open_circuit()
        return ComplexImpedance.from_complex(z)


def _termination_array(termination: Termination, hz: np.ndarray) -> np.ndarray:
    if isinstance(termination, ComplexImpedance):
        if termination.is_open:
            return np.full(hz.shape, complex(np.inf, 0.0))
        return np.full(hz.shape, termination.value)
    return np.asarray(termination(hz), dtype=complex)


def input_impedance(net: AbcdNetwork, termination: Termination, hz: np.ndarray) -> np.ndarray:
    """Z_in = (A·ZL + B)/(C·ZL + D); ZL infinito dá A/C."""
    abcd = net(hz)
    a, b, c, d = abcd[:, 0, 0], abcd[:, 0, 1], abcd[:, 1, 0], abcd[:, 1, 1]
    zl = _termination_array(termination, hz)
    is_open = np.isinf(zl.real) | np.isinf(zl.imag)
    zl_fin = np.where(is_open, 0.0, zl)
    num = np.where(is_open, a, a * zl_fin + b)
    den = np.where(is_open, c, c * zl_fin + d)

    singular = (num == 0) & (den == 0)
    if np.any(singular):
        bad = float(hz[np.argmax(singular)])
        raise SingularNetworkError(f"Transformação singular em {bad:.6g} Hz", frequency_hz=bad)

    zin = np.empty_like(num)
    open_in = den == 0
    zin[open_in] = complex(np.inf, 0.0)
    zin[~open_in] = num[~open_in] / den[~open_in]
    return zin


def _gamma(zin: np.ndarray, z_ref: ComplexImpedance, hz: np.ndarray) -> np.ndarray:
    z0 = z_ref.value
    is_open = np.isinf(zin.real) | np.isinf(zin.imag)
    zfin = np.where(is_open, 0.0, zin)
    den = zfin + z0
    bad = (~is_open) & (den == 0)
    if np.any(bad):
        f_bad = float(hz[np.argmax(bad)])
        raise SingularNetworkError(f"Z_in + Z0 = 0 em {f_bad:.6g} Hz", frequency_hz=f_bad)
    gamma = np.ones_like(zin)
    gamma[~is_open] = (zfin[~is_open] - np.conj(z0)) / den[~is_open]
    return gamma


def s11_sweep(
    net: AbcdNetwork,
    termination: Termination,
    grid: FrequencyGrid,
    z_ref: Optional[ComplexImpedance] = None,
) -> TwoPortResponse:
    """Emula o analisador de rede: S11 de `net` terminada em `termination`.

    Args:
        net: Rede ABCD (fonte à esquerda, terminação à direita).
        termination: Impedância fixa ou função vetorizada de Hz → Z complexo.
        grid: Lista explícita e estritamente crescente de frequências.
        z_ref: Referência (default 50 Ω).
    """
    z_ref = z_ref or ComplexImpedance(DEFAULT_Z0)
    if z_ref.resistance <= 0:
        raise InvalidQuantityError("Referência precisa de R > 0", {"z_ref": str(z_ref)})
    hz = _hertz_array(grid)
    if hz.size == 0:
        raise InvalidQuantityError("Grade de frequência vazia")
    if np.any(hz <= 0) or np.any(np.diff(hz) <= 0):
        raise InvalidQuantityError("Grade de frequência precisa ser positiva e estritamente crescente")

    zin = input_impedance(net, termination, hz)
    gamma = _gamma(zin, z_ref, hz)
    return TwoPortResponse(frequency_grid=hz, s11=gamma, input_impedance=zin)


def transducer_gain(
    net: AbcdNetwork,
    termination: Termination,
    f: Frequency | float,
    z_ref: Optional[ComplexImpedance] = None,
) -> float:
    """Fração da potência disponível da fonte entregue à terminação.

    G_T = 4·Rs·RL / |A·ZL + B + Zs·(C·ZL + D)|²
    """
    z_ref = z_ref or ComplexImpedance(DEFAULT_Z0)
    hz = _hertz_array(f)
    a, b, c, d = net(hz)[0].ravel()
    zl = complex(_termination_array(termination, hz)[0])
    if math.isinf(zl.real):
        return 0.0
    zs = z_ref.value
    den = a * zl + b + zs * (c * zl + d)
    if den == 0:
        raise SingularNetworkError("Ganho de transdutor singular", frequency_hz=float(hz[0]))
    return float(4.0 * zs.real * zl.real / abs(den) ** 2)
