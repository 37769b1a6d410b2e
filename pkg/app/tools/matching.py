# app/tools/matching.py
"""
Rede de casamento em π (C2 shunt, L1 série, capacitância efetiva dos diodos
shunt) precedida pelo DC-block C1: montagem da rede da Tabela de projeto,
síntese para uma carga qualquer e arredondamento para séries E.
"""
import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from app.config.defaults import CalibratedDefaults, load_defaults
from app.core.enums import ElementKind, ESeries, Placement
from app.core.errors import (
    AlreadyMatchedError, InfeasibleDesignError, InvalidQuantityError, UnreachableTargetError,
)
from app.core.logging_config import log_operation
from app.core.units import DEFAULT_Z0, ComplexImpedance, Frequency, reflection_coefficient, s11_db
from app.tools.network import (
    AbcdNetwork, LumpedElement, Termination, cascade, input_impedance, s11_sweep,
)

logger = logging.getLogger("rfh.matching")

SYNTHESIS_THRESHOLD_DB = -30.0


# ── Projeto ──────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class PiMatchDesign:
    dc_block: LumpedElement
    series_inductor: LumpedElement
    shunt_capacitor: LumpedElement
    effective_diode_capacitance: float
    target_frequency: Frequency
    # impedâncias para as quais o projeto foi feito (usadas no relatório de snap)
    design_source: ComplexImpedance = ComplexImpedance(DEFAULT_Z0)
    design_load: Optional[ComplexImpedance] = None

    def __post_init__(self):
        if self.effective_diode_capacitance < 0 or not math.isfinite(self.effective_diode_capacitance):
            raise InvalidQuantityError(
                "Capacitância efetiva precisa ser ≥ 0",
                {"effective_diode_capacitance": self.effective_diode_capacitance},
            )

    def stages(self) -> list[LumpedElement]:
        """C1 série → C2 shunt → L1 série → C_eff shunt (se > 0)."""
        out = [self.dc_block, self.shunt_capacitor, self.series_inductor]
        if self.effective_diode_capacitance > 0:
            out.append(
                LumpedElement(ElementKind.CAPACITOR, self.effective_diode_capacitance, Placement.SHUNT, name="C_eff")
            )
        return out

    def network(self) -> AbcdNetwork:
        return cascade(self.stages())

    def with_effective_capacitance(self, c_eff: float) -> "PiMatchDesign":
        return replace(self, effective_diode_capacitance=c_eff)

    def values(self) -> dict[str, float]:
        return {
            "c1": self.dc_block.value,
            "c2": self.shunt_capacitor.value,
            "l1": self.series_inductor.value,
            "c_eff": self.effective_diode_capacitance,
        }


def build_table1_network(
    q_config: Optional[dict[str, Optional[float]]] = None,
    defaults: Optional[CalibratedDefaults] = None,
) -> PiMatchDesign:
    """Rede da Tabela de projeto (C1 = 33 pF, C2 = 2.2 pF, L1 = 50 nH, 915 MHz).

    Args:
        q_config: Q por elemento (`c1`, `c2`, `l1`); `None` em um elemento = ideal.
            Sem `q_config` usa os Q do arquivo de defaults.
    """
    d = defaults or load_defaults()
    m = d.matching
    if q_config is None:
        q_config = {"c1": m.q_dc_block, "c2": m.q_shunt_capacitor, "l1": m.q_series_inductor}
    missing = {"c1", "c2", "l1"} - set(q_config)
    if missing:
        raise InvalidQuantityError(f"q_config sem os elementos {sorted(missing)}", {"missing": sorted(missing)})

    return PiMatchDesign(
        dc_block=LumpedElement(ElementKind.CAPACITOR, m.dc_block, Placement.SERIES, q_config["c1"], name="C1"),
        series_inductor=LumpedElement(ElementKind.INDUCTOR, m.series_inductor, Placement.SERIES, q_config["l1"], name="L1"),
        shunt_capacitor=LumpedElement(ElementKind.CAPACITOR, m.shunt_capacitor, Placement.SHUNT, q_config["c2"], name="C2"),
        effective_diode_capacitance=d.calibration.effective_diode_capacitance,
        target_frequency=Frequency(m.target_frequency),
        design_load=ComplexImpedance(d.calibration.rectifier_parallel_resistance),
    )


def design_s11(design: PiMatchDesign, termination: Termination, f: Frequency, z_ref: Optional[ComplexImpedance] = None) -> complex:
    return complex(s11_sweep(design.network(), termination, [f], z_ref or design.design_source).s11[0])


# ── Síntese ──────────────────────────────────────────────────────────────────

def _parallel_form(z: complex) -> tuple[float, float]:
    """(R paralelo, susceptância B) de uma impedância série."""
    mag2 = abs(z) ** 2
    return mag2 / z.real, -z.imag / mag2


@log_operation("rfh.matching")
def synthesize_pi(
    z_source: ComplexImpedance,
    z_load: ComplexImpedance,
    f: Frequency,
    loaded_q: float,
    dc_block: float = 33e-12,
) -> PiMatchDesign:
    """Síntese clássica do π (shunt C – série L – shunt C) com Q carregado dado.

    O DC-block em série com a fonte faz parte do projeto: sua reatância é
    somada à fonte antes da síntese. O capacitor do lado da carga vira a
    capacitância efetiva dos diodos.

    Raises:
        AlreadyMatchedError: fonte e carga já são iguais.
        InfeasibleDesignError: carga reativa pura, Q abaixo do mínimo ou
            susceptância existente maior que a exigida.
    """
    if z_source.resistance <= 0 or z_load.resistance <= 0 or z_load.is_open:
        raise InfeasibleDesignError(
            "Fonte e carga precisam ter resistência > 0 (carga reativa pura não casa)",
            {"z_source": str(z_source), "z_load": str(z_load)},
        )
    if abs(z_source.value - z_load.value) <= 1e-9 * abs(z_source.value):
        raise AlreadyMatchedError("Fonte e carga já estão casadas; nenhuma transformação necessária")

    w = f.omega
    c1 = LumpedElement(ElementKind.CAPACITOR, dc_block, Placement.SERIES, name="C1")
    zs_eff = z_source.value + 1j * float(c1.reactance(f.hertz))
    r_src, b_src = _parallel_form(zs_eff)
    r_load, b_load = _parallel_form(z_load.value)

    r_high, r_low = max(r_src, r_load), min(r_src, r_load)
    q_min = math.sqrt(r_high / r_low - 1.0)
    if loaded_q <= q_min:
        raise InfeasibleDesignError(
            f"Q carregado {loaded_q:g} ≤ mínimo {q_min:.4g} para a razão de resistências",
            {"loaded_q": loaded_q, "q_min": q_min},
        )

    # 1. Resistência virtual no meio do π
    r_v = r_high / (loaded_q ** 2 + 1.0)
    q_low = math.sqrt(max(r_low / r_v - 1.0, 0.0))

    # 2. Susceptâncias totais de cada braço e reatância série
    b_high, b_low = loaded_q / r_high, q_low / r_low
    x_series = r_v * (loaded_q + q_low)
    if r_load >= r_src:
        b_load_total, b_src_total = b_high, b_low
    else:
        b_load_total, b_src_total = b_low, b_high

    # 3. Descontar a susceptância que fonte/carga já trazem
    b_c2 = b_src_total - b_src
    b_ceff = b_load_total - b_load
    if b_c2 <= 0 or b_ceff < 0:
        raise InfeasibleDesignError(
            "Susceptância existente excede a exigida pelo π (capacitor negativo)",
            {"b_c2": b_c2, "b_ceff": b_ceff, "loaded_q": loaded_q},
        )

    design = PiMatchDesign(
        dc_block=c1,
        series_inductor=LumpedElement(ElementKind.INDUCTOR, x_series / w, Placement.SERIES, name="L1"),
        shunt_capacitor=LumpedElement(ElementKind.CAPACITOR, b_c2 / w, Placement.SHUNT, name="C2"),
        effective_diode_capacitance=b_ceff / w,
        target_frequency=f,
        design_source=z_source,
        design_load=z_load,
    )

    # 4. Autoverificação pelo mesmo caminho do analisador de rede
    achieved = s11_db(design_s11(design, z_load, f, z_source))
    if not achieved < SYNTHESIS_THRESHOLD_DB:
        raise InfeasibleDesignError(
            f"Projeto sintetizado não atinge {SYNTHESIS_THRESHOLD_DB} dB (obtido {achieved:.2f} dB)",
            {"s11_db": achieved},
        )
    logger.info("pi_synthesized", extra={"event": "pi_synthesized", "s11_db": achieved, **design.values()})
    return design


# ── Séries E ─────────────────────────────────────────────────────────────────

# mantissas inteiras; o número de dígitos define o expoente da década
_E_MANTISSAS = {
    ESeries.E12: (10, 12, 15, 18, 22, 27, 33, 39, 47, 56, 68, 82),
    ESeries.E24: (10, 11, 12, 13, 15, 16, 18, 20, 22, 24, 27, 30,
                  33, 36, 39, 43, 47, 51, 56, 62, 68, 75, 82, 91),
    ESeries.E96: (100, 102, 105, 107, 110, 113, 115, 118, 121, 124, 127, 130,
                  133, 137, 140, 143, 147, 150, 154, 158, 162, 165, 169, 174,
                  178, 182, 187, 191, 196, 200, 205, 210, 215, 221, 226, 232,
                  237, 243, 249, 255, 261, 267, 274, 280, 287, 294, 301, 309,
                  316, 324, 332, 340, 348, 357, 365, 374, 383, 392, 402, 412,
                  422, 432, 442, 453, 464, 475, 487, 499, 511, 523, 536, 549,
                  562, 576, 590, 604, 619, 634, 649, 665, 681, 698, 715, 732,
                  750, 768, 787, 806, 825, 845, 866, 887, 909, 931, 953, 976),
}


def snap_value(value: float, series: ESeries) -> float:
    """Valor da série E mais próximo em distância logarítmica."""
    mantissas = _E_MANTISSAS[series]
    digits = len(str(mantissas[0]))
    decade = math.floor(math.log10(value))
    exponent = decade - (digits - 1)
    candidates = [float(f"{m}e{exponent}") for m in mantissas]
    candidates.append(float(f"{10 ** digits}e{exponent}"))
    candidates.append(float(f"{mantissas[-1]}e{exponent - 1}"))
    return min(candidates, key=lambda c: abs(math.log(c / value)))


@dataclass(frozen=True)
class SnapReport:
    design: PiMatchDesign
    s11_before_db: float
    s11_after_db: float

    @property
    def degradation_db(self) -> float:
        return self.s11_after_db - self.s11_before_db


def snap_to_eseries(
    d: PiMatchDesign,
    series: ESeries,
    termination: Optional[Termination] = None,
) -> SnapReport:
    """Troca C1, C2 e L1 pelos valores comerciais; C_eff é do dispositivo e fica.

    A degradação é medida em `target_frequency` contra `design_source`,
    terminando em `termination` (ou na carga de projeto).
    """
    snapped = replace(
        d,
        dc_block=d.dc_block.with_value(snap_value(d.dc_block.value, series)),
        series_inductor=d.series_inductor.with_value(snap_value(d.series_inductor.value, series)),
        shunt_capacitor=d.shunt_capacitor.with_value(snap_value(d.shunt_capacitor.value, series)),
    )
    load = termination if termination is not None else d.design_load
    if load is None:
        return SnapReport(snapped, math.nan, math.nan)
    before = s11_db(design_s11(d, load, d.target_frequency))
    after = s11_db(design_s11(snapped, load, d.target_frequency))
    logger.info("eseries_snap", extra={"event": "eseries_snap", "series": series.value,
                                        "s11_before_db": before, "s11_after_db": after})
    return SnapReport(snapped, before, after)


# ── Localização do mínimo de S11 ─────────────────────────────────────────────

def s11_minimum_frequency(
    design: PiMatchDesign,
    termination: Termination,
    grid: Optional[np.ndarray] = None,
    refine: bool = True,
) -> tuple[float, float]:
    """(frequência do mínimo em Hz, |S11| em dB), refinado entre vizinhos da grade."""
    f0 = design.target_frequency.hertz
    hz = np.asarray(grid if grid is not None else np.linspace(0.5 * f0, 1.5 * f0, 2001), dtype=float)
    net = design.network()
    resp = s11_sweep(net, termination, hz, design.design_source)
    idx = int(np.argmin(np.abs(resp.s11)))
    if not refine:
        return resp.minimum()

    lo = hz[max(idx - 1, 0)]
    hi = hz[min(idx + 1, hz.size - 1)]

    def mag(f: float) -> float:
        zin = input_impedance(net, termination, np.asarray([f]))
        return abs(reflection_coefficient(ComplexImpedance.from_complex(complex(zin[0])), design.design_source))

    res = minimize_scalar(mag, bounds=(lo, hi), method="bounded", options={"xatol": 1.0})
    return float(res.x), s11_db(res.fun)


@log_operation("rfh.matching")
def fit_effective_capacitance(
    design: PiMatchDesign,
    termination: Termination,
    target: Optional[Frequency] = None,
    bounds: tuple[float, float] = (1e-16, 20e-12),
) -> PiMatchDesign:
    """Ajusta C_eff (brentq) para o mínimo de S11 cair exatamente em `target`."""
    target_hz = (target or design.target_frequency).hertz

    def offset(c_eff: float) -> float:
        f_min, _ = s11_minimum_frequency(design.with_effective_capacitance(c_eff), termination)
        return f_min - target_hz

    lo, hi = bounds
    f_lo, f_hi = offset(lo), offset(hi)
    if f_lo * f_hi > 0:
        raise UnreachableTargetError(
            f"Mínimo de S11 não alcança {target_hz:.6g} Hz no intervalo de C_eff",
            {"offset_lo_hz": f_lo, "offset_hi_hz": f_hi},
        )
    c_eff = brentq(offset, lo, hi, xtol=1e-18, rtol=1e-9)
    logger.info("c_eff_fitted", extra={"event": "c_eff_fitted", "c_eff": c_eff})
    return design.with_effective_capacitance(c_eff)
