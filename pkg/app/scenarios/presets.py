# app/scenarios/presets.py
"""
Frontends nomeados.

- `table1-custom`: a rede da Tabela de projeto com o BAT15-04W calibrado.
- `epeas-hp`: π de Q baixo centrado entre 868 e 915 MHz (colhe as duas bandas).
- `epeas-lp`: π estreito para potências baixas; o lado DC é o modelo de
  deslocamento linear da razão de MPP, já que não há esquemático publicado.
"""
from dataclasses import dataclass, replace
from typing import Optional

from app.config.defaults import CalibratedDefaults, load_defaults
from app.core.enums import ElementKind, Placement
from app.core.units import DEFAULT_Z0, ComplexImpedance, Frequency
from app.scenarios.schema import FrontendSpec
from app.tools.matching import PiMatchDesign, build_table1_network, synthesize_pi
from app.tools.mpp import HarvesterFrontend, LinearShiftFrontend, RectifierFrontend
from app.tools.network import LumpedElement
from app.tools.rectifier import DEFAULT_LOAD, DiodeModel, RectifierCircuit, SourceSpec

EPEAS_HP_CENTER = 890e6
EPEAS_HP_Q = 7.0
EPEAS_LP_Q = 10.0


@dataclass(frozen=True)
class ResolvedFrontend:
    name: str
    circuit: RectifierCircuit
    harvester: HarvesterFrontend
    s11_termination: ComplexImpedance

    @property
    def is_rectifier(self) -> bool:
        return isinstance(self.harvester, RectifierFrontend)


def _apply_matching(design: PiMatchDesign, spec: FrontendSpec) -> PiMatchDesign:
    m = spec.matching
    if m.ideal:
        design = replace(
            design,
            dc_block=replace(design.dc_block, q_factor=None),
            shunt_capacitor=replace(design.shunt_capacitor, q_factor=None),
            series_inductor=replace(design.series_inductor, q_factor=None),
        )
    for attr, value, q in (
        ("dc_block", m.dc_block, m.q_dc_block),
        ("shunt_capacitor", m.shunt_capacitor, m.q_shunt_capacitor),
        ("series_inductor", m.series_inductor, m.q_series_inductor),
    ):
        element = getattr(design, attr)
        if value is not None:
            element = element.with_value(value)
        if q is not None:
            element = replace(element, q_factor=q)
        design = replace(design, **{attr: element})
    if m.effective_diode_capacitance is not None:
        design = design.with_effective_capacitance(m.effective_diode_capacitance)
    if m.target_frequency is not None:
        design = replace(design, target_frequency=Frequency(m.target_frequency))
    return design


def _diode(spec: FrontendSpec, d: CalibratedDefaults) -> DiodeModel:
    o = spec.diode
    diode = DiodeModel.bat15_04w(d, calibrated=o.calibrated)
    updates = {
        k: v for k, v in {
            "saturation_current": o.saturation_current,
            "ideality_factor": o.ideality_factor,
            "series_resistance": o.series_resistance,
            "junction_capacitance_zero_bias": o.junction_capacitance_zero_bias,
        }.items() if v is not None
    }
    return DiodeModel(**{**diode.model_dump(), **updates}) if updates else diode


def _base_design(spec: FrontendSpec, d: CalibratedDefaults) -> PiMatchDesign:
    r_p = ComplexImpedance(d.calibration.rectifier_parallel_resistance)
    z0 = ComplexImpedance(DEFAULT_Z0)
    if spec.preset == "table1-custom":
        return build_table1_network(defaults=d)
    if spec.preset == "epeas-hp":
        return synthesize_pi(z0, r_p, Frequency(EPEAS_HP_CENTER), EPEAS_HP_Q, d.matching.dc_block)
    return synthesize_pi(z0, r_p, Frequency(d.matching.target_frequency), EPEAS_LP_Q, d.matching.dc_block)


def resolve_frontend(spec: FrontendSpec, defaults: Optional[CalibratedDefaults] = None) -> ResolvedFrontend:
    """Monta circuito, visão DC e terminação de S11 do frontend pedido."""
    d = defaults or load_defaults()
    design = _apply_matching(_base_design(spec, d), spec)
    c3 = LumpedElement(
        ElementKind.CAPACITOR,
        spec.output_capacitor if spec.output_capacitor is not None else d.matching.output_capacitor,
        Placement.SHUNT,
        d.matching.q_output_capacitor,
        name="C3",
    )
    pad = spec.input_shunt_capacitance
    circuit = RectifierCircuit(
        matching=design,
        diode=_diode(spec, d),
        output_capacitor=c3,
        load_resistance=spec.load_resistance or DEFAULT_LOAD,
        source=SourceSpec(0.0, ComplexImpedance(DEFAULT_Z0), design.target_frequency),
        topology=spec.topology,
        input_shunt_capacitance=pad if pad is not None else d.calibration.input_shunt_capacitance,
        junction_capacitance_model=spec.diode.junction_capacitance_model,
    )
    if spec.preset == "epeas-lp":
        harvester: HarvesterFrontend = LinearShiftFrontend()
    else:
        harvester = RectifierFrontend(circuit, spec.steps_per_period, spec.max_periods)
    return ResolvedFrontend(
        spec.preset, circuit, harvester, ComplexImpedance(d.calibration.rectifier_parallel_resistance),
    )
