import pytest

from app.config.defaults import CalibratedDefaults, load_defaults
from app.core.enums import Placement, RectifierTopology
from app.core.units import ComplexImpedance, Frequency
from app.tools.matching import PiMatchDesign
from app.tools.mpp import HarvesterOutput, TheveninSource
from app.tools.network import capacitor, inductor
from app.tools.pmic import BoostEfficiencyCurve, PmicConfig
from app.tools.rectifier import DiodeModel, RectifierCircuit, SourceSpec

F0 = Frequency(915e6)


@pytest.fixture(scope="session")
def calibrated_defaults() -> CalibratedDefaults:
    """Defaults versionados quando já calibrados; senão recalibra em processo (lento)."""
    d = load_defaults()
    if d.calibration.calibrated:
        return d
    from app.scenarios.schema import CalibrationTargets
    from app.scripts.calibrate import run_calibration

    return run_calibration(CalibrationTargets()).defaults


@pytest.fixture
def schottky() -> DiodeModel:
    """Diodo genérico, sem capacitância de junção (circuitos rápidos)."""
    return DiodeModel(
        saturation_current=1e-8,
        ideality_factor=1.05,
        series_resistance=1.0,
        junction_capacitance_zero_bias=0.0,
    )


@pytest.fixture
def pump_network() -> PiMatchDesign:
    """Só o capacitor série de bombeamento; C2 e L1 praticamente ausentes."""
    return PiMatchDesign(
        dc_block=capacitor(100e-12, name="C1"),
        series_inductor=inductor(1e-12, name="L1"),
        shunt_capacitor=capacitor(1e-18, Placement.SHUNT, name="C2"),
        effective_diode_capacitance=0.0,
        target_frequency=F0,
    )


def make_circuit(
    diode: DiodeModel,
    amplitude: float,
    load: float,
    topology: RectifierTopology = RectifierTopology.HALF_WAVE,
    matching: PiMatchDesign | None = None,
    c_out: float = 100e-12,
) -> RectifierCircuit:
    return RectifierCircuit(
        matching=matching,
        diode=diode,
        output_capacitor=capacitor(c_out, Placement.SHUNT, name="C3"),
        load_resistance=load,
        source=SourceSpec(amplitude, ComplexImpedance(50.0), F0),
        topology=topology,
    )


@pytest.fixture
def pmic_config() -> PmicConfig:
    return PmicConfig(
        storage_capacitance=10e-6,
        inrush_charge=1e-6,
        regulator_quiescent_current=1e-6,
        output_load_current=0.0,
        wake_voltage=2.565,
        boost_efficiency_curve=BoostEfficiencyCurve(0.8),
    )


def thevenin_output(voc: float, resistance: float, fraction: float = 0.5) -> HarvesterOutput:
    return HarvesterOutput.from_thevenin(TheveninSource(voc, resistance), fraction)
