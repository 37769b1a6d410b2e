import numpy as np
import pytest

from app.core.enums import ESeries
from app.core.errors import AlreadyMatchedError, InfeasibleDesignError, InvalidQuantityError
from app.core.units import ComplexImpedance, Frequency, s11_db
from app.tools.matching import (
    build_table1_network, design_s11, fit_effective_capacitance, s11_minimum_frequency, snap_to_eseries,
    snap_value, synthesize_pi,
)

F0 = Frequency(915e6)
IDEAL = {"c1": None, "c2": None, "l1": None}


def test_table1_network_values():
    d = build_table1_network(IDEAL)
    assert d.values()["c1"] == pytest.approx(33e-12)
    assert d.values()["c2"] == pytest.approx(2.2e-12)
    assert d.values()["l1"] == pytest.approx(50e-9)
    assert [e.name for e in d.stages()][:3] == ["C1", "C2", "L1"]


def test_table1_network_resonates_near_915_with_seed_termination():
    d = build_table1_network(IDEAL).with_effective_capacitance(0.645e-12)
    f_min, s_min = s11_minimum_frequency(d, ComplexImpedance(2000.0))
    assert f_min == pytest.approx(915e6, abs=15e6)
    assert s_min < -20.0


def test_q_config_requires_all_elements():
    with pytest.raises(InvalidQuantityError):
        build_table1_network({"c1": None})


def test_synthesis_for_table1_load():
    d = synthesize_pi(ComplexImpedance(50.0), ComplexImpedance(2000.0), F0, 7.4)
    # DC-block incluído: ~50.2 nH, ~1.84 pF e ~0.644 pF do lado da carga
    assert d.series_inductor.value == pytest.approx(50.16e-9, rel=0.01)
    assert d.shunt_capacitor.value == pytest.approx(1.839e-12, rel=0.01)
    assert d.effective_diode_capacitance == pytest.approx(0.6436e-12, rel=0.01)
    # dentro de ±30 % dos valores da Tabela
    assert 0.7 * 50e-9 <= d.series_inductor.value <= 1.3 * 50e-9
    assert 0.7 * 2.2e-12 <= d.shunt_capacitor.value <= 1.3 * 2.2e-12
    assert s11_db(design_s11(d, ComplexImpedance(2000.0), F0)) < -30.0


def test_synthesis_absorbs_reactive_load():
    load = ComplexImpedance(35.7, -264.9)  # série equivalente de 2 kΩ ∥ 0.645 pF
    d = synthesize_pi(ComplexImpedance(50.0), load, F0, 9.0)
    assert s11_db(design_s11(d, load, F0)) < -30.0


def test_synthesis_rejects_q_below_minimum():
    with pytest.raises(InfeasibleDesignError):
        synthesize_pi(ComplexImpedance(50.0), ComplexImpedance(2000.0), F0, 5.0)


def test_synthesis_rejects_matched_and_reactive_loads():
    with pytest.raises(AlreadyMatchedError):
        synthesize_pi(ComplexImpedance(50.0), ComplexImpedance(50.0), F0, 3.0)
    with pytest.raises(InfeasibleDesignError):
        synthesize_pi(ComplexImpedance(50.0), ComplexImpedance(0.0, 100.0), F0, 3.0)


@pytest.mark.parametrize(
    "value, series, expected",
    [
        (2.3e-12, ESeries.E24, 2.4e-12),
        (47.1e-9, ESeries.E12, 47e-9),
        (2.2e-12, ESeries.E12, 2.2e-12),
        (9.9e-12, ESeries.E12, 10e-12),
        (1.005e3, ESeries.E96, 1.0e3),
    ],
)
def test_snap_value(value, series, expected):
    assert snap_value(value, series) == pytest.approx(expected)


def test_snap_reports_degradation():
    d = synthesize_pi(ComplexImpedance(50.0), ComplexImpedance(2000.0), F0, 7.4)
    report = snap_to_eseries(d, ESeries.E24)
    assert report.s11_before_db < -30.0
    assert report.s11_after_db > report.s11_before_db
    assert report.degradation_db > 0
    assert report.design.effective_diode_capacitance == d.effective_diode_capacitance


def test_fit_effective_capacitance_moves_minimum_to_target():
    d = build_table1_network(IDEAL).with_effective_capacitance(0.3e-12)
    fitted = fit_effective_capacitance(d, ComplexImpedance(2000.0))
    f_min, _ = s11_minimum_frequency(fitted, ComplexImpedance(2000.0))
    assert f_min == pytest.approx(915e6, abs=1e6)
    assert fitted.effective_diode_capacitance > 0.3e-12


def test_more_effective_capacitance_lowers_the_s11_minimum():
    grid = np.linspace(100e6, 2e9, 3801)
    base = build_table1_network(IDEAL)
    minima = [
        s11_minimum_frequency(base.with_effective_capacitance(c), ComplexImpedance(50.0), grid)[0]
        for c in (0.2e-12, 0.5e-12, 1.0e-12, 1.5e-12, 2.0e-12)
    ]
    assert all(grid[0] < f < grid[-1] for f in minima)
    assert all(a > b for a, b in zip(minima, minima[1:]))
