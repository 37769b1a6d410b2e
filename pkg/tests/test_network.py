import numpy as np
import pytest

from app.core.enums import Placement
from app.core.errors import InvalidQuantityError, SingularNetworkError
from app.core.units import ComplexImpedance, Frequency
from app.tools.network import (
    IDENTITY, capacitor, cascade, element_impedance, inductor, input_impedance, resistor, s11_sweep,
    transducer_gain,
)

GRID = np.linspace(800e6, 1000e6, 201)


def test_series_resistor_adds_to_termination():
    net = cascade([resistor(25.0)])
    zin = input_impedance(net, ComplexImpedance(25.0), GRID)
    assert np.allclose(zin, 50.0)
    resp = s11_sweep(net, ComplexImpedance(25.0), GRID)
    assert np.all(np.abs(resp.s11) < 1e-12)


def test_shunt_element_against_closed_form():
    f = 915e6
    c = capacitor(2.2e-12, Placement.SHUNT)
    zl = 100.0
    zin = input_impedance(cascade([c]), ComplexImpedance(zl), np.array([f]))[0]
    expected = 1.0 / (1.0 / zl + 1j * 2 * np.pi * f * 2.2e-12)
    assert zin == pytest.approx(expected)


def test_lossy_element_esr_follows_q():
    l = inductor(50e-9, q=50.0)
    z = element_impedance(l, Frequency(915e6))
    x = 2 * np.pi * 915e6 * 50e-9
    assert z.reactance == pytest.approx(x)
    assert z.resistance == pytest.approx(x / 50.0)


def test_lossless_network_conserves_power():
    net = cascade([
        capacitor(33e-12),
        capacitor(2.2e-12, Placement.SHUNT),
        inductor(50e-9),
    ])
    load = ComplexImpedance(30.0, -40.0)
    resp = s11_sweep(net, load, GRID)
    for k in (0, 100, 200):
        g_t = transducer_gain(net, load, float(GRID[k]))
        assert abs(resp.s11[k]) ** 2 + g_t == pytest.approx(1.0, abs=1e-9)


def test_open_termination_reflects_fully_through_series_element():
    resp = s11_sweep(cascade([capacitor(1e-12)]), ComplexImpedance.open_circuit(), GRID)
    assert np.allclose(np.abs(resp.s11), 1.0)
    assert resp.impedance_at(0).is_open


def test_callable_termination():
    def parallel_rc(hz: np.ndarray) -> np.ndarray:
        return 1.0 / (1.0 / 2000.0 + 1j * 2 * np.pi * hz * 0.645e-12)

    resp = s11_sweep(IDENTITY, parallel_rc, GRID)
    assert resp.input_impedance[0] == pytest.approx(parallel_rc(GRID[:1])[0])


def test_minimum_reports_deepest_point():
    # ressonância série L-C em 915 MHz sobre 50 Ω
    l = 50e-9
    c = 1.0 / ((2 * np.pi * 915e6) ** 2 * l)
    resp = s11_sweep(cascade([inductor(l), capacitor(c)]), ComplexImpedance(50.0), GRID)
    f_min, s_min = resp.minimum()
    assert f_min == pytest.approx(915e6, abs=1e6)
    assert s_min < -40.0


def test_grid_must_be_strictly_increasing():
    with pytest.raises(InvalidQuantityError):
        s11_sweep(IDENTITY, ComplexImpedance(50.0), [1e9, 1e9])
    with pytest.raises(InvalidQuantityError):
        s11_sweep(IDENTITY, ComplexImpedance(50.0), [])


def test_singular_reflection_reports_frequency():
    with pytest.raises(SingularNetworkError) as exc:
        s11_sweep(IDENTITY, ComplexImpedance(-50.0), [915e6])
    assert exc.value.frequency_hz == pytest.approx(915e6)


def test_element_rejects_non_positive_values():
    with pytest.raises(InvalidQuantityError):
        capacitor(0.0)
    with pytest.raises(InvalidQuantityError):
        inductor(1e-9, q=0.0)


def _random_ladder(rng: np.random.Generator, lossy: bool) -> list:
    stages = []
    for _ in range(int(rng.integers(2, 7))):
        placement = Placement.SERIES if rng.random() < 0.5 else Placement.SHUNT
        q = float(rng.uniform(20.0, 200.0)) if lossy else None
        if rng.random() < 0.5:
            stages.append(capacitor(float(10 ** rng.uniform(-12.3, -10.3)), placement, q))
        else:
            stages.append(inductor(float(10 ** rng.uniform(-9, -7)), placement, q))
    return stages


def _random_load(rng: np.random.Generator) -> ComplexImpedance:
    return ComplexImpedance(float(rng.uniform(5.0, 500.0)), float(rng.uniform(-300.0, 300.0)))


def _nodal_solution(stages: list, load: ComplexImpedance, hz: float, zs: float = 50.0) -> tuple[complex, complex]:
    """Tensões no nó de entrada e na carga por análise nodal da escada (fonte de 1 V, Norton)."""
    n = 1 + sum(e.placement == Placement.SERIES for e in stages)
    y = np.zeros((n, n), dtype=complex)
    rhs = np.zeros(n, dtype=complex)
    y[0, 0] += 1.0 / zs
    rhs[0] = 1.0 / zs
    node = 0
    for e in stages:
        adm = 1.0 / e.impedance_array(np.array([hz]))[0]
        if e.placement == Placement.SERIES:
            y[node, node] += adm
            y[node + 1, node + 1] += adm
            y[node, node + 1] -= adm
            y[node + 1, node] -= adm
            node += 1
        else:
            y[node, node] += adm
    y[node, node] += 1.0 / load.value
    v = np.linalg.solve(y, rhs)
    return v[0], v[node]


def test_random_passive_networks_never_reflect_more_than_incident():
    rng = np.random.default_rng(11)
    for _ in range(200):
        net = cascade(_random_ladder(rng, lossy=rng.random() < 0.5))
        resp = s11_sweep(net, _random_load(rng), GRID)
        assert np.max(np.abs(resp.s11)) <= 1.0 + 1e-9


def test_random_cascades_are_reciprocal():
    rng = np.random.default_rng(12)
    for _ in range(200):
        m = cascade(_random_ladder(rng, lossy=rng.random() < 0.5))(GRID)
        ad = m[:, 0, 0] * m[:, 1, 1]
        bc = m[:, 0, 1] * m[:, 1, 0]
        scale = np.maximum(1.0, np.maximum(np.abs(ad), np.abs(bc)))
        assert np.all(np.abs(ad - bc - 1.0) <= 1e-9 * scale)


def test_random_lossless_networks_conserve_power_against_nodal_analysis():
    rng = np.random.default_rng(13)
    zs = 50.0
    p_avail = 1.0 / (8.0 * zs)
    for _ in range(100):
        stages = _random_ladder(rng, lossy=False)
        load = _random_load(rng)
        net = cascade(stages)
        for hz in (800e6, 915e6, 1000e6):
            v_in, v_load = _nodal_solution(stages, load, hz, zs)
            p_load = 0.5 * abs(v_load) ** 2 * (1.0 / load.value).real
            s11 = s11_sweep(net, load, np.array([hz])).s11[0]
            assert abs(s11) ** 2 + p_load / p_avail == pytest.approx(1.0, abs=1e-9)
            z_nodal = v_in * zs / (1.0 - v_in)
            assert input_impedance(net, load, np.array([hz]))[0] == pytest.approx(z_nodal, rel=1e-7)


def test_transducer_gain_matches_nodal_analysis_on_lossy_networks():
    rng = np.random.default_rng(14)
    for _ in range(50):
        stages = _random_ladder(rng, lossy=True)
        load = _random_load(rng)
        _, v_load = _nodal_solution(stages, load, 915e6)
        p_load = 0.5 * abs(v_load) ** 2 * (1.0 / load.value).real
        assert transducer_gain(cascade(stages), load, 915e6) == pytest.approx(p_load * 8.0 * 50.0, rel=1e-9)
