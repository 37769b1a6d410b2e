import math
from dataclasses import replace

import numpy as np
import pytest

from app.core.enums import JunctionCapacitanceModel, LoadMode, RectifierTopology
from app.core.errors import InvalidQuantityError, NotConvergedError
from app.core.units import ComplexImpedance, PowerLevel
from app.tools.matching import build_table1_network
from app.tools.rectifier import (
    DiodeModel, efficiency_sweep, fundamental_input_impedance, solve_steady_state, table1_circuit,
    waveform_table,
)
from tests.conftest import F0, make_circuit


def test_linearized_diode_matches_ac_analysis():
    # Vt enorme: exp(v/Vt) − 1 ≈ v/Vt e o diodo vira um resistor de Vt/Is = 1 kΩ
    linear = DiodeModel(
        saturation_current=10.0, ideality_factor=1.0, series_resistance=0.0,
        junction_capacitance_zero_bias=0.0, thermal_voltage=1e4,
    )
    c = make_circuit(linear, amplitude=1.0, load=1e3, c_out=100e-12)
    sol = solve_steady_state(c, steps_per_period=256)
    z = fundamental_input_impedance(sol).value

    w = F0.omega
    expected = 1e3 + 1e3 / (1 + 1j * w * 1e3 * 100e-12)
    assert abs(z - expected) / abs(expected) < 1e-3
    assert abs(sol.dc_output_voltage) < 1e-3


def test_peak_detector_output_approaches_source_peak(schottky):
    a = 3.0
    sol = solve_steady_state(make_circuit(schottky, a, 1e6), steps_per_period=1024)
    assert sol.converged
    assert 0.85 * a < sol.dc_output_voltage < a


def test_voltage_doubler_roughly_doubles(schottky, pump_network):
    a = 1.5
    c = make_circuit(schottky, a, 1e6, RectifierTopology.VOLTAGE_DOUBLER, pump_network)
    sol = solve_steady_state(c, steps_per_period=512)
    assert sol.converged
    assert 1.6 * a < sol.dc_output_voltage < 2.0 * a


def test_energy_balance_closes_on_random_circuits(schottky, pump_network):
    rng = np.random.default_rng(7)
    table1 = build_table1_network()
    for _ in range(100):
        diode = schottky.model_copy(update={
            "series_resistance": float(rng.uniform(0.5, 20.0)),
            "junction_capacitance_zero_bias": float(rng.choice([0.0, 0.2e-12, 0.5e-12])),
        })
        c = make_circuit(
            diode,
            amplitude=float(rng.uniform(0.05, 3.0)),
            load=float(10 ** rng.uniform(2, 6)),
            topology=RectifierTopology(str(rng.choice(["voltage_doubler", "half_wave"]))),
            matching=[None, pump_network, table1][int(rng.integers(3))],
            c_out=float(rng.uniform(1e-12, 100e-12)),
        )
        if rng.random() < 0.3:
            c = replace(c, junction_capacitance_model=JunctionCapacitanceModel.DEPLETION)
        sol = solve_steady_state(c, steps_per_period=128, max_periods=10, accelerate=False, check_resolution=False)
        assert sol.energy.relative_residual <= 1e-4


def test_not_converged_is_flagged_not_discarded(schottky):
    sol = solve_steady_state(
        make_circuit(schottky, 3.0, 1e6), steps_per_period=128, max_periods=10, accelerate=False,
        check_resolution=False,
    )
    assert not sol.converged
    assert sol.periods == 10
    assert sol.dc_output_voltage > 0
    with pytest.raises(NotConvergedError):
        sol.raise_if_not_converged()
    with pytest.raises(NotConvergedError):
        fundamental_input_impedance(sol)


@pytest.mark.parametrize("cj", [0.0, 0.3e-12])
def test_converged_shooting_run_closes_energy_balance(schottky, pump_network, cj):
    diode = schottky.model_copy(update={"junction_capacitance_zero_bias": cj})
    c = make_circuit(diode, 1.0, 5e3, RectifierTopology.VOLTAGE_DOUBLER, pump_network, c_out=20e-12)
    sol = solve_steady_state(c, steps_per_period=256, check_resolution=False)
    assert sol.converged
    assert sol.shooting_iterations > 0
    assert sol.energy.relative_residual <= 1e-4


def test_more_periods_after_convergence_keep_the_answer(schottky, pump_network):
    c = make_circuit(schottky, 1.0, 5e3, RectifierTopology.VOLTAGE_DOUBLER, pump_network, c_out=20e-12)
    first = solve_steady_state(c, steps_per_period=256, check_resolution=False)
    assert first.converged
    longer = solve_steady_state(c, steps_per_period=256, check_resolution=False, settle_periods=first.periods)
    assert longer.converged
    assert longer.periods == 2 * first.periods
    assert abs(longer.dc_output_voltage - first.dc_output_voltage) <= 1e-6 * first.dc_output_voltage


def test_zero_amplitude_gives_zero_solution(schottky):
    sol = solve_steady_state(make_circuit(schottky, 0.0, 1e3), steps_per_period=64)
    assert sol.converged
    assert sol.efficiency == 0.0
    assert sol.dc_output_power == 0.0


def test_resolution_and_period_limits_are_validated(schottky):
    c = make_circuit(schottky, 1.0, 1e3)
    with pytest.raises(InvalidQuantityError):
        solve_steady_state(c, steps_per_period=32)
    with pytest.raises(InvalidQuantityError):
        solve_steady_state(c, max_periods=5)
    with pytest.raises(InvalidQuantityError):
        solve_steady_state(c, settle_periods=-1)


def test_junction_capacitance_requires_series_resistance():
    diode = DiodeModel(
        saturation_current=1e-8, ideality_factor=1.05, series_resistance=0.0,
        junction_capacitance_zero_bias=0.3e-12,
    )
    with pytest.raises(InvalidQuantityError):
        make_circuit(diode, 1.0, 1e3)


def test_bat15_calibration_scales_saturation_current():
    raw = DiodeModel.bat15_04w(calibrated=False)
    scaled = raw.scaled(is_scale=2.0, rs_scale=0.5)
    assert scaled.saturation_current == pytest.approx(2 * raw.saturation_current)
    assert scaled.series_resistance == pytest.approx(0.5 * raw.series_resistance)


def test_table1_circuit_source_matches_power():
    c = table1_circuit(PowerLevel(-10.0))
    assert c.available_power == pytest.approx(1e-4)
    assert c.source.impedance == ComplexImpedance(50.0)
    assert c.with_input_power(PowerLevel(0.0)).available_power == pytest.approx(1e-3)


def test_waveform_table_dump(schottky):
    sol = solve_steady_state(make_circuit(schottky, 1.0, 1e3), steps_per_period=128, check_resolution=False)
    table = waveform_table(sol)
    assert table.columns[0] == "time"
    assert "v_out" in table.columns and "i_D1" in table.columns
    assert len(table) == 128


def test_fixed_load_efficiency_sweep_keeps_order(schottky):
    c = make_circuit(schottky, 0.0, 2e3)
    powers = [PowerLevel(0.0), PowerLevel(-10.0)]
    points = efficiency_sweep(c, powers, LoadMode.FIXED, steps_per_period=256)
    assert [p.power for p in points] == powers
    assert all(not p.error for p in points)
    assert 0 < points[1].efficiency < points[0].efficiency < 1


def test_efficiency_sweep_rejects_empty_grid(schottky):
    with pytest.raises(InvalidQuantityError):
        efficiency_sweep(make_circuit(schottky, 1.0, 1e3), [])


@pytest.mark.slow
def test_halving_the_step_moves_output_voltage_under_two_tenths_percent():
    c = table1_circuit(PowerLevel(0.0))
    coarse = solve_steady_state(c, steps_per_period=256).raise_if_not_converged()
    fine = solve_steady_state(c, steps_per_period=512).raise_if_not_converged()
    assert math.isclose(coarse.dc_output_voltage, fine.dc_output_voltage, rel_tol=2e-3)
    assert math.isclose(coarse.efficiency, fine.efficiency, rel_tol=4e-3)
