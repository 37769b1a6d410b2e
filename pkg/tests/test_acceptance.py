"""Cenários versionados de ponta a ponta. Os marcados `slow` rodam o solver completo
com os defaults calibrados (os versionados, ou recalibrados em processo)."""
import math
from pathlib import Path
from typing import Optional

import pytest

from app.config.defaults import CalibratedDefaults
from app.core.enums import Milestone
from app.core.tables import ResultTable
from app.core.units import PowerLevel
from app.scenarios.runner import run_scenario
from app.tools.mpp import RectifierFrontend, find_mpp
from app.tools.pmic import STARTUP_SEQUENCE, PmicConfig, SimulationTrace, end_to_end_efficiency, energy_positive_floor
from app.tools.rectifier import table1_circuit

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def _first_table(tmp_path: Path, name: str, defaults: Optional[CalibratedDefaults] = None) -> ResultTable:
    result = run_scenario(SCENARIOS / name, tmp_path, defaults=defaults)
    return ResultTable.read_csv(result.files[0])


def test_low_power_preset_ratio_grows_with_power(tmp_path):
    table = _first_table(tmp_path, "epeas_lp_mpp.toml")
    ratios = table.column("mpp_ratio")
    assert ratios == [pytest.approx(r, abs=5e-3) for r in (0.62, 0.66, 0.70, 0.74)]


def test_link_scenario_ranges(tmp_path):
    result = run_scenario(SCENARIOS / "link_915.toml", tmp_path)
    ranges = ResultTable.read_csv(result.files[1])
    assert ranges.column("distance") == [pytest.approx(2.071, abs=1e-3), pytest.approx(2.324, abs=1e-3)]


@pytest.mark.slow
def test_calibrated_defaults_pass_their_own_check(calibrated_defaults):
    from app.scenarios.schema import CalibrationTargets
    from app.scripts.calibrate import check_calibration

    assert check_calibration(calibrated_defaults, CalibrationTargets()).failures() == []


@pytest.mark.slow
def test_s11_resonates_at_915_mhz(tmp_path, calibrated_defaults):
    table = _first_table(tmp_path, "s11_sweep.toml", calibrated_defaults)
    s11 = table.column("s11_db")
    i = min(range(len(s11)), key=s11.__getitem__)
    assert table.column("frequency")[i] == pytest.approx(915e6, abs=5e6)
    assert s11[i] <= -15.0


@pytest.mark.slow
def test_rectifier_efficiency_rises_with_power(tmp_path, calibrated_defaults):
    table = _first_table(tmp_path, "rect_efficiency.toml", calibrated_defaults)
    eff = dict(zip(table.column("input_power"), table.column("efficiency")))
    assert eff[-20.0] < eff[-10.0] < eff[0.0]
    assert all(0.0 <= e < 1.0 for e in eff.values() if not math.isnan(e))


# ── Partida a frio a -15 dBm ─────────────────────────────────────────────────

@pytest.fixture(scope="module")
def cold_start_trace(tmp_path_factory, calibrated_defaults) -> SimulationTrace:
    result = run_scenario(SCENARIOS / "cold_start.toml", tmp_path_factory.mktemp("coldstart"),
                          defaults=calibrated_defaults)
    table = ResultTable.read_csv(result.files[1])
    return SimulationTrace(milestones=[
        (Milestone(e), t) for e, t in zip(table.column("event"), table.column("time"))
    ])


@pytest.mark.slow
def test_cold_start_follows_the_startup_sequence(cold_start_trace):
    sequence = cold_start_trace.sequence()
    assert list(dict.fromkeys(sequence)) == list(STARTUP_SEQUENCE)
    assert sequence[-1] == Milestone.OVERCHARGE_PROTECT
    assert cold_start_trace.milestones[0][0] == Milestone.COLD_START_BEGIN
    assert len(cold_start_trace.milestone_times(Milestone.UVLO_LOCKOUT)) >= 1


@pytest.mark.slow
@pytest.mark.parametrize("milestone, target", [
    (Milestone.WAKE_UP_COMPLETE, 35.0),
    (Milestone.NORMAL_OPERATION, 56.0),
    (Milestone.OVERCHARGE_PROTECT, 93.0),
])
def test_cold_start_milestone_times(cold_start_trace, milestone, target):
    assert cold_start_trace.first(milestone) == pytest.approx(target, rel=0.20)


# ── Ponta a ponta ────────────────────────────────────────────────────────────

@pytest.fixture(scope="module")
def end_to_end_table(tmp_path_factory, calibrated_defaults) -> ResultTable:
    return _first_table(tmp_path_factory.mktemp("e2e"), "end_to_end.toml", calibrated_defaults)


@pytest.mark.slow
def test_end_to_end_efficiency_at_3_dbm(end_to_end_table):
    eff = dict(zip(end_to_end_table.column("input_power"), end_to_end_table.column("efficiency")))
    assert eff[3.0] == pytest.approx(0.57, abs=0.05)


@pytest.mark.slow
def test_end_to_end_efficiency_at_minus_10_dbm(end_to_end_table):
    eff = dict(zip(end_to_end_table.column("input_power"), end_to_end_table.column("efficiency")))
    assert eff[-10.0] > 0.30


@pytest.mark.slow
def test_energy_positive_floor_near_minus_16_dbm(calibrated_defaults):
    cfg = PmicConfig.from_defaults(calibrated_defaults)
    fe = RectifierFrontend(table1_circuit(defaults=calibrated_defaults))
    points = end_to_end_efficiency(cfg, fe, [PowerLevel(float(p)) for p in range(-19, -12)])
    assert energy_positive_floor(points) == pytest.approx(-16.0, abs=1.0)


# ── Razão de MPP do circuito da Tabela ───────────────────────────────────────

@pytest.fixture(scope="module")
def mpp_tables(tmp_path_factory, calibrated_defaults) -> list[ResultTable]:
    result = run_scenario(SCENARIOS / "mpp_ratio.toml", tmp_path_factory.mktemp("mpp"), defaults=calibrated_defaults)
    return [ResultTable.read_csv(p) for p in result.files if p.suffix == ".csv"]


@pytest.mark.slow
def test_mpp_ratio_is_flat_up_to_4_dbm(mpp_tables):
    table = mpp_tables[0]
    ratios = [r for p, r in zip(table.column("input_power"), table.column("mpp_ratio")) if -10.0 <= p <= 4.0]
    assert len(ratios) == 8
    assert max(ratios) - min(ratios) <= 0.10


@pytest.mark.slow
def test_mpp_ratio_rises_above_4_dbm(mpp_tables):
    table = mpp_tables[0]
    ratios = [r for p, r in zip(table.column("input_power"), table.column("mpp_ratio")) if p >= 4.0]
    assert len(ratios) == 4
    assert all(a < b for a, b in zip(ratios, ratios[1:]))


@pytest.mark.slow
def test_load_sweep_at_0_dbm_has_a_single_peak(mpp_tables, calibrated_defaults):
    powers = mpp_tables[1].column("output_power")
    peak = max(range(len(powers)), key=powers.__getitem__)
    assert 0 < peak < len(powers) - 1
    assert all(a <= b for a, b in zip(powers[:peak], powers[1:peak + 1]))
    assert all(a >= b for a, b in zip(powers[peak:], powers[peak + 1:]))

    circuit = table1_circuit(PowerLevel(0.0), defaults=calibrated_defaults)
    assert find_mpp(RectifierFrontend(circuit).harvester_at(PowerLevel(0.0))).unimodal
