import logging
import math

import numpy as np
import pytest

from app.core.errors import InvalidQuantityError, UnreachableTargetError
from app.core.units import Frequency, PowerLevel
from app.tools.link import (
    SPEED_OF_LIGHT, LinkBudget, free_space_path_loss_db, range_for_power, received_power, received_power_sweep,
    wavelength,
)

F915 = Frequency(915e6)


@pytest.fixture
def budget() -> LinkBudget:
    return LinkBudget(PowerLevel(23.0), 0.0, 0.0, F915)


def test_received_power_at_one_metre(budget):
    # 23 dBm − 20·log10(4π·1 m/λ), λ = 0.3276 m
    assert received_power(budget.at(1.0)).value_dbm == pytest.approx(-8.675, abs=1e-3)


@pytest.mark.parametrize("target, expected", [(-15.0, 2.071), (-16.0, 2.324)])
def test_range_for_target_power(budget, target, expected):
    assert range_for_power(budget, PowerLevel(target)) == pytest.approx(expected, abs=1e-3)


def test_range_inverts_received_power(budget):
    d = range_for_power(budget, PowerLevel(-20.0))
    assert received_power(budget.at(d)).value_dbm == pytest.approx(-20.0, abs=1e-9)


def test_doubling_distance_costs_six_db(budget):
    p1 = received_power(budget.at(3.0)).value_dbm
    p2 = received_power(budget.at(6.0)).value_dbm
    assert p1 - p2 == pytest.approx(20 * math.log10(2), abs=1e-9)


def test_antenna_gains_add(budget):
    gained = LinkBudget(PowerLevel(23.0), 6.0, 2.0, F915, 2.0)
    assert received_power(gained).value_dbm - received_power(budget.at(2.0)).value_dbm == pytest.approx(8.0)
    assert gained.eirp_dbm == 29.0


def test_path_loss_is_zero_at_reference_distance():
    d0 = wavelength(F915) / (4 * math.pi)
    assert free_space_path_loss_db(d0, F915) == pytest.approx(0.0, abs=1e-12)
    assert wavelength(F915) == pytest.approx(SPEED_OF_LIGHT / 915e6)


def test_unreachable_target(budget):
    with pytest.raises(UnreachableTargetError):
        range_for_power(budget, PowerLevel(30.0))


def test_invalid_distance():
    with pytest.raises(InvalidQuantityError):
        LinkBudget(PowerLevel(23.0), 0.0, 0.0, F915, 0.0)
    with pytest.raises(InvalidQuantityError):
        received_power(LinkBudget(PowerLevel(23.0), 0.0, 0.0, F915))


def test_near_field_warning(budget, caplog):
    with caplog.at_level(logging.WARNING, logger="rfh.link"):
        received_power(budget.at(0.2))
    assert any(getattr(r, "event", None) == "far_field_warning" for r in caplog.records)


def test_sweep_is_monotonic(budget):
    out = received_power_sweep(budget, np.linspace(1.0, 5.0, 9))
    values = [p.value_dbm for _, p in out]
    assert values == sorted(values, reverse=True)
