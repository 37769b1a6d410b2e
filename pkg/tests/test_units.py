import math

import pytest

from app.core.errors import InvalidQuantityError, SingularNetworkError
from app.core.units import (
    ComplexImpedance, Frequency, PowerLevel, available_power, dbm_to_watts, format_quantity,
    mismatch_loss_db, parse_quantity, reflection_coefficient, s11_db, source_amplitude, vswr, watts_to_dbm,
)


def test_dbm_conversions():
    assert dbm_to_watts(PowerLevel(0.0)) == pytest.approx(1e-3)
    assert dbm_to_watts(-30.0) == pytest.approx(1e-6)
    assert watts_to_dbm(1e-3).value_dbm == pytest.approx(0.0, abs=1e-12)
    assert PowerLevel(-15.0).watts == pytest.approx(31.6227766e-6)


def test_watts_to_dbm_rejects_non_positive():
    with pytest.raises(InvalidQuantityError):
        watts_to_dbm(0.0)
    with pytest.raises(InvalidQuantityError):
        PowerLevel(math.inf)


def test_frequency_must_be_positive():
    with pytest.raises(InvalidQuantityError):
        Frequency(0.0)
    assert Frequency(1.0).omega == pytest.approx(2 * math.pi)


def test_source_amplitude_inverts_available_power():
    z = ComplexImpedance(50.0)
    a = source_amplitude(PowerLevel(0.0), z)
    assert a == pytest.approx(math.sqrt(8 * 50 * 1e-3))
    assert available_power(a, z) == pytest.approx(1e-3)


def test_reflection_of_matched_and_open_loads():
    assert abs(reflection_coefficient(ComplexImpedance(50.0))) == pytest.approx(0.0)
    assert reflection_coefficient(ComplexImpedance.open_circuit()) == 1.0
    assert s11_db(0j) == -math.inf
    assert s11_db(reflection_coefficient(ComplexImpedance(150.0))) == pytest.approx(20 * math.log10(0.5))


def test_power_wave_reflection_with_complex_reference():
    z_ref = ComplexImpedance(50.0, 20.0)
    # carga conjugada: reflexão nula na definição de onda de potência
    assert abs(reflection_coefficient(ComplexImpedance(50.0, -20.0), z_ref)) == pytest.approx(0.0, abs=1e-15)


def test_reflection_singular():
    with pytest.raises(SingularNetworkError):
        reflection_coefficient(ComplexImpedance(-50.0))


def test_vswr_and_mismatch_loss():
    gamma = reflection_coefficient(ComplexImpedance(100.0))
    assert vswr(gamma) == pytest.approx(2.0)
    assert mismatch_loss_db(gamma) == pytest.approx(-10 * math.log10(1 - 1 / 9))
    assert vswr(1.0 + 0j) == math.inf


@pytest.mark.parametrize(
    "text, unit, expected",
    [
        ("2.2 pF", "F", 2.2e-12),
        ("50nH", "H", 50e-9),
        ("2 kOhm", "Ohm", 2e3),
        ("2 kΩ", "Ohm", 2e3),
        ("915 MHz", "Hz", 915e6),
        ("-15 dBm", "dBm", -15.0),
        ("100 ms", "s", 0.1),
        ("1.2 uA", "A", 1.2e-6),
        ("0.5 m", "m", 0.5),
    ],
)
def test_parse_quantity(text, unit, expected):
    assert parse_quantity(text, unit) == pytest.approx(expected)


@pytest.mark.parametrize(
    "value, unit",
    [("2.2", "F"), ("2.2 pH", "F"), ("1 kdBm", "dBm"), (2.2, "F"), ("abc pF", "F"), ("3 xF", "F")],
)
def test_parse_quantity_rejects(value, unit):
    with pytest.raises(InvalidQuantityError):
        parse_quantity(value, unit)


def test_format_quantity_round_trips_through_parser():
    for value, unit in ((2.2e-12, "F"), (53e-6, "C"), (2e3, "Ohm"), (-16.5, "dBm"), (0.0, "F")):
        assert parse_quantity(format_quantity(value, unit), unit) == pytest.approx(value)
