# app/core/quantities.py
"""Tipos pydantic para grandezas com unidade obrigatória (`"2.2 pF"`, `"-15 dBm"`)."""
from typing import Annotated

from pydantic import BeforeValidator, PlainSerializer

from app.core.units import format_quantity, parse_quantity


def _quantity(unit: str):
    return Annotated[
        float,
        BeforeValidator(lambda text: parse_quantity(text, unit)),
        PlainSerializer(lambda value: format_quantity(value, unit), return_type=str, when_used="json"),
    ]


Capacitance = _quantity("F")
Inductance = _quantity("H")
Resistance = _quantity("Ohm")
FrequencyHz = _quantity("Hz")
Voltage = _quantity("V")
Current = _quantity("A")
PowerW = _quantity("W")
Seconds = _quantity("s")
Charge = _quantity("C")
Meters = _quantity("m")
Dbm = _quantity("dBm")
Dbi = _quantity("dBi")
Db = _quantity("dB")
