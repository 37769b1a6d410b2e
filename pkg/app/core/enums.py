# app/core/enums.py
"""Enums centralizados para elementos, topologias, modos e tipos de sweep."""
from enum import Enum


class ElementKind(str, Enum):
    CAPACITOR = "capacitor"
    INDUCTOR = "inductor"
    RESISTOR = "resistor"


class Placement(str, Enum):
    SERIES = "series"
    SHUNT = "shunt"


class ESeries(str, Enum):
    E12 = "E12"
    E24 = "E24"
    E96 = "E96"


class RectifierTopology(str, Enum):
    VOLTAGE_DOUBLER = "voltage_doubler"
    HALF_WAVE = "half_wave"


class JunctionCapacitanceModel(str, Enum):
    CONSTANT = "constant"
    DEPLETION = "depletion"


class LoadMode(str, Enum):
    FIXED = "fixed"
    MPP_TRACKED = "mpp_tracked"


class PmicMode(str, Enum):
    ASLEEP = "asleep"
    COLD_START = "cold_start"
    NORMAL = "normal"
    UVLO_LOCKOUT = "uvlo_lockout"
    OVERCHARGE_PROTECT = "overcharge_protect"


class Milestone(str, Enum):
    COLD_START_BEGIN = "cold_start_begin"
    WAKE_UP_COMPLETE = "wake_up_complete"
    UVLO_LOCKOUT = "uvlo_lockout"
    OUTPUT_REENABLED = "output_reenabled"
    NORMAL_OPERATION = "normal_operation"
    OVERCHARGE_PROTECT = "overcharge_protect"
    OVERCHARGE_RELEASE = "overcharge_release"


class SweepKind(str, Enum):
    S11 = "s11"
    RECT_EFFICIENCY = "rect_efficiency"
    MPP_RATIO = "mpp_ratio"
    END_TO_END = "end_to_end"
    COLD_START = "cold_start"
    LINK = "link"
