# app/tools/link.py
"""Orçamento de enlace em espaço livre (Friis) entre o transmissor e a antena do coletor."""
import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from app.core.errors import InvalidQuantityError, UnreachableTargetError
from app.core.units import Frequency, PowerLevel

logger = logging.getLogger("rfh.link")

SPEED_OF_LIGHT = 299_792_458.0
FAR_FIELD_WAVELENGTHS = 2.0


def wavelength(f: Frequency) -> float:
    return SPEED_OF_LIGHT / f.hertz


def free_space_path_loss_db(distance: float, f: Frequency) -> float:
    """20·log10(4π·d·f/c); zero em d = λ/(4π)."""
    if not (distance > 0 and math.isfinite(distance)):
        raise InvalidQuantityError("Distância precisa ser > 0", {"distance": distance})
    return 20.0 * math.log10(4.0 * math.pi * distance * f.hertz / SPEED_OF_LIGHT)


@dataclass(frozen=True)
class LinkBudget:
    tx_power: PowerLevel
    tx_gain_dbi: float
    rx_gain_dbi: float
    frequency: Frequency
    distance: Optional[float] = None

    def __post_init__(self):
        if self.distance is not None and not (self.distance > 0 and math.isfinite(self.distance)):
            raise InvalidQuantityError("Distância precisa ser > 0", {"distance": self.distance})

    @property
    def eirp_dbm(self) -> float:
        return self.tx_power.value_dbm + self.tx_gain_dbi

    def at(self, distance: float) -> "LinkBudget":
        return replace(self, distance=distance)


def received_power(lb: LinkBudget) -> PowerLevel:
    if lb.distance is None:
        raise InvalidQuantityError("Enlace sem distância")
    lam = wavelength(lb.frequency)
    if lb.distance < FAR_FIELD_WAVELENGTHS * lam:
        logger.warning("far_field_warning", extra={
            "event": "far_field_warning", "distance_m": lb.distance, "wavelength_m": lam,
        })
    return PowerLevel(lb.eirp_dbm + lb.rx_gain_dbi - free_space_path_loss_db(lb.distance, lb.frequency))


def range_for_power(lb: LinkBudget, target: PowerLevel) -> float:
    """Distância em que a potência recebida vale `target` (inverso fechado de Friis)."""
    budget_db = lb.eirp_dbm + lb.rx_gain_dbi - target.value_dbm
    if budget_db < 0:
        # alvo só seria atingido dentro da distância de referência λ/(4π)
        raise UnreachableTargetError(
            "Potência alvo acima do que o enlace entrega",
            {"target_dbm": target.value_dbm, "eirp_dbm": lb.eirp_dbm},
        )
    return wavelength(lb.frequency) / (4.0 * math.pi) * 10.0 ** (budget_db / 20.0)


def received_power_sweep(lb: LinkBudget, distances: np.ndarray) -> list[tuple[float, PowerLevel]]:
    return [(float(d), received_power(lb.at(float(d)))) for d in np.asarray(distances, dtype=float)]
