"""Finite sideband-ratio corrections to the pulsed coupling strength."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class CavityParams:
    """Optomechanical rates; c_pulse is the order-unity pulse-shape constant."""

    g0: float
    kappa: float
    omega_m: float
    c_pulse: float = 2.0

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")

    @property
    def sideband_ratio(self) -> float:
        return self.omega_m / self.kappa


def mu_nominal(cav: CavityParams) -> float:
    """mu = 2 sqrt(2) g0 / kappa in the adiabatic pulse limit."""
    return 2.0 * math.sqrt(2.0) * cav.g0 / cav.kappa


def mu_effective(cav: CavityParams, t: float) -> tuple[float, float]:
    """(mu', rotation angle) of the displacement after interaction time t.

    mu' = 2 g0 / omega_m * sqrt(1 - cos(omega_m t)); the displacement
    direction rotates by omega_m t in phase space. The rotation is reported
    for verification-timing adjustments but is not fed into the heralding
    stage by default.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    theta = cav.omega_m * t
    mu_p = 2.0 * cav.g0 / cav.omega_m * math.sqrt(max(1.0 - math.cos(theta), 0.0))
    return mu_p, theta


def percent_reduction(cav: CavityParams) -> float:
    """Second-order percentage reduction of mu, (omega_m / kappa)^2 / 6 * 100.

    Valid for the long adiabatic pulse (c_pulse = 2).
    """
    if cav.c_pulse != 2.0:
        raise ValueError("second-order reduction formula assumes c_pulse = 2")
    return 100.0 * cav.sideband_ratio**2 / 6.0
