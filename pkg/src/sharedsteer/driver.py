"""Driver activity and the assistance weighting factor.

The fictive torque ``u`` computed by the controller reaches the steering
column as ``T_c = mu(theta_d) * u``. ``theta_d`` in [0, 1) fuses the measured
driver torque with the driver-state signal ``DS``; ``mu`` is a U-shaped bell
that is high for both low and very high driver activity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .vehicle import DomainError


@dataclass(frozen=True)
class WeightingParams:
    omega_1: float = 0.38
    omega_2: float = -2.0
    omega_3: float = 0.5
    mu_min: float = 0.25

    def __post_init__(self):
        if not self.omega_1 > 0:
            raise DomainError("omega_1 must be positive")
        if not 0 < self.mu_min <= 1:
            raise DomainError("mu_min must lie in (0, 1]")


@dataclass(frozen=True)
class ActivityParams:
    sigma_1: float = 2.0
    sigma_2: float = 3.0
    sigma_3: float = 3.0
    T_d_max: float = 15.0

    def __post_init__(self):
        if min(self.sigma_1, self.sigma_2, self.sigma_3) <= 0:
            raise DomainError("activity exponents must be positive")
        if not self.T_d_max > 0:
            raise DomainError("T_d_max must be positive")


def weighting_mu(theta_d: float, w: WeightingParams = WeightingParams()) -> float:
    """Assistance level for driver activity ``theta_d``, clamped to [mu_min, 1].

    At ``theta_d == omega_3`` the bell base vanishes; for a negative
    ``omega_2`` the continuous limit ``mu_min`` is returned there.
    """
    if not math.isfinite(theta_d):
        raise DomainError(f"theta_d must be finite, got {theta_d!r}")
    base = abs((theta_d - w.omega_3) / w.omega_1)
    expo = 2.0 * w.omega_2
    if base == 0.0:
        bell = 0.0 if expo < 0 else (1.0 if expo > 0 else 0.5)
    else:
        try:
            bell = 1.0 / (1.0 + base**expo)
        except OverflowError:
            bell = 0.0
    return min(max(bell + w.mu_min, w.mu_min), 1.0)


def driver_activity(T_d: float, DS: float, a: ActivityParams = ActivityParams()) -> float:
    """Normalized driver activity in [0, 1)."""
    if not (0.0 <= DS <= 1.0):
        raise DomainError(f"driver state DS must lie in [0, 1], got {DS!r}")
    T_dN = min(abs(T_d / a.T_d_max), 1.0)
    return 1.0 - math.exp(-((a.sigma_1 * T_dN) ** a.sigma_2) * DS**a.sigma_3)


def assistance_torque(u: float, theta_d: float, w: WeightingParams = WeightingParams()) -> float:
    return weighting_mu(theta_d, w) * u


def activity_for_mu(mu_target: float, w: WeightingParams = WeightingParams(), low_side: bool = True) -> float:
    """Invert the weighting bell on one side of ``omega_3``.

    Only used to script scenarios; raises when ``mu_target`` is unreachable.
    """
    level = mu_target - w.mu_min
    if not 0 < level < 1:
        raise DomainError(f"mu target {mu_target!r} outside the bell range")
    dist = w.omega_1 * ((1.0 / level - 1.0) ** (1.0 / (2.0 * w.omega_2)))
    return w.omega_3 - dist if low_side else w.omega_3 + dist
