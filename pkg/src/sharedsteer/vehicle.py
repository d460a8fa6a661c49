"""Lateral road-vehicle model with steering column and driver-in-the-loop.

State ordering used everywhere in the package::

    x = [v_y, r, psi_l, y_l, delta, delta_dot]

lateral velocity (m/s), yaw rate (rad/s), heading error (rad), lateral offset
at the look-ahead distance (m), steering angle (rad) and its rate (rad/s).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_STATE = 6
STATE_NAMES = ("v_y", "r", "psi_l", "y_l", "delta", "delta_dot")


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a model equation."""


@dataclass(frozen=True)
class VehicleParams:
    """Physical constants of the test vehicle (SI units).

    ``C_x`` and ``C_y`` are kept for completeness of the parameter set; no
    implemented equation uses them.
    """

    M: float = 1500.0
    l_f: float = 1.0065
    l_r: float = 1.4625
    l_w: float = 0.4
    l_s: float = 5.0
    eta_t: float = 0.13
    I_z: float = 2454.0
    I_s: float = 0.05
    R_s: float = 16.0
    B_s: float = 15.0
    C_f: float = 94270.0
    C_r: float = 113272.0
    C_x: float = 0.35
    C_y: float = 0.45
    tau_a: float = 0.5
    T_p: float = 0.8

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not (np.isfinite(value) and value > 0):
                raise DomainError(f"vehicle parameter {name} must be positive, got {value!r}")

    @property
    def rho(self) -> float:
        """Torque-to-steering-acceleration gain ``1 / (I_s R_s)``."""
        return 1.0 / (self.I_s * self.R_s)


@dataclass(frozen=True)
class DriverGains:
    """Gains of the two-point visual driver model (N.m per rad).

    Defaults come from :func:`tune_driver_gains`: the driver-only loop is
    asymptotically stable over the whole 9-25 m/s speed range.
    """

    K_d1: float = -50.0
    K_d2: float = -1.0

    def __post_init__(self):
        if not (np.isfinite(self.K_d1) and np.isfinite(self.K_d2)):
            raise DomainError("driver gains must be finite")


@dataclass(frozen=True)
class PlantMatrices:
    A: np.ndarray
    B: np.ndarray
    B_w: np.ndarray


@dataclass(frozen=True)
class DriverCoeffs:
    T_d1: float
    T_d2: float
    T_d3: float
    T_d4: float
    K_d1: float

    def row(self) -> np.ndarray:
        """Torque-per-state row, ordered like the state vector."""
        return np.array([self.T_d1, self.T_d2, self.K_d1, self.T_d3, self.T_d4, 0.0])


def _check_speed(v_x):
    if not (np.isfinite(v_x) and v_x > 0):
        raise DomainError(f"longitudinal speed must be positive, got {v_x!r}")


def _tire_coeffs(p: VehicleParams, v_x: float) -> dict:
    M, I_z, C_f, C_r, l_f, l_r = p.M, p.I_z, p.C_f, p.C_r, p.l_f, p.l_r
    return {
        "a11": -(C_r + C_f) / (M * v_x),
        "a12": -v_x + (l_r * C_r - l_f * C_f) / (M * v_x),
        "a21": (l_r * C_r - l_f * C_f) / (I_z * v_x),
        "a22": -(l_r**2 * C_r + l_f**2 * C_f) / (I_z * v_x),
        "b1": C_f / M,
        "b2": l_f * C_f / I_z,
    }


def build_plant_matrices(p: VehicleParams, v_x: float) -> PlantMatrices:
    """Road-vehicle model with electric steering at speed ``v_x``.

    Returns ``A`` (6x6), ``B`` (6x1, torque channel) and ``B_w`` (6x1, lateral
    wind force channel).
    """
    _check_speed(v_x)
    c = _tire_coeffs(p, v_x)
    k = p.C_f * p.eta_t / (p.I_s * p.R_s**2)
    T_s1 = k / v_x
    T_s2 = k * p.l_f / v_x
    T_s3 = -k
    T_s4 = -p.B_s / p.I_s
    A = np.array([
        [c["a11"], c["a12"], 0.0, 0.0, c["b1"], 0.0],
        [c["a21"], c["a22"], 0.0, 0.0, c["b2"], 0.0],
        [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        [1.0, p.l_s, v_x, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        [T_s1, T_s2, 0.0, 0.0, T_s3, T_s4],
    ])
    B = np.zeros((N_STATE, 1))
    B[5, 0] = p.rho
    B_w = np.array([[1.0 / p.M], [p.l_w / p.I_z], [0.0], [0.0], [0.0], [0.0]])
    return PlantMatrices(A, B, B_w)


def build_driver_coeffs(p: VehicleParams, g: DriverGains, v_x: float) -> DriverCoeffs:
    _check_speed(v_x)
    c = _tire_coeffs(p, v_x)
    ta = p.tau_a
    return DriverCoeffs(
        T_d1=g.K_d2 * ta**2 * c["a21"],
        T_d2=g.K_d2 * (ta + ta**2 * c["a22"]),
        T_d3=g.K_d1 / (v_x * p.T_p),
        T_d4=g.K_d2 * ta**2 * c["b2"] * p.R_s,
        K_d1=g.K_d1,
    )


def build_driver_in_loop(p: VehicleParams, g: DriverGains, v_x: float) -> np.ndarray:
    """State matrix with the driver torque model closed around the plant."""
    A = build_plant_matrices(p, v_x).A.copy()
    A[5, :] += p.rho * build_driver_coeffs(p, g, v_x).row()
    return A


def driver_torque(x, p: VehicleParams, g: DriverGains, v_x: float) -> float:
    """Torque produced by the visual driver model for state ``x``."""
    return float(build_driver_coeffs(p, g, v_x).row() @ np.asarray(x, dtype=float))


def state_constraint_rows(p: VehicleParams) -> list[np.ndarray]:
    """Rows ``h_k`` such that ``h_k @ x <= 1`` encodes the normal-driving limits.

    Pairs of opposite rows, in order: combined offset
    ``|y_l + (l_f - l_s) psi_l| <= 1.75``, yaw rate ``|r| <= 0.51``, heading
    ``|psi_l| <= 0.087`` and steering rate ``|delta_dot| <= 0.1047``.
    """
    base = [
        np.array([0.0, 0.0, (p.l_f - p.l_s) / 1.75, 1.0 / 1.75, 0.0, 0.0]),
        np.array([0.0, 1.0 / 0.51, 0.0, 0.0, 0.0, 0.0]),
        np.array([0.0, 0.0, 1.0 / 0.087, 0.0, 0.0, 0.0]),
        np.array([0.0, 0.0, 0.0, 0.0, 0.0, 1.0 / 0.1047]),
    ]
    rows = []
    for h in base:
        rows.append(h)
        rows.append(-h)
    return rows


CONSTRAINT_LABELS = (
    "offset+", "offset-", "yaw_rate+", "yaw_rate-",
    "heading+", "heading-", "steer_rate+", "steer_rate-",
)


def tune_driver_gains(p: VehicleParams, speeds=(9.0, 15.0, 25.0),
                      k1_grid=None, k2_grid=None, margin: float = 0.1) -> DriverGains:
    """Bracketed grid search for driver gains with a stable driver-only loop.

    Scans ``K_d1`` (largest magnitude last) and ``K_d2`` and returns the first
    pair whose driver-in-the-loop matrix has every eigenvalue real part below
    ``-margin`` at all ``speeds``.
    """
    k1_grid = [-10.0, -25.0, -50.0, -100.0, -200.0] if k1_grid is None else k1_grid
    k2_grid = [-0.5, -1.0, -2.0, -5.0] if k2_grid is None else k2_grid
    for k1 in k1_grid:
        for k2 in k2_grid:
            g = DriverGains(k1, k2)
            worst = max(np.linalg.eigvals(build_driver_in_loop(p, g, v)).real.max() for v in speeds)
            if worst < -margin:
                return g
    raise DomainError("no stabilizing driver gains found in the search bracket")
