"""Eight-rule Takagi-Sugeno polytope over (v_x, 1/v_x, mu).

Every entry of the driver-in-the-loop state matrix is affine in the pair
``(v_x, 1/v_x)`` and the input matrix is linear in ``mu``. Treating
``z1 = v_x``, ``z2 = 1/v_x`` and ``z3 = mu`` as independent bounded variables
gives a polytope with ``2**3`` vertices whose convex blend reproduces the
model exactly.

Rule numbering is lexicographic over the corners with ``z1`` slowest::

    rule = 4 * b1 + 2 * b2 + b3,   b_j = 0 at the lower bound, 1 at the upper
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .vehicle import DomainError, DriverGains, VehicleParams, build_driver_in_loop, build_plant_matrices

log = logging.getLogger(__name__)

FORMAT_VERSION = 1


@dataclass(frozen=True)
class SchedulingBounds:
    v_min: float = 9.0
    v_max: float = 25.0
    mu_min: float = 0.25
    mu_max: float = 1.0

    def __post_init__(self):
        if not self.v_min > 0:
            raise DomainError("v_min must be positive")
        if not (self.v_max > self.v_min and self.mu_max > self.mu_min):
            raise DomainError("scheduling bounds are degenerate")

    def box(self) -> np.ndarray:
        """Bounds per scheduling variable as rows ``[low, high]``."""
        return np.array([
            [self.v_min, self.v_max],
            [1.0 / self.v_max, 1.0 / self.v_min],
            [self.mu_min, self.mu_max],
        ])


def default_output_matrix() -> np.ndarray:
    return np.diag([0.0, 0.0, 1.0, 1.0, 0.0, 0.0])


def affine_parts(p: VehicleParams, g: DriverGains):
    """Split ``A_v(v) = A0 + v*A1 + A2/v`` exactly.

    Each term is obtained by evaluating the model with the speed dependence
    isolated; the caller-facing check is :func:`scheduled_matrices`.
    """
    # three-speed interpolation solves the 3x3 Vandermonde-like system
    speeds = np.array([1.0, 2.0, 4.0])
    mats = np.stack([build_driver_in_loop(p, g, v) for v in speeds])
    G = np.stack([np.ones(3), speeds, 1.0 / speeds], axis=1)
    coef = np.linalg.solve(G, mats.reshape(3, -1))
    A0, A1, A2 = (c.reshape(6, 6) for c in coef)
    return A0, A1, A2


def scheduled_matrices(p: VehicleParams, g: DriverGains, z1: float, z2: float, z3: float):
    """State and input matrices at an arbitrary (possibly non-physical) corner."""
    A0, A1, A2 = affine_parts(p, g)
    A = A0 + z1 * A1 + z2 * A2
    Bu = np.zeros((6, 1))
    Bu[5, 0] = z3 * p.rho
    return A, Bu


@dataclass(frozen=True)
class TsModel:
    A: np.ndarray          # (r, n, n)
    Bu: np.ndarray         # (r, n, n_u)
    Bw: np.ndarray         # (r, n, n_w)
    C: np.ndarray          # (r, n_z, n)
    bounds: SchedulingBounds
    corners: np.ndarray    # (r, 3) corner values (z1, z2, z3)
    meta: dict = field(default_factory=dict)

    @property
    def r(self) -> int:
        return self.A.shape[0]

    @property
    def n_x(self) -> int:
        return self.A.shape[1]

    @property
    def n_u(self) -> int:
        return self.Bu.shape[2]

    def fingerprint(self) -> str:
        return hashlib.sha256(dumps_ts_model(self).encode()).hexdigest()[:16]


def build_ts_model(p: VehicleParams = VehicleParams(), g: DriverGains = DriverGains(),
                   b: SchedulingBounds = SchedulingBounds(), C=None) -> TsModel:
    C = default_output_matrix() if C is None else np.asarray(C, dtype=float)
    box = b.box()
    # exact per-corner evaluation: rebuild at the corner instead of blending
    A0, A1, A2 = affine_parts(p, g)
    Bw = build_plant_matrices(p, 0.5 * (b.v_min + b.v_max)).B_w
    As, Bus, corners = [], [], []
    for bits in itertools.product((0, 1), repeat=3):
        z = [box[k, bits[k]] for k in range(3)]
        As.append(A0 + z[0] * A1 + z[1] * A2)
        Bu = np.zeros((6, 1))
        Bu[5, 0] = z[2] * p.rho
        Bus.append(Bu)
        corners.append(z)
    r = len(As)
    return TsModel(
        A=np.stack(As), Bu=np.stack(Bus), Bw=np.repeat(Bw[None], r, axis=0),
        C=np.repeat(C[None], r, axis=0), bounds=b, corners=np.array(corners),
    )


class MembershipClamp:
    """Counts scheduling inputs pushed back into the admissible box."""

    def __init__(self):
        self.count = 0


def axis_weights(v_x: float, mu: float, b: SchedulingBounds, clamp: MembershipClamp | None = None):
    """Upper-corner weight per scheduling axis after clamping to the box."""
    v = min(max(v_x, b.v_min), b.v_max)
    m = min(max(mu, b.mu_min), b.mu_max)
    if v != v_x or m != mu:
        if clamp is not None:
            clamp.count += 1
        else:
            log.warning("scheduling input (v_x=%g, mu=%g) clamped to the design box", v_x, mu)
    box = b.box()
    z = (v, 1.0 / v, m)
    return [(z[k] - box[k, 0]) / (box[k, 1] - box[k, 0]) for k in range(3)]


def memberships(v_x: float, mu: float, b: SchedulingBounds = SchedulingBounds(),
                clamp: MembershipClamp | None = None) -> np.ndarray:
    """Rule weights (ordered like the model vertices), nonnegative and summing to 1."""
    w1, w2, w3 = axis_weights(v_x, mu, b, clamp)
    p1 = (1.0 - w1, w1)
    p2 = (1.0 - w2, w2)
    p3 = (1.0 - w3, w3)
    return np.array([p1[a] * p2[c] * p3[d] for a, c, d in itertools.product((0, 1), repeat=3)])


def reconstruct(ts: TsModel, v_x: float, mu: float):
    eta = memberships(v_x, mu, ts.bounds)
    A = np.einsum("i,ijk->jk", eta, ts.A)
    Bu = np.einsum("i,ijk->jk", eta, ts.Bu)
    return A, Bu


def direct_model(p: VehicleParams, g: DriverGains, v_x: float, mu: float):
    """Driver-in-the-loop matrices evaluated straight from the model equations."""
    A = build_driver_in_loop(p, g, v_x)
    Bu = np.zeros((6, 1))
    Bu[5, 0] = mu * p.rho
    return A, Bu


# -- serialization -----------------------------------------------------------

def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _num_json(obj, indent=0):
    pad = " " * indent
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        items = [f'{pad}  {json.dumps(k)}: {_num_json(v, indent + 2).lstrip()}' for k, v in obj.items()]
        return pad + "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if obj and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return pad + "[" + ", ".join(fmt(v) for v in obj) + "]"
        if not obj:
            return pad + "[]"
        items = [_num_json(v, indent + 2) for v in obj]
        return pad + "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, float):
        return pad + fmt(obj)
    return pad + json.dumps(obj)


def dump_json(obj) -> str:
    """JSON text with every float written to 17 significant digits."""
    return _num_json(obj) + "\n"


def ts_model_dict(ts: TsModel) -> dict:
    b = ts.bounds
    return {
        "format": "sharedsteer.ts_model",
        "version": FORMAT_VERSION,
        "bounds": {"v_min": b.v_min, "v_max": b.v_max, "mu_min": b.mu_min, "mu_max": b.mu_max},
        "corners": ts.corners,
        "A": ts.A, "Bu": ts.Bu, "Bw": ts.Bw, "C": ts.C,
        "meta": ts.meta,
    }


def dumps_ts_model(ts: TsModel) -> str:
    return dump_json(ts_model_dict(ts))


def ts_model_from_dict(d: dict) -> TsModel:
    if d.get("format") != "sharedsteer.ts_model" or d.get("version") != FORMAT_VERSION:
        raise ValueError("not a version-1 T-S model document")
    b = SchedulingBounds(**d["bounds"])
    arr = {k: np.array(d[k], dtype=float) for k in ("A", "Bu", "Bw", "C", "corners")}
    return TsModel(arr["A"], arr["Bu"], arr["Bw"], arr["C"], b, arr["corners"], d.get("meta", {}))


def loads_ts_model(text: str) -> TsModel:
    return ts_model_from_dict(json.loads(text))
