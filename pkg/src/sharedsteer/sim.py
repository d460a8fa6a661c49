"""Closed-loop simulation of the weighted, saturated PDC steering assistance.

The simulated plant is the linear parameter-varying lateral model with the
visual driver model closed around it. Two exogenous channels are added on top
of the design model: a scripted override torque from the driver (added to the
model torque) and road curvature, which enters the heading-error equation as
``d psi_l / dt -= v_x * rho_c``.

Integration is classical fixed-step RK4. Inputs are evaluated at the stage
times, except ``hold`` profiles, which are read at the middle of each step so
that jumps placed on the step grid are integrated exactly. When the linear
closed loop has modes too fast for the logging step (``h * |lambda|`` beyond
the RK4 stability interval), each logged step is split into equal RK4
substeps; samples are still written every ``dt``.
"""

from __future__ import annotations

import bisect
import io
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .driver import ActivityParams, WeightingParams, driver_activity, weighting_mu
from .synthesis import SynthesisResult
from .ts import MembershipClamp, TsModel, affine_parts, memberships
from .vehicle import CONSTRAINT_LABELS, DomainError, STATE_NAMES, DriverGains, VehicleParams, build_plant_matrices

log = logging.getLogger(__name__)

PROFILE_KINDS = ("linear", "hold", "cosine")
PRESETS = ("test1", "test2", "test3")


class SimulationError(RuntimeError):
    pass


class ConfigurationError(ValueError):
    pass


# -- scenario description -----------------------------------------------------

@dataclass(frozen=True)
class Profile:
    """Scalar time profile through knots ``(t_k, v_k)``.

    ``linear`` interpolates, ``hold`` keeps the value of the latest knot and
    ``cosine`` blends between knots with a raised-cosine ramp. Outside the
    knot range the end values are held.
    """

    kind: str
    t: tuple
    v: tuple

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if len(self.t) == 0 or len(self.t) != len(self.v):
            raise ValueError("profile needs matching, non-empty knot lists")
        if any(b < a for a, b in zip(self.t, self.t[1:])):
            raise ValueError("profile knot times must be nondecreasing")
        if not all(math.isfinite(x) for x in self.t + self.v):
            raise ValueError("profile knots must be finite")

    @classmethod
    def constant(cls, value: float) -> "Profile":
        return cls("hold", (0.0,), (float(value),))

    @classmethod
    def knots(cls, kind: str, pairs) -> "Profile":
        pairs = list(pairs)
        return cls(kind, tuple(float(a) for a, _ in pairs), tuple(float(b) for _, b in pairs))

    def __call__(self, t: float) -> float:
        ts, vs = self.t, self.v
        if t <= ts[0]:
            return vs[0]
        if t >= ts[-1]:
            return vs[-1]
        # last knot with t_k <= t
        k = bisect.bisect_right(ts, t) - 1
        if self.kind == "hold":
            return vs[k]
        t0, t1 = ts[k], ts[k + 1]
        if t1 == t0:
            return vs[k + 1]
        s = (t - t0) / (t1 - t0)
        if self.kind == "cosine":
            s = 0.5 * (1.0 - math.cos(math.pi * s))
        return vs[k] + (vs[k + 1] - vs[k]) * s

    def to_text(self) -> str:
        return self.kind + ": " + ", ".join(f"{a!r} {b!r}" for a, b in zip(self.t, self.v))

    @classmethod
    def from_text(cls, text: str) -> "Profile":
        kind, sep, rest = text.partition(":")
        if not sep:
            raise ValueError(f"profile {text!r} lacks a 'kind:' prefix")
        pairs = []
        for item in rest.split(","):
            parts = item.split()
            if len(parts) != 2:
                raise ValueError(f"profile knot {item.strip()!r} is not a 't value' pair")
            pairs.append((float(parts[0]), float(parts[1])))
        return cls.knots(kind.strip(), pairs)


@dataclass(frozen=True)
class Scenario:
    name: str
    duration: float
    dt: float = 1e-3
    v_x: Profile = Profile.constant(15.0)
    wind: Profile = Profile.constant(0.0)
    curvature: Profile = Profile.constant(0.0)
    ds: Profile = Profile.constant(1.0)
    override: Profile = Profile.constant(0.0)
    x0: tuple = (0.0,) * 6

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("scenario duration must be positive")
        if not 0 < self.dt <= 0.01:
            raise ValueError("time step must lie in (0, 0.01]")
        if len(self.x0) != 6:
            raise ValueError("initial state must have 6 entries")
        if any(not 0.0 <= v <= 1.0 for v in self.ds.v):
            raise ValueError("driver state knots must lie in [0, 1]")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))


def preset(name: str) -> Scenario:
    """Built-in driving scenarios.

    * ``test1``: straight road at 15 m/s, 1200 N lateral wind on [70, 76] s.
    * ``test2``: 55 s on a gently curved road, four assistance phases scripted
      through the driver state and an override torque.
    * ``test3``: straight road; a lane-change torque pulse on [60, 75] s,
      with an inattentive driver (DS = 0) until 65 s and an attentive one after.
    """
    if name == "test1":
        return Scenario(
            "test1", 100.0, wind=Profile.knots("hold", [(0, 0), (70, 1200), (76, 0)]),
        )
    if name == "test2":
        return Scenario(
            "test2", 55.0,
            curvature=Profile.knots("cosine", [(0, 0), (4, 0), (12, 1 / 500), (46, 1 / 500), (54, 0)]),
            ds=Profile.knots("hold", [(0, 0), (18, 1), (40, 0.3)]),
            override=Profile.knots("cosine", TEST2_OVERRIDE),
        )
    if name == "test3":
        return Scenario(
            "test3", 100.0,
            ds=Profile.knots("hold", [(0, 1), (60, 0), (65, 1)]),
            override=Profile.knots("cosine", TEST3_OVERRIDE),
        )
    raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")


# override torque knots (N.m) used by the presets
TEST2_OVERRIDE = [(0, 0), (17, 0), (19, 5.5), (34, 5.5), (36, 11.5), (39, 11.5), (41, 0)]
TEST3_OVERRIDE = [(0, 0), (60, 0), (62.5, 6), (72.5, 6), (75, 0)]


# -- controller and dynamics --------------------------------------------------

def pdc_control(result: SynthesisResult, ts: TsModel, x, v_x: float, mu: float,
                clamp: MembershipClamp | None = None):
    """Blended state feedback ``u_raw`` and its saturated value ``u_sat``."""
    if result.fingerprint and result.fingerprint != ts.fingerprint():
        raise ConfigurationError("gain set was synthesized for a different T-S model")
    eta = memberships(v_x, mu, ts.bounds, clamp)
    u_raw = np.einsum("i,ijk,k->j", eta, result.K, np.asarray(x, dtype=float))
    umax = np.asarray(result.u_max, dtype=float)
    return u_raw, np.clip(u_raw, -umax, umax)


@dataclass
class ClosedLoop:
    """Right-hand side of the simulated closed loop."""

    result: SynthesisResult
    ts: TsModel
    params: VehicleParams = VehicleParams()
    gains: DriverGains = DriverGains()
    weighting: WeightingParams = WeightingParams()
    activity: ActivityParams = ActivityParams()
    clamp: MembershipClamp = field(default_factory=MembershipClamp)

    def __post_init__(self):
        if self.result.fingerprint and self.result.fingerprint != self.ts.fingerprint():
            raise ConfigurationError(
                f"gain set fingerprint {self.result.fingerprint} does not match "
                f"the T-S model {self.ts.fingerprint()}")
        if self.ts.r != 8:
            raise ConfigurationError("the steering simulation expects the 8-rule (v, 1/v, mu) model")
        if self.result.K.shape[1] != 1:
            raise ConfigurationError("the steering simulation needs a single control input")
        self._K = np.ascontiguousarray(self.result.K[:, 0, :])
        self._umax = float(self.result.u_max[0])
        self._plant = affine_parts(self.params, DriverGains(0.0, 0.0))
        loop = affine_parts(self.params, self.gains)
        rho = self.params.rho
        self._drow = tuple((L[5] - P[5]) / rho for L, P in zip(loop, self._plant))
        self._Bw = build_plant_matrices(self.params, 15.0).B_w[:, 0].copy()
        self._cache_v = None
        self._cache = None
        # while integrating, ``hold`` profiles are read at the middle of the
        # current substep so jumps on the step grid are taken exactly
        self.hold_time = None

    def _matrices(self, v):
        """Stacked ``[A(v); driver row; K_1..K_r]`` so one product serves a stage."""
        if v != self._cache_v:
            P0, P1, P2 = self._plant
            D0, D1, D2 = self._drow
            self._cache = np.vstack([P0 + v * P1 + P2 / v, D0 + v * D1 + D2 / v, self._K])
            self._cache_v = v
        return self._cache

    def _input(self, p: Profile, t: float) -> float:
        if p.kind == "hold" and self.hold_time is not None:
            return p(self.hold_time)
        return p(t)

    def speed(self, sc: Scenario, t: float) -> float:
        b = self.ts.bounds
        v = self._input(sc.v_x, t)
        vc = min(max(v, b.v_min), b.v_max)
        if vc != v:
            self.clamp.count += 1
        return vc

    def _axis(self, v: float, mu: float):
        b = self.ts.bounds
        m = min(max(mu, b.mu_min), b.mu_max)
        if m != mu:
            self.clamp.count += 1
        w1 = (v - b.v_min) / (b.v_max - b.v_min)
        w2 = (1.0 / v - 1.0 / b.v_max) / (1.0 / b.v_min - 1.0 / b.v_max)
        w3 = (m - b.mu_min) / (b.mu_max - b.mu_min)
        return (1.0 - w1, w1), (1.0 - w2, w2), (1.0 - w3, w3)

    def evaluate(self, sc: Scenario, t: float, x: np.ndarray, signals: bool = True):
        """State derivative, plus the logged signals at ``(t, x)`` when ``signals`` is set."""
        v = self.speed(sc, t)
        y = self._matrices(v) @ x
        T_d = float(y[6]) + self._input(sc.override, t)
        DS = self._input(sc.ds, t)
        theta = driver_activity(T_d, DS, self.activity)
        mu = weighting_mu(theta, self.weighting)
        pa, pc, pd = self._axis(v, mu)
        kx = y[7:].tolist()
        # rule order is lexicographic in (v, 1/v, mu), as in ts.memberships
        u_raw = 0.0
        for i in range(2):
            for j in range(2):
                k = 4 * i + 2 * j
                u_raw += pa[i] * pc[j] * (pd[0] * kx[k] + pd[1] * kx[k + 1])
        u_sat = min(max(u_raw, -self._umax), self._umax)
        T_c = mu * u_sat
        f_w = self._input(sc.wind, t)
        rho_c = self._input(sc.curvature, t)
        xdot = y[:6]
        if f_w:
            xdot += self._Bw * f_w
        xdot[5] += self.params.rho * (T_c + T_d)
        xdot[2] -= v * rho_c
        if not signals:
            return xdot
        eta = np.array([pa[i] * pc[j] * pd[k] for i in range(2) for j in range(2) for k in range(2)])
        return xdot, (v, T_d, theta, mu, u_raw, u_sat, T_c, f_w, rho_c, DS, eta)

    def rhs(self, sc: Scenario, t: float, x: np.ndarray) -> np.ndarray:
        return self.evaluate(sc, t, x, signals=False)

    def spectral_bound(self) -> float:
        """Largest |eigenvalue| of the unsaturated closed loop over the rule corners."""
        ts = self.ts
        worst = 0.0
        for i in range(ts.r):
            for j in range(ts.r):
                Acl = ts.A[i] + ts.Bu[i] @ self.result.K[j]
                worst = max(worst, float(np.abs(np.linalg.eigvals(Acl)).max()))
        return worst

    def substeps(self, h: float) -> int:
        """RK4 substeps per logged step keeping ``h_sub * |lambda|`` at or below ``RK4_REACH``."""
        return max(1, math.ceil(h * self.spectral_bound() / RK4_REACH))


# RK4 is stable on the negative real axis up to about 2.785; keep some margin
RK4_REACH = 2.5


def rk4_step(f, t: float, x: np.ndarray, h: float) -> np.ndarray:
    k1 = f(t, x)
    k2 = f(t + 0.5 * h, x + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, x + 0.5 * h * k2)
    k4 = f(t + h, x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(f, x0, t_end: float, h: float) -> np.ndarray:
    """Fixed-step RK4 from 0 to ``t_end``; returns the final state."""
    x = np.array(x0, dtype=float)
    n = int(round(t_end / h))
    for k in range(n):
        x = rk4_step(f, k * h, x, h)
    return x


# -- traces -------------------------------------------------------------------

SIGNALS = ("v_x", "T_d", "theta_d", "mu", "u_raw", "u_sat", "T_c", "f_w", "rho_c", "DS")
COLUMNS = ("t",) + STATE_NAMES + SIGNALS + tuple(f"eta_{i}" for i in range(8)) + ("override", "V")


@dataclass
class SimTrace:
    """Uniformly sampled closed-loop signals, one array per column."""

    data: dict
    meta: dict = field(default_factory=dict)

    def __getitem__(self, name) -> np.ndarray:
        return self.data[name]

    @property
    def t(self) -> np.ndarray:
        return self.data["t"]

    @property
    def states(self) -> np.ndarray:
        return np.column_stack([self.data[n] for n in STATE_NAMES])

    @property
    def eta(self) -> np.ndarray:
        return np.column_stack([self.data[c] for c in self.data if c.startswith("eta_")])

    def __len__(self):
        return len(self.t)

    def to_csv(self) -> str:
        cols = list(self.data)
        M = np.column_stack([self.data[c] for c in cols])
        buf = io.StringIO()
        buf.write(",".join(cols) + "\n")
        np.savetxt(buf, M, fmt="%.17g", delimiter=",")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SimTrace":
        lines = text.splitlines()
        cols = lines[0].split(",")
        M = np.loadtxt(io.StringIO("\n".join(lines[1:])), delimiter=",", ndmin=2)
        return cls({c: M[:, k] for k, c in enumerate(cols)})


def run(sc: Scenario, result: SynthesisResult, ts: TsModel, params: VehicleParams = VehicleParams(),
        gains: DriverGains = DriverGains(), weighting: WeightingParams = WeightingParams(),
        activity: ActivityParams = ActivityParams()) -> SimTrace:
    """Simulate ``sc`` and record every step."""
    loop = ClosedLoop(result, ts, params, gains, weighting, activity)
    n = sc.n_steps
    h = sc.dt
    r = ts.r
    cols = {c: np.empty(n + 1) for c in ("t",) + SIGNALS}
    etas = np.empty((n + 1, r))
    states = np.empty((n + 1, 6))
    over = np.empty(n + 1)
    P = np.linalg.inv(result.X)
    P = 0.5 * (P + P.T)
    x = np.array(sc.x0, dtype=float)
    f = lambda t, z: loop.rhs(sc, t, z)  # noqa: E731
    nsub = loop.substeps(h)
    hs = h / nsub
    for k in range(n + 1):
        t = k * h
        _, sig = loop.evaluate(sc, t, x)
        states[k] = x
        for name, val in zip(SIGNALS, sig[:-1]):
            cols[name][k] = val
        etas[k] = sig[-1]
        over[k] = sc.override(t)
        cols["t"][k] = t
        if k == n:
            break
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                for j in range(nsub):
                    t0 = (k * nsub + j) * hs
                    loop.hold_time = t0 + 0.5 * hs
                    x = rk4_step(f, t0, x, hs)
        except DomainError as exc:
            # a stage evaluation already saw a non-finite state
            raise SimulationError(f"non-finite state at t = {t + h:.6f} s in scenario {sc.name!r} ({exc})") from exc
        finally:
            loop.hold_time = None
        if not np.all(np.isfinite(x)):
            raise SimulationError(f"non-finite state at t = {t + h:.6f} s in scenario {sc.name!r}")
    data = {"t": cols["t"]}
    for j, nm in enumerate(STATE_NAMES):
        data[nm] = states[:, j].copy()
    for nm in SIGNALS:
        data[nm] = cols[nm]
    for i in range(r):
        data[f"eta_{i}"] = etas[:, i].copy()
    data["override"] = over
    data["V"] = np.einsum("ki,ij,kj->k", states, P, states)
    if loop.clamp.count:
        log.warning("%d scheduling inputs were clamped to the design box", loop.clamp.count)
    return SimTrace(data, {"scenario": sc.name, "clamped": loop.clamp.count, "substeps": nsub,
                           "fingerprint": result.fingerprint, "tau_1": result.tau_1})


# -- post-run checks ----------------------------------------------------------

@dataclass
class ConstraintReport:
    maxima: np.ndarray
    labels: tuple
    flagged: list

    @property
    def ok(self) -> bool:
        return not self.flagged

    def lines(self) -> list:
        return [f"{'FAIL' if lab in self.flagged else 'ok  '} {lab:<12} max h'x = {m:.4f}"
                for lab, m in zip(self.labels, self.maxima)]


def check_constraints(trace: SimTrace, h_rows, labels=CONSTRAINT_LABELS) -> ConstraintReport:
    """Per-row maximum of ``h_k @ x`` over the trace; rows above 1 are flagged."""
    H = np.asarray(h_rows, dtype=float)
    X = trace.states
    maxima = (X @ H.T).max(axis=0) if len(X) else np.zeros(len(H))
    if len(labels) != len(H):
        labels = tuple(f"row{k}" for k in range(len(H)))
    flagged = [lab for lab, m in zip(labels, maxima) if m > 1.0]
    return ConstraintReport(maxima, tuple(labels), flagged)


@dataclass
class DecayReport:
    checked: int
    violations: int
    worst_rate: float
    max_V_disturbed: float
    max_V: float

    @property
    def ok(self) -> bool:
        return self.violations == 0


def lyapunov_trace(trace: SimTrace, X, tau_1: float, tol: float = 0.05,
                   horizon: float = 0.5, floor: float = 1e-10) -> DecayReport:
    """Check ``V(t + d) <= V(t) exp(-tau_1 d (1 - tol))`` on undisturbed stretches.

    Pairs ``(t, t + horizon)`` are tested when both ends and everything in
    between has no wind, no curvature, no override, ``V <= 1`` and ``V`` above
    ``floor`` (below it round-off dominates).
    """
    P = np.linalg.inv(np.asarray(X, dtype=float))
    S = trace.states
    V = np.einsum("ki,ij,kj->k", S, 0.5 * (P + P.T), S)
    t = trace.t
    dt = t[1] - t[0] if len(t) > 1 else 1.0
    lag = max(1, int(round(horizon / dt)))
    override = trace.data.get("override", np.zeros_like(t))
    quiet = (trace["f_w"] == 0) & (trace["rho_c"] == 0) & (override == 0) & (V <= 1.0) & (V > floor)
    # a window is clean when every sample in it is quiet
    bad = np.concatenate([[0], np.cumsum(~quiet)])
    n = len(t) - lag
    idx = np.arange(max(n, 0))
    clean = (bad[idx + lag + 1] - bad[idx]) == 0
    i0 = idx[clean]
    bound = np.exp(-tau_1 * lag * dt * (1.0 - tol))
    ratio = V[i0 + lag] / V[i0]
    viol = int(np.sum(ratio > bound))
    worst = float(-np.log(ratio.max()) / (lag * dt)) if len(i0) else float("nan")
    disturbed = (trace["f_w"] != 0) | (trace["rho_c"] != 0) | (override != 0)
    return DecayReport(
        checked=int(len(i0)), violations=viol, worst_rate=worst,
        max_V_disturbed=float(V[disturbed].max()) if disturbed.any() else 0.0,
        max_V=float(V.max()) if len(V) else 0.0,
    )


def with_profile(sc: Scenario, **changes) -> Scenario:
    """Copy of ``sc`` with selected fields replaced."""
    return replace(sc, **changes)


@dataclass
class RecoveryReport:
    peak: float
    settle_time: float
    residual: float

    @property
    def ok(self) -> bool:
        return self.residual < 0.05 * self.peak


def pulse_recovery(trace: SimTrace, start: float, end: float, window: float = 10.0) -> RecoveryReport:
    """Peak ``|x|`` during ``[start, end]`` and the largest ``|x|`` from ``end + window`` on."""
    n = np.linalg.norm(trace.states, axis=1)
    t = trace.t
    peak = float(n[(t >= start) & (t <= end)].max())
    after = n[t >= end + window - 1e-9]
    below = np.nonzero((t > end) & (n < 0.05 * peak))[0]
    settle = float(t[below[0]] - end) if len(below) else math.inf
    return RecoveryReport(peak, settle, float(after.max()) if len(after) else math.inf)


@dataclass
class ManeuverReport:
    """Lateral offsets at the end of the override plateau in three variants of one scenario."""

    at: float
    target: float
    scripted: float
    inattentive: float

    def reached(self, frac: float = 0.9) -> bool:
        return self.target > 0 and self.scripted >= frac * self.target

    def suppressed(self, frac: float = 0.25) -> bool:
        return abs(self.inattentive) < frac * self.target


def maneuver_contrast(sc: Scenario, result: SynthesisResult, ts: TsModel, **kw) -> ManeuverReport:
    """Compare the scripted DS sequence with an attentive and an inattentive driver.

    The target is the offset an attentive driver (DS = 1 throughout) reaches at
    the end of the override plateau; the inattentive variant keeps DS = 0 from
    the start of the override on.
    """
    knots = [t for t, v in zip(sc.override.t, sc.override.v) if v != 0]
    if not knots:
        raise ConfigurationError("scenario has no override torque to compare against")
    onset = max(t for t, v in zip(sc.override.t, sc.override.v) if v == 0 and t < knots[0])
    at = knots[-1]
    short = replace(sc, duration=min(sc.duration, at + sc.dt))
    k = int(round(at / sc.dt))
    offsets = []
    for ds in (Profile.constant(1.0), None, Profile.knots("hold", [(0.0, sc.ds(0.0)), (onset, 0.0)])):
        variant = short if ds is None else replace(short, ds=ds)
        offsets.append(float(run(variant, result, ts, **kw)["y_l"][k]))
    return ManeuverReport(at, *offsets)
