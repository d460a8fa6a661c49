"""Saturation-aware PDC gain synthesis over a T-S polytope.

The decision variables are a Lyapunov-type matrix ``X`` (the invariant
ellipsoid is ``{x : x' X^-1 x <= 1}``), per-rule gain numerators ``V_i`` and
sector matrices ``W_i``, positive diagonal ``S_i``, per-rule slack blocks
``X21 .. X33`` and the scalars ``tau_2`` and ``gamma``. Feedback gains follow
as ``K_i = V_i X^-1``.

Conditions (all per rule ``i`` unless noted):

* saturation: ``[[X, (V_i - W_i)_l'], [(V_i - W_i)_l, umax_l^2]] >= 0`` per input ``l``;
* state polytope: ``[[X, X h_k], [h_k' X, 1]] >= 0`` per row ``h_k``;
* ``tau_1 - tau_2 * rho > 0``;
* output peak: ``[[X, (C_i X)'], [C_i X, gamma I]] >= 0``;
* decay with bounded disturbance: ``Psi_ii < 0`` and
  ``2/(r-1) Psi_ii + Psi_ij + Psi_ji < 0`` for ``i < j``.

Strict inequalities carry a margin ``eps`` scaled by the norm of their
constant part.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg

from .jacobi import min_eigenvalue
from .sdp import LmiBlock, SdpProblem, SdpSolution, SolverOptions, solve
from .ts import TsModel, memberships
from .vehicle import VehicleParams, state_constraint_rows

log = logging.getLogger(__name__)

OBJECTIVES = ("feasibility", "minimize_gamma", "maximize_tau1")


class SynthesisError(RuntimeError):
    pass


class AssemblyError(SynthesisError):
    pass


class SynthesisInfeasible(SynthesisError):
    pass


class CertificateRejected(SynthesisError):
    pass


@dataclass(frozen=True)
class DesignSpec:
    """Design data of the synthesis problem.

    ``R`` weights the disturbance; with the default ``rho = 1`` the admissible
    wind is ``|f_w| <= 1 / sqrt(R)``.
    """

    u_max: tuple = (15.0,)
    tau_1: float = 0.3
    rho: float = 1.0
    R: tuple = ((1.0 / 1200.0**2,),)
    h_rows: tuple = ()
    objective: str = "maximize_tau1"
    eps: float = 1e-6
    tau1_bracket: tuple = (1e-3, 5.0)
    tau1_rel_width: float = 0.05

    def __post_init__(self):
        if min(self.u_max) <= 0:
            raise ValueError("u_max must be positive")
        if self.rho <= 0:
            raise ValueError("rho must be positive")
        if np.linalg.eigvalsh(np.atleast_2d(np.array(self.R, dtype=float)))[0] <= 0:
            raise ValueError("R must be positive definite")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")

    @property
    def R_matrix(self) -> np.ndarray:
        return np.atleast_2d(np.array(self.R, dtype=float))

    @property
    def H(self) -> np.ndarray:
        if not self.h_rows:
            return np.zeros((0, 0))
        return np.array(self.h_rows, dtype=float)

    @classmethod
    def dsas(cls, p: VehicleParams = VehicleParams(), f_w_max: float = 1200.0, **kw) -> "DesignSpec":
        """Design data of the steering-assist application."""
        rows = tuple(tuple(h) for h in state_constraint_rows(p))
        kw = {"u_max": (15.0,), "rho": 1.0, **kw}
        return cls(R=((1.0 / f_w_max**2,),), h_rows=rows, **kw)


# -- decision vector layout ----------------------------------------------------

class Layout:
    """Offsets of every named block inside the flat decision vector."""

    def __init__(self, r: int, n_x: int, n_u: int, n_z: int):
        self.r, self.n_x, self.n_u, self.n_z = r, n_x, n_u, n_z
        self.slots = {}
        self.names = []
        self.m = 0
        self._add("X", n_x * (n_x + 1) // 2, "sym")
        for i in range(r):
            for name, shape in (
                ("S", (n_u,)), ("V", (n_u, n_x)), ("W", (n_u, n_x)),
                ("X21", (n_z, n_x)), ("X22", (n_z, n_x)), ("X23", (n_z, n_u)),
                ("X31", (n_u, n_x)), ("X32", (n_u, n_x)), ("X33", (n_u, n_u)),
            ):
                self._add(f"{name}{i}", int(np.prod(shape)), shape)
        self._add("tau2", 1, (1, 1))
        self._add("gamma", 1, (1, 1))

    def _add(self, name, size, shape):
        self.slots[name] = (self.m, size, shape)
        if shape == "sym":
            iu = np.triu_indices(self.n_x)
            self.names += [f"X[{a},{b}]" for a, b in zip(*iu)]
        else:
            self.names += [f"{name}[{k}]" for k in range(size)] if size > 1 else [name]
        self.m += size

    def unpack(self, Y) -> dict:
        """Split a batch of decision vectors ``(k, m)`` into named arrays."""
        Y = np.atleast_2d(Y)
        k = Y.shape[0]
        out = {}
        for name, (off, size, shape) in self.slots.items():
            seg = Y[:, off:off + size]
            if shape == "sym":
                n = self.n_x
                X = np.zeros((k, n, n))
                iu = np.triu_indices(n)
                X[:, iu[0], iu[1]] = seg
                X[:, iu[1], iu[0]] = seg
                out[name] = X
            elif name.startswith("S"):
                out[name] = np.einsum("kj,jl->kjl", seg, np.eye(self.n_u))
            else:
                out[name] = seg.reshape((k,) + tuple(shape))
        return out

    def pack(self, values: dict) -> np.ndarray:
        y = np.zeros(self.m)
        for name, (off, size, shape) in self.slots.items():
            v = np.asarray(values[name], dtype=float)
            if shape == "sym":
                y[off:off + size] = v[np.triu_indices(self.n_x)]
            elif name.startswith("S"):
                y[off:off + size] = np.diag(np.atleast_2d(v))
            else:
                y[off:off + size] = v.reshape(-1)
        return y


def _bmat(rows, k):
    """Block matrix from a nested list of ``(k, a, b)`` arrays or ``None`` zeros."""
    heights = [next(blk.shape[-2] for blk in row if blk is not None) for row in rows]
    widths = [next(rows[i][j].shape[-1] for i in range(len(rows)) if rows[i][j] is not None)
              for j in range(len(rows[0]))]
    out = []
    for row, h in zip(rows, heights):
        parts = []
        for blk, w in zip(row, widths):
            parts.append(np.zeros((k, h, w)) if blk is None else np.broadcast_to(blk, (k, h, w)))
        out.append(np.concatenate(parts, axis=2))
    return np.concatenate(out, axis=1)


def _T(a):
    return np.swapaxes(a, -1, -2)


def _he(a):
    return a + _T(a)


class _Assembler:
    """Batch-evaluable block functions shared by assembly and diagnostics."""

    def __init__(self, ts: TsModel, spec: DesignSpec):
        self.ts, self.spec = ts, spec
        n_x, n_u = ts.n_x, ts.n_u
        n_z = ts.C.shape[1]
        if ts.Bu.shape[1] != n_x or ts.Bw.shape[1] != n_x or ts.C.shape[2] != n_x:
            raise AssemblyError("T-S matrices have inconsistent state dimensions")
        if n_z != n_x:
            raise AssemblyError("the slack structure needs a square output matrix (n_z == n_x)")
        if len(spec.u_max) != n_u:
            raise AssemblyError(f"u_max has {len(spec.u_max)} entries for {n_u} inputs")
        if spec.R_matrix.shape != (ts.Bw.shape[2],) * 2:
            raise AssemblyError("R does not match the disturbance dimension")
        H = spec.H
        if H.size and H.shape[1] != n_x:
            raise AssemblyError("constraint rows do not match the state dimension")
        self.layout = Layout(ts.r, n_x, n_u, n_z)
        self.n_w = ts.Bw.shape[2]

    def blocks(self):
        """Yield ``(name, fn, strict)`` where ``fn(vals, const)`` returns ``(k, n, n)``."""
        ts, spec = self.ts, self.spec
        r, n_u = ts.r, ts.n_u
        tau1 = spec.tau_1

        yield "X>0", (lambda v, c: v["X"]), True
        for i in range(r):
            yield f"S{i}>0", (lambda v, c, i=i: v[f"S{i}"]), True
        yield "tau2>0", (lambda v, c: v["tau2"]), True
        yield "gamma>0", (lambda v, c: v["gamma"]), True

        for i in range(r):
            for l in range(n_u):
                def sat(v, c, i=i, l=l):
                    d = (v[f"V{i}"] - v[f"W{i}"])[:, l:l + 1, :]
                    k = d.shape[0]
                    corner = np.full((k, 1, 1), spec.u_max[l] ** 2 if c else 0.0)
                    return _bmat([[v["X"], _T(d)], [d, corner]], k)
                yield f"sat[{i},{l}]", sat, False

        for q, h in enumerate(spec.H):
            def poly(v, c, h=h):
                Xh = v["X"] @ h[:, None]
                k = Xh.shape[0]
                return _bmat([[v["X"], Xh], [_T(Xh), np.full((k, 1, 1), 1.0 if c else 0.0)]], k)
            yield f"poly[{q}]", poly, False

        def decay_budget(v, c):
            return (tau1 if c else 0.0) - spec.rho * v["tau2"]
        yield "tau1-tau2*rho>0", decay_budget, True

        for i in range(r):
            def peak(v, c, i=i):
                CX = ts.C[i] @ v["X"]
                k = CX.shape[0]
                return _bmat([[v["X"], _T(CX)], [CX, v["gamma"] * np.eye(ts.C.shape[1])]], k)
            yield f"peak[{i}]", peak, False

        def psi(v, c, i, j):
            A, Bu, Bw, C = ts.A[i], ts.Bu[i], ts.Bw[i], ts.C[i]
            X = v["X"]
            k = X.shape[0]
            R = spec.R_matrix
            m11 = A @ X + Bu @ v[f"X31{j}"] + 0.5 * tau1 * X
            rows = [
                [m11, Bu @ v[f"X32{j}"], Bu @ v[f"X33{j}"], -Bu @ v[f"S{j}"],
                 np.broadcast_to(Bw if c else 0.0 * Bw, (k,) + Bw.shape)],
                [C @ X - v[f"X21{j}"], -v[f"X22{j}"], -v[f"X23{j}"], None, None],
                [v[f"V{i}"] - v[f"X31{j}"], -v[f"X32{j}"], -v[f"X33{j}"], None, None],
                [v[f"W{i}"], None, None, -v[f"S{j}"], None],
                [None, None, None, None, -0.5 * v["tau2"] * R],
            ]
            return _he(_bmat(rows, k))

        for i in range(r):
            yield f"Psi[{i},{i}]<0", (lambda v, c, i=i: -psi(v, c, i, i)), True
        for i in range(r):
            for j in range(i + 1, r):
                def pair(v, c, i=i, j=j):
                    return -((2.0 / (r - 1)) * psi(v, c, i, i) + psi(v, c, i, j) + psi(v, c, j, i))
                yield f"Psi[{i},{j}]+Psi[{j},{i}]<0", pair, True


def assemble_problem(ts: TsModel, spec: DesignSpec, with_names: bool = True) -> SdpProblem:
    """Build the generic SDP for the synthesis conditions at ``spec.tau_1``.

    With ``objective == "minimize_gamma"`` the cost picks out ``gamma``;
    otherwise the problem is a pure feasibility problem.
    """
    asm = _Assembler(ts, spec)
    lay = asm.layout
    m = lay.m
    zero = lay.unpack(np.zeros((1, m)))
    unit = lay.unpack(np.eye(m))
    blocks = []
    for name, fn, strict in asm.blocks():
        F0 = np.array(fn(zero, True)[0])
        F = np.array(fn(unit, False))
        F0 = 0.5 * (F0 + F0.T)
        F = 0.5 * (F + _T(F))
        if strict:
            scale = np.linalg.norm(F0, 2) if np.any(F0) else 1.0
            F0 = F0 - spec.eps * scale * np.eye(F0.shape[0])
        support = np.flatnonzero(np.abs(F).reshape(m, -1).max(axis=1) > 0)
        blocks.append(LmiBlock(F0, support, F[support], name))
    c = None
    if spec.objective == "minimize_gamma":
        c = np.zeros(m)
        c[lay.slots["gamma"][0]] = 1.0
    return SdpProblem(m=m, blocks=blocks, c=c, names=lay.names if with_names else [])


def condition_count(ts: TsModel, spec: DesignSpec) -> dict:
    """Number of emitted blocks per condition family."""
    counts: dict = {}
    for name, _, _ in _Assembler(ts, spec).blocks():
        fam = name.split("[")[0].split(">")[0].split("<")[0]
        if name.startswith("Psi"):
            fam = "Psi"
        counts[fam] = counts.get(fam, 0) + 1
    return counts


# -- results -----------------------------------------------------------------

@dataclass
class VerificationReport:
    margins: dict = field(default_factory=dict)
    decay_samples: int = 0
    decay_failures: int = 0
    decay_worst: float = float("nan")
    polytope: list = field(default_factory=list)
    tolerance: float = 1e-7
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def min_margin(self) -> float:
        return min(self.margins.values()) if self.margins else float("nan")

    def lines(self) -> list:
        out = [f"{'PASS' if self.ok else 'FAIL'} certificate verification"]
        out.append(f"  smallest LMI margin     {self.min_margin():.3e} (tolerance {-self.tolerance:.0e})")
        out.append(f"  decay samples           {self.decay_samples - self.decay_failures}/{self.decay_samples} pass"
                   f" (worst Vdot + tau1*V = {self.decay_worst:.3e})")
        if self.polytope:
            out.append(f"  max h' X h              {max(self.polytope):.6f} (must be <= 1)")
        out += [f"  violated: {f}" for f in self.failures]
        return out


@dataclass
class SynthesisResult:
    X: np.ndarray
    V: np.ndarray          # (r, n_u, n_x)
    W: np.ndarray
    S: np.ndarray          # (r, n_u, n_u)
    slack: dict            # name -> (r, ...) arrays for X21 .. X33
    tau_1: float
    tau_2: float
    gamma: float
    K: np.ndarray          # (r, n_u, n_x)
    fingerprint: str = ""
    u_max: tuple = (15.0,)
    solver: dict = field(default_factory=dict)
    report: VerificationReport | None = None

    @property
    def P(self) -> np.ndarray:
        return np.linalg.inv(self.X)


def extract_gains(X, V) -> np.ndarray:
    """``K_i = V_i X^-1`` through a Cholesky solve of ``X``."""
    X = np.asarray(X, dtype=float)
    V = np.asarray(V, dtype=float)
    w = np.linalg.eigvalsh(X)
    if w[0] <= 0 or w[-1] / w[0] > 1e12:
        raise CertificateRejected(f"X is not safely positive definite (eigenvalues {w[0]:.3e} .. {w[-1]:.3e})")
    cf = linalg.cho_factor(X, lower=True)
    if V.ndim == 2:
        return linalg.cho_solve(cf, V.T).T
    return np.stack([linalg.cho_solve(cf, Vi.T).T for Vi in V])


def result_from_solution(ts: TsModel, spec: DesignSpec, sol: SdpSolution) -> SynthesisResult:
    lay = Layout(ts.r, ts.n_x, ts.n_u, ts.C.shape[1])
    v = lay.unpack(sol.y[None])
    r = ts.r
    X = v["X"][0]
    V = np.stack([v[f"V{i}"][0] for i in range(r)])
    slack = {name: np.stack([v[f"{name}{i}"][0] for i in range(r)])
             for name in ("X21", "X22", "X23", "X31", "X32", "X33")}
    return SynthesisResult(
        X=X, V=V, W=np.stack([v[f"W{i}"][0] for i in range(r)]),
        S=np.stack([v[f"S{i}"][0] for i in range(r)]), slack=slack,
        tau_1=spec.tau_1, tau_2=float(v["tau2"][0, 0, 0]), gamma=float(v["gamma"][0, 0, 0]),
        K=extract_gains(X, V), fingerprint=ts.fingerprint(), u_max=tuple(spec.u_max),
        solver={"status": sol.status, "iterations": sol.iterations, "gap": sol.gap,
                "phase1_t": sol.phase1_t, "message": sol.message},
    )


def synthesize(ts: TsModel, spec: DesignSpec, options: SolverOptions | None = None) -> SynthesisResult:
    """Solve at ``spec.tau_1``; raises :class:`SynthesisInfeasible` when no certificate exists."""
    problem = assemble_problem(ts, spec)
    sol = solve(problem, options)
    if not sol.ok:
        raise SynthesisInfeasible(f"tau_1={spec.tau_1:g}: solver status {sol.status} ({sol.message})")
    return result_from_solution(ts, spec, sol)


def _feasible(ts, spec, tau1, options):
    try:
        return synthesize(ts, replace(spec, tau_1=tau1, objective="feasibility"), options)
    except SynthesisInfeasible as exc:
        log.info("%s", exc)
        return None


def bisect_tau1(ts: TsModel, spec: DesignSpec, options: SolverOptions | None = None,
                grid: int = 9) -> tuple:
    """Largest feasible decay rate in ``spec.tau1_bracket`` and its certificate.

    Feasibility need not be monotone in ``tau_1``: a small decay rate also
    forces a small ``tau_2`` and hence a large disturbance ellipsoid. When the
    lower bracket end is infeasible a geometric grid is scanned first; the
    bisection then refines between the largest feasible grid point and the
    next grid point above it.
    """
    lo_b, hi_b = spec.tau1_bracket
    trace = []
    best = None
    lo = lo_b
    res = _feasible(ts, spec, lo, options)
    trace.append((lo, res is not None))
    points = np.geomspace(lo_b, hi_b, grid)
    if res is not None:
        best = (lo, res)
    for t in points[1:]:
        ok = _feasible(ts, spec, float(t), options)
        trace.append((float(t), ok is not None))
        if ok is not None:
            best = (float(t), ok)
        elif best is not None:
            hi = float(t)
            break
    else:
        hi = None
    if best is None:
        raise SynthesisInfeasible(
            f"no feasible decay rate on the grid over [{lo_b:g}, {hi_b:g}]: "
            + ", ".join(f"{t:.3g}" for t, _ in trace))
    lo, res = best
    if hi is not None:
        while (hi - lo) > spec.tau1_rel_width * lo:
            mid = math.sqrt(lo * hi)
            ok = _feasible(ts, spec, mid, options)
            trace.append((mid, ok is not None))
            if ok is not None:
                lo, res = mid, ok
            else:
                hi = mid
    res.solver["tau1_trace"] = trace
    if spec.objective == "minimize_gamma":
        res = synthesize(ts, replace(spec, tau_1=lo), options)
        res.solver["tau1_trace"] = trace
    return lo, res


# -- independent certificate check --------------------------------------------

def _psi(ts, spec, res, i, j):
    """One decay block written out directly from the result matrices."""
    A, Bu, Bw, C = ts.A[i], ts.Bu[i], ts.Bw[i], ts.C[i]
    X = res.X
    sl = res.slack
    n_x, n_u, n_w = ts.n_x, ts.n_u, Bw.shape[1]
    n_z = C.shape[0]
    N = n_x + n_z + n_u + n_u + n_w
    M = np.zeros((N, N))
    o = np.cumsum([0, n_x, n_z, n_u, n_u, n_w])
    M[o[0]:o[1], o[0]:o[1]] = A @ X + Bu @ sl["X31"][j] + 0.5 * res.tau_1 * X
    M[o[0]:o[1], o[1]:o[2]] = Bu @ sl["X32"][j]
    M[o[0]:o[1], o[2]:o[3]] = Bu @ sl["X33"][j]
    M[o[0]:o[1], o[3]:o[4]] = -Bu @ res.S[j]
    M[o[0]:o[1], o[4]:o[5]] = Bw
    M[o[1]:o[2], o[0]:o[1]] = C @ X - sl["X21"][j]
    M[o[1]:o[2], o[1]:o[2]] = -sl["X22"][j]
    M[o[1]:o[2], o[2]:o[3]] = -sl["X23"][j]
    M[o[2]:o[3], o[0]:o[1]] = res.V[i] - sl["X31"][j]
    M[o[2]:o[3], o[1]:o[2]] = -sl["X32"][j]
    M[o[2]:o[3], o[2]:o[3]] = -sl["X33"][j]
    M[o[3]:o[4], o[0]:o[1]] = res.W[i]
    M[o[3]:o[4], o[3]:o[4]] = -res.S[j]
    M[o[4]:o[5], o[4]:o[5]] = -0.5 * res.tau_2 * spec.R_matrix
    return M + M.T


def lmi_margins(ts: TsModel, spec: DesignSpec, res: SynthesisResult) -> dict:
    """Minimum eigenvalue of every condition, oriented so that >= 0 means satisfied."""
    X = res.X
    r = ts.r
    out = {"X>0": min_eigenvalue(X)}
    for i in range(r):
        out[f"S{i}>0"] = float(np.min(np.diag(res.S[i])))
        D = res.V[i] - res.W[i]
        for l, um in enumerate(spec.u_max):
            d = D[l:l + 1]
            out[f"sat[{i},{l}]"] = min_eigenvalue(np.block([[X, d.T], [d, np.array([[um**2]])]]))
    for q, h in enumerate(spec.H):
        Xh = X @ h
        out[f"poly[{q}]"] = min_eigenvalue(np.block([[X, Xh[:, None]], [Xh[None], np.ones((1, 1))]]))
    out["tau2>0"] = res.tau_2
    out["gamma>0"] = res.gamma
    out["tau1-tau2*rho>0"] = res.tau_1 - res.tau_2 * spec.rho
    for i in range(r):
        CX = ts.C[i] @ X
        out[f"peak[{i}]"] = min_eigenvalue(np.block([[X, CX.T], [CX, res.gamma * np.eye(CX.shape[0])]]))
    for i in range(r):
        out[f"Psi[{i},{i}]<0"] = min_eigenvalue(-_psi(ts, spec, res, i, i))
        for j in range(i + 1, r):
            Q = (2.0 / (r - 1)) * _psi(ts, spec, res, i, i) + _psi(ts, spec, res, i, j) + _psi(ts, spec, res, j, i)
            out[f"Psi[{i},{j}]+Psi[{j},{i}]<0"] = min_eigenvalue(-Q)
    return out


def sample_decay(ts: TsModel, res: SynthesisResult, u_max, n: int = 1000, seed: int = 0):
    """Check ``Vdot + tau_1 V <= 0`` on the ellipsoid boundary with saturation, ``w = 0``.

    For the 8-rule steering model the memberships come from random admissible
    ``(v_x, mu)``; any other polytope is sampled with random simplex weights.
    Returns the array of ``Vdot + tau_1 V`` values (``V = 1`` on the boundary).
    """
    rng = np.random.default_rng(seed)
    L = np.linalg.cholesky(res.X)
    P = np.linalg.inv(res.X)
    P = 0.5 * (P + P.T)
    z = rng.normal(size=(n, ts.n_x))
    xs = (z / np.linalg.norm(z, axis=1, keepdims=True)) @ L.T
    physical = ts.r == 8 and ts.corners.shape == (8, 3)
    if physical:
        b = ts.bounds
        vs = rng.uniform(b.v_min, b.v_max, n)
        mus = rng.uniform(b.mu_min, b.mu_max, n)
    else:
        weights = rng.dirichlet(np.ones(ts.r), n)
    umax = np.asarray(u_max, dtype=float)
    out = np.empty(n)
    for k in range(n):
        x = xs[k]
        eta = memberships(vs[k], mus[k], ts.bounds) if physical else weights[k]
        A = np.einsum("i,ijk->jk", eta, ts.A)
        Bu = np.einsum("i,ijk->jk", eta, ts.Bu)
        u = np.einsum("i,ijk,k->j", eta, res.K, x)
        us = np.clip(u, -umax, umax)
        xdot = A @ x + Bu @ us
        out[k] = 2.0 * x @ P @ xdot + res.tau_1 * (x @ P @ x)
    return out


def verify_certificate(ts: TsModel, spec: DesignSpec, res: SynthesisResult,
                       tol: float = 1e-7, samples: int = 1000, seed: int = 0) -> VerificationReport:
    rep = VerificationReport(tolerance=tol)
    if res.fingerprint and res.fingerprint != ts.fingerprint():
        rep.failures.append("certificate was built against a different T-S model")
    try:
        rep.margins = lmi_margins(ts, spec, res)
    except np.linalg.LinAlgError as exc:
        rep.failures.append(f"margin evaluation failed: {exc}")
        return rep
    for name, val in rep.margins.items():
        if not val >= -tol:
            rep.failures.append(f"{name} (margin {val:.3e})")
    rep.polytope = [float(h @ res.X @ h) for h in spec.H]
    for q, val in enumerate(rep.polytope):
        if val > 1.0 + tol:
            rep.failures.append(f"h[{q}]' X h[{q}] = {val:.6f} > 1")
    K = extract_gains(res.X, res.V)
    if np.max(np.abs(res.V - np.einsum("ijk,kl->ijl", K, res.X))) > 1e-9 * max(np.max(np.abs(res.V)), 1e-300):
        rep.failures.append("gains do not reproduce V through X")
    if np.min(np.linalg.eigvalsh(res.X)) > 0:
        vals = sample_decay(ts, res, spec.u_max, samples, seed)
        scale = np.max(np.abs(vals)) if vals.size else 1.0
        bad = vals > 1e-9 * max(scale, 1.0)
        rep.decay_samples = int(vals.size)
        rep.decay_failures = int(bad.sum())
        rep.decay_worst = float(vals.max()) if vals.size else float("nan")
        if rep.decay_failures:
            rep.failures.append(f"decay check failed on {rep.decay_failures}/{vals.size} boundary samples")
    else:
        rep.failures.append("X is not positive definite")
    res.report = rep
    return rep
