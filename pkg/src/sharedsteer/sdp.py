"""Small dense semidefinite programming solver.

Problems are stated over a flat decision vector ``y`` as a list of linear
matrix inequalities ``F0 + sum_j y_j F_j >= 0`` (positive semidefinite) with an
optional linear cost ``c @ y`` to minimize.

The method is a primal log-det barrier:

* phase 1 maximizes ``t`` subject to ``F(y) >= t I`` on every block; a positive
  ``t`` gives a strictly feasible point, while a central-path bound
  ``t* <= t + nu / kappa`` below ``-phase1_eps`` is reported as infeasible;
* phase 2 (only with a cost) follows the central path of
  ``kappa * c @ y - sum log det F(y)``, multiplying ``kappa`` by a fixed factor
  until the gap estimate ``nu / kappa`` is small.

Blocks are normalized to unit scale and variables to unit column scale before
solving, so multiplying a block by a constant does not change the outcome.
A box ``|y_j| <= box`` (in normalized units) keeps phase 1 bounded; the
infeasibility verdict is therefore a diagnosis inside that box, not a
Farkas certificate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .jacobi import min_eigenvalue

log = logging.getLogger(__name__)

MAX_BLOCK = 64
MAX_VARS = 2000
STALL_DECREMENT = 1e-3
# phase 2 accepts the last centered point if centering breaks down below this relative gap
PRECISION_GAP = 1e-4


class SdpError(ValueError):
    """Malformed problem data."""


@dataclass
class LmiBlock:
    """One constraint ``F0 + sum_k y[idx[k]] * F[k] >= 0``."""

    F0: np.ndarray
    idx: np.ndarray
    F: np.ndarray
    name: str = ""

    @property
    def size(self) -> int:
        return self.F0.shape[0]

    def evaluate(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if len(self.idx) == 0:
            return self.F0.copy()
        return self.F0 + np.tensordot(y[self.idx], self.F, axes=1)


@dataclass
class SdpProblem:
    m: int
    blocks: list
    c: np.ndarray | None = None
    names: list = field(default_factory=list)

    def validate(self):
        if not 0 <= self.m <= MAX_VARS:
            raise SdpError(f"number of variables {self.m} outside [0, {MAX_VARS}]")
        for b in self.blocks:
            n = b.F0.shape[0]
            if b.F0.shape != (n, n) or n > MAX_BLOCK or n == 0:
                raise SdpError(f"block {b.name!r} has invalid shape {b.F0.shape}")
            if b.F.shape != (len(b.idx), n, n):
                raise SdpError(f"block {b.name!r} coefficient stack has shape {b.F.shape}")
            if len(b.idx) and (b.idx.min() < 0 or b.idx.max() >= self.m):
                raise SdpError(f"block {b.name!r} references an unknown variable")
            if not np.allclose(b.F0, b.F0.T, rtol=0, atol=1e-12 * max(1.0, np.abs(b.F0).max())):
                raise SdpError(f"block {b.name!r}: F0 is not symmetric")
            if len(b.idx) and not np.allclose(b.F, b.F.transpose(0, 2, 1), rtol=0,
                                              atol=1e-12 * max(1.0, np.abs(b.F).max())):
                raise SdpError(f"block {b.name!r}: coefficient matrices are not symmetric")
        if self.c is not None and np.shape(self.c) != (self.m,):
            raise SdpError("cost vector length does not match the number of variables")

    def evaluate(self, y) -> list:
        return [b.evaluate(y) for b in self.blocks]

    def dense_coefficients(self, block_index: int) -> np.ndarray:
        """All ``m`` coefficient matrices of one block, zeros included."""
        b = self.blocks[block_index]
        out = np.zeros((self.m, b.size, b.size))
        out[b.idx] = b.F
        return out


@dataclass
class SolverOptions:
    phase1_eps: float = 1e-7
    gap_tol: float = 1e-7
    max_newton: int = 1000
    kappa_factor: float = 5.0
    box: float = 1e6
    center_tol: float = 1e-5


@dataclass
class SdpSolution:
    y: np.ndarray
    status: str            # feasible | optimal | infeasible | numerical-failure
    block_min_eigs: np.ndarray
    iterations: int
    gap: float
    phase1_t: float = float("nan")
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status in ("feasible", "optimal")


def block_min_eigs(problem: SdpProblem, y) -> np.ndarray:
    return np.array([min_eigenvalue(M) for M in problem.evaluate(y)])


# -- internal normalized representation ----------------------------------------

@dataclass
class _Block:
    F0: np.ndarray
    idx: np.ndarray
    F: np.ndarray
    Fflat: np.ndarray


def _normalize(problem: SdpProblem, passes: int = 6):
    """Equilibrate blocks and variables; returns scaled blocks and ``d``.

    Each block is rescaled by a diagonal congruence ``D F D`` (which leaves
    definiteness unchanged) and every variable by a column factor ``d_j``,
    alternating a few Ruiz-style passes so that every block row and every
    variable column has unit max-magnitude.
    """
    work = [(np.array(b.F0, dtype=float), np.asarray(b.idx, dtype=int), np.array(b.F, dtype=float))
            for b in problem.blocks]
    d = np.ones(problem.m)
    for _ in range(passes):
        for k, (F0, idx, F) in enumerate(work):
            rows = np.abs(F0).max(axis=1)
            if len(idx):
                rows = np.maximum(rows, np.abs(F).max(axis=(0, 2)))
            s = np.where(rows > 0, 1.0 / np.sqrt(np.where(rows > 0, rows, 1.0)), 1.0)
            S = s[:, None] * s[None, :]
            work[k] = (F0 * S, idx, F * S)
        colmax = np.zeros(problem.m)
        for _, idx, F in work:
            if len(idx):
                np.maximum.at(colmax, idx, np.abs(F).reshape(len(idx), -1).max(axis=1))
        dj = np.where(colmax > 0, 1.0 / np.sqrt(np.where(colmax > 0, colmax, 1.0)), 1.0)
        d *= dj
        work = [(F0, idx, F * dj[idx][:, None, None]) for F0, idx, F in work]
    out = []
    for F0, idx, F in work:
        F0 = 0.5 * (F0 + F0.T)
        F = 0.5 * (F + F.transpose(0, 2, 1))
        out.append(_Block(F0, idx, F, F.reshape(len(idx), -1)))
    return out, d


class _Barrier:
    """Barrier ``kappa*c@x - sum log det Z_b(x) - sum log(box^2 - x_j^2)``.

    ``nbox`` leading variables carry the box term; any remaining variables
    (the phase-1 level ``t``) are free apart from their LMI blocks.
    """

    def __init__(self, blocks, nvar, nbox, box):
        self.blocks = blocks
        self.nvar = nvar
        self.nbox = nbox
        self.box = box
        self.nu = sum(b.F0.shape[0] for b in blocks) + 2 * nbox

    def Z(self, b, x):
        if len(b.idx) == 0:
            return b.F0
        return b.F0 + np.tensordot(x[b.idx], b.F, axes=1)

    def value(self, x, c, kappa):
        xb = x[: self.nbox]
        if np.any(np.abs(xb) >= self.box):
            return np.inf
        f = kappa * float(c @ x) - float(np.sum(np.log(self.box - xb) + np.log(self.box + xb)))
        for b in self.blocks:
            try:
                L = np.linalg.cholesky(self.Z(b, x))
            except np.linalg.LinAlgError:
                return np.inf
            f -= 2.0 * float(np.sum(np.log(np.diag(L))))
        return f

    def newton(self, x, c, kappa):
        n = self.nvar
        H = np.zeros((n, n))
        g = kappa * c.copy()
        xb = x[: self.nbox]
        lo = 1.0 / (self.box + xb)
        hi = 1.0 / (self.box - xb)
        g[: self.nbox] += hi - lo
        H[np.arange(self.nbox), np.arange(self.nbox)] += hi**2 + lo**2
        factors = []
        for b in self.blocks:
            Z = self.Z(b, x)
            L = np.linalg.cholesky(Z)
            Li = linalg.solve_triangular(L, np.eye(Z.shape[0]), lower=True)
            factors.append(Li)
            if len(b.idx) == 0:
                continue
            G = np.matmul(np.matmul(Li, b.F), Li.T)
            Gf = G.reshape(len(b.idx), -1)
            H[np.ix_(b.idx, b.idx)] += Gf @ Gf.T
            np.add.at(g, b.idx, -np.einsum("kii->k", G))
        return H, g, factors

    def max_step(self, x, dx, factors):
        """Largest step keeping every block positive definite (and inside the box)."""
        amax = np.inf
        for b, Li in zip(self.blocks, factors):
            if len(b.idx) == 0:
                continue
            D = np.tensordot(dx[b.idx], b.F, axes=1)
            lam = np.linalg.eigvalsh(Li @ D @ Li.T)[0]
            if lam < 0:
                amax = min(amax, -1.0 / lam)
        xb, db = x[: self.nbox], dx[: self.nbox]
        with np.errstate(divide="ignore", invalid="ignore"):
            up = np.where(db > 0, (self.box - xb) / db, np.inf)
            dn = np.where(db < 0, (-self.box - xb) / db, np.inf)
        amax = min(amax, float(np.min(up, initial=np.inf)), float(np.min(dn, initial=np.inf)))
        return amax


def _solve_newton_system(H, g):
    try:
        cf = linalg.cho_factor(H, lower=True, check_finite=False)
        return -linalg.cho_solve(cf, g, check_finite=False)
    except linalg.LinAlgError:
        reg = 1e-10 * max(1.0, float(np.abs(np.diag(H)).max()))
        cf = linalg.cho_factor(H + reg * np.eye(H.shape[0]), lower=True, check_finite=False)
        return -linalg.cho_solve(cf, g, check_finite=False)


class _Budget:
    def __init__(self, limit):
        self.limit = limit
        self.used = 0


def _center(bar, x, c, kappa, opts, budget, stop=None):
    """Damped Newton centering. Returns (x, converged, stopped_early)."""
    while budget.used < budget.limit:
        H, g, factors = bar.newton(x, c, kappa)
        dx = _solve_newton_system(H, g)
        dec2 = float(-g @ dx)
        if not np.isfinite(dec2):
            return x, False, False
        if dec2 / 2.0 <= opts.center_tol:
            return x, True, False
        budget.used += 1
        amax = bar.max_step(x, dx, factors)
        alpha = min(1.0, 0.99 * amax)
        f0 = bar.value(x, c, kappa)
        slope = float(g @ dx)
        while alpha > 1e-14:
            xn = x + alpha * dx
            fn = bar.value(xn, c, kappa)
            if fn <= f0 + 0.25 * alpha * slope:
                break
            alpha *= 0.5
        else:
            return x, False, False
        stalled = alpha * np.linalg.norm(dx) <= 1e-12 * (1.0 + np.linalg.norm(x)) or f0 - fn <= 1e-15 * abs(f0)
        x = xn
        if stop is not None and stop(x):
            return x, True, True
        if stalled:
            # no measurable progress: centered to working precision if the
            # decrement is already small, lost otherwise
            return x, dec2 / 2.0 <= STALL_DECREMENT, False
    return x, False, False


def solve(problem: SdpProblem, options: SolverOptions | None = None) -> SdpSolution:
    """Find a feasible (or, with a cost vector, optimal) decision vector."""
    opts = options or SolverOptions()
    problem.validate()
    m = problem.m
    blocks, d = _normalize(problem)
    budget = _Budget(opts.max_newton)

    # phase 1: variables (yhat, t), every block gets -t I, plus t <= 1
    aug = []
    for b in blocks:
        n = b.F0.shape[0]
        idx = np.append(b.idx, m)
        F = np.concatenate([b.F, -np.eye(n)[None]], axis=0)
        aug.append(_Block(b.F0, idx, F, F.reshape(len(idx), -1)))
    aug.append(_Block(np.ones((1, 1)), np.array([m]), -np.ones((1, 1, 1)), -np.ones((1, 1))))
    bar1 = _Barrier(aug, m + 1, m, opts.box)
    x = np.zeros(m + 1)
    lam0 = min((np.linalg.eigvalsh(b.F0)[0] for b in blocks), default=1.0)
    x[m] = min(lam0 - 1.0, 0.0)
    c1 = np.zeros(m + 1)
    c1[m] = -1.0
    kappa = 1.0
    gap = np.inf
    while True:
        x, converged, early = _center(bar1, x, c1, kappa, opts, budget, stop=lambda z: z[m] > 0)
        if x[m] > 0:
            break
        if not converged:
            return _finish(problem, d, x[:m], "numerical-failure", budget.used, gap, x[m],
                           "phase 1 did not converge within the Newton budget")
        gap = bar1.nu / kappa
        if x[m] + gap < -opts.phase1_eps:
            return _finish(problem, d, x[:m], "infeasible", budget.used, gap, x[m],
                           f"phase-1 bound t* <= {x[m] + gap:.3e}")
        if gap < 1e-12:
            return _finish(problem, d, x[:m], "infeasible", budget.used, gap, x[m],
                           "phase-1 optimum is not strictly positive")
        kappa *= opts.kappa_factor
    t1 = x[m]
    y = x[:m].copy()
    if problem.c is None or not np.any(problem.c):
        return _finish(problem, d, y, "feasible", budget.used, 0.0, t1, "strictly feasible point found")

    # phase 2: central path on the original blocks
    bar2 = _Barrier(blocks, m, m, opts.box)
    c2 = np.asarray(problem.c, dtype=float) * d
    kappa = 1.0
    last = None
    while True:
        y, converged, _ = _center(bar2, y, c2, kappa, opts, budget)
        if not converged:
            if last is not None and last[1] <= PRECISION_GAP * (1.0 + abs(float(c2 @ last[0]))):
                y, gap = last
                if np.max(np.abs(y), initial=0.0) <= 0.999 * opts.box:
                    return _finish(problem, d, y, "optimal", budget.used, gap, t1,
                                   f"precision limit reached at gap {gap:.2e}")
            return _finish(problem, d, y, "numerical-failure", budget.used, bar2.nu / kappa, t1,
                           "central path lost within the Newton budget")
        gap = bar2.nu / kappa
        last = (y.copy(), gap)
        if gap < opts.gap_tol * (1.0 + abs(float(c2 @ y))):
            break
        kappa *= opts.kappa_factor
    if np.max(np.abs(y), initial=0.0) > 0.999 * opts.box:
        return _finish(problem, d, y, "numerical-failure", budget.used, gap, t1,
                       "solution pinned at the variable box; objective may be unbounded")
    return _finish(problem, d, y, "optimal", budget.used, gap, t1, "gap tolerance reached")


def _finish(problem, d, yhat, status, iters, gap, t, msg):
    y = np.asarray(yhat) * d
    eigs = block_min_eigs(problem, y)
    if status in ("feasible", "optimal") and eigs.size and eigs.min() < -1e-7:
        status, msg = "numerical-failure", f"recheck found block margin {eigs.min():.3e}"
    log.debug("sdp solve: %s after %d Newton steps (%s)", status, iters, msg)
    return SdpSolution(y=y, status=status, block_min_eigs=eigs, iterations=iters, gap=float(gap),
                       phase1_t=float(t), message=msg)
