"""Reference computations for the tests; none of them calls the package solver."""

import numpy as np

from sharedsteer.sdp import LmiBlock, SdpProblem


def lattice_minimum(blocks, c, lo, hi, n=100, levels=32, window=25):
    """Minimize ``c @ y`` over a 2-D box by repeatedly zoomed lattice search.

    ``blocks`` is a list of ``(F0, [F1, F2])`` pairs in the two active
    variables. Every lattice point is tested with a dense eigenvalue call.
    """
    best = None
    a = np.array(lo, dtype=float)
    b = np.array(hi, dtype=float)
    for _ in range(levels):
        g0, g1 = np.meshgrid(np.linspace(a[0], b[0], n), np.linspace(a[1], b[1], n), indexing="ij")
        y0, y1 = g0.ravel(), g1.ravel()
        ok = np.ones(y0.shape, dtype=bool)
        for F0, F in blocks:
            M = F0[None] + y0[:, None, None] * F[0][None] + y1[:, None, None] * F[1][None]
            ok &= np.linalg.eigvalsh(M)[:, 0] >= 0
        if not ok.any():
            break
        val = np.where(ok, c[0] * y0 + c[1] * y1, np.inf)
        k = int(np.argmin(val))
        best = (float(val[k]), float(y0[k]), float(y1[k]))
        h = (b - a) / (n - 1)
        centre = np.array(best[1:])
        a = np.maximum(centre - window * h, lo)
        b = np.minimum(centre + window * h, hi)
    return best


def eigenvalues_by_determinant(M, grid=20000, tol=1e-11):
    """Roots of ``det(M - l I)`` located by sign changes and bisection."""
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    r = np.abs(M).sum(axis=1).max() * 1.01
    ls = np.linspace(-r, r, grid)

    def f(l):
        return np.linalg.det(M - l * np.eye(n))

    vals = np.array([f(l) for l in ls])
    roots = []
    for k in range(grid - 1):
        if vals[k] == 0:
            roots.append(ls[k])
        elif vals[k] * vals[k + 1] < 0:
            a, b = ls[k], ls[k + 1]
            fa = vals[k]
            while b - a > tol * r:
                m = 0.5 * (a + b)
                fm = f(m)
                if fa * fm <= 0:
                    b = m
                else:
                    a, fa = m, fm
            roots.append(0.5 * (a + b))
    return np.array(roots)


def reference_synthesis_status(A, Bu, Bw, C, u_max, H, tau1, rho, R, margin=1e-6):
    """Feasibility of the saturation-aware PDC conditions, written directly in cvxpy."""
    import cvxpy as cp

    r = len(A)
    n, nu = Bu[0].shape
    nw = Bw[0].shape[1]
    nz = C[0].shape[0]
    X = cp.Variable((n, n), symmetric=True)
    V = [cp.Variable((nu, n)) for _ in range(r)]
    W = [cp.Variable((nu, n)) for _ in range(r)]
    S = [cp.Variable(nu) for _ in range(r)]
    X21 = [cp.Variable((nz, n)) for _ in range(r)]
    X22 = [cp.Variable((nz, n)) for _ in range(r)]
    X23 = [cp.Variable((nz, nu)) for _ in range(r)]
    X31 = [cp.Variable((nu, n)) for _ in range(r)]
    X32 = [cp.Variable((nu, n)) for _ in range(r)]
    X33 = [cp.Variable((nu, nu)) for _ in range(r)]
    tau2 = cp.Variable()
    gamma = cp.Variable()
    cons = [X >> margin * np.eye(n), tau2 >= margin, gamma >= margin, tau1 - tau2 * rho >= margin]
    for i in range(r):
        cons.append(S[i] >= margin)
        D = V[i] - W[i]
        for l in range(nu):
            cons.append(cp.bmat([[X, D[l:l + 1, :].T], [D[l:l + 1, :], np.array([[u_max[l] ** 2]])]]) >> 0)
        CX = C[i] @ X
        cons.append(cp.bmat([[X, CX.T], [CX, gamma * np.eye(nz)]]) >> 0)
    for h in H:
        h = np.asarray(h, dtype=float).reshape(-1, 1)
        cons.append(cp.bmat([[X, X @ h], [h.T @ X, np.ones((1, 1))]]) >> 0)

    def psi(i, j):
        Sj = cp.diag(S[j])
        M = cp.bmat([
            [A[i] @ X + Bu[i] @ X31[j] + tau1 / 2 * X, Bu[i] @ X32[j], Bu[i] @ X33[j], -Bu[i] @ Sj, Bw[i]],
            [C[i] @ X - X21[j], -X22[j], -X23[j], np.zeros((nz, nu)), np.zeros((nz, nw))],
            [V[i] - X31[j], -X32[j], -X33[j], np.zeros((nu, nu)), np.zeros((nu, nw))],
            [W[i], np.zeros((nu, nz)), np.zeros((nu, nu)), -Sj, np.zeros((nu, nw))],
            [np.zeros((nw, n)), np.zeros((nw, nz)), np.zeros((nw, nu)), np.zeros((nw, nu)), -tau2 / 2 * R],
        ])
        return M + M.T

    N = n + nz + 2 * nu + nw
    for i in range(r):
        cons.append(psi(i, i) << -margin * np.eye(N))
        for j in range(i + 1, r):
            cons.append(2.0 / (r - 1) * psi(i, i) + psi(i, j) + psi(j, i) << -margin * np.eye(N))
    prob = cp.Problem(cp.Minimize(0), cons)
    try:
        prob.solve(solver=cp.CLARABEL)
    except cp.error.SolverError:
        prob.solve(solver=cp.SCS, eps=1e-7, max_iters=200000)
    return prob.status


def random_small_problem(rng, n_blocks=3):
    """Two active variables plus three passive ones boxed in [-1, 1]."""
    blocks2 = []
    blocks = []
    for _ in range(n_blocks):
        k = int(rng.integers(2, 5))
        F0 = np.eye(k) * (1.0 + rng.uniform())
        F = []
        for _ in range(2):
            R = rng.normal(size=(k, k))
            F.append(0.5 * (R + R.T))
        blocks2.append((F0, F))
        blocks.append(LmiBlock(F0, np.array([0, 1]), np.array(F)))
    # box |y0|, |y1| <= 2 keeps the problem bounded
    for j in range(2):
        F0 = 2.0 * np.eye(2)
        F = np.diag([1.0, -1.0])
        blocks.append(LmiBlock(F0, np.array([j]), F[None]))
        full = [np.zeros((2, 2)), np.zeros((2, 2))]
        full[j] = F
        blocks2.append((F0, full))
    for j in range(2, 5):
        blocks.append(LmiBlock(np.eye(2), np.array([j]), np.diag([1.0, -1.0])[None]))
    c = np.zeros(5)
    c[:2] = rng.normal(size=2)
    return SdpProblem(5, blocks, c=c), blocks2, c[:2]
