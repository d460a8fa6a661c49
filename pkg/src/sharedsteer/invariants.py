"""Self-checks run by ``sharedsteer verify``.

Each check returns ``(name, passed, detail)``; none of them depends on a
reference implementation outside this package.
"""

from __future__ import annotations

import math

import numpy as np

from .driver import driver_activity, weighting_mu
from .jacobi import jacobi_eigenvalues
from .sdp import LmiBlock, SdpProblem, solve
from .sdpa import export_sdpa, import_sdpa
from .sim import integrate
from .synthesis import DesignSpec, SynthesisResult, verify_certificate
from .ts import TsModel, direct_model, memberships, reconstruct


def check_certificate(ts: TsModel, spec: DesignSpec, res: SynthesisResult, samples: int = 1000):
    rep = verify_certificate(ts, spec, res, samples=samples)
    return [("certificate: " + line.strip(), rep.ok, "") for line in rep.lines()[1:]] + [
        ("certificate", rep.ok, "; ".join(rep.failures))]


def check_reconstruction(ts: TsModel, params, gains, n: int = 20):
    b = ts.bounds
    err = 0.0
    for v in np.linspace(b.v_min, b.v_max, n):
        for mu in np.linspace(b.mu_min, b.mu_max, n):
            A, Bu = reconstruct(ts, v, mu)
            Ad, Bd = direct_model(params, gains, v, mu)
            err = max(err, np.abs(A - Ad).max(), np.abs(Bu - Bd).max())
    return [("T-S reconstruction error < 1e-10", err < 1e-10, f"{err:.2e}")]


def check_memberships(ts: TsModel, n: int = 10000, seed: int = 0):
    rng = np.random.default_rng(seed)
    b = ts.bounds
    worst = 0.0
    neg = 0.0
    for v, mu in zip(rng.uniform(b.v_min, b.v_max, n), rng.uniform(b.mu_min, b.mu_max, n)):
        eta = memberships(v, mu, b)
        worst = max(worst, abs(eta.sum() - 1.0))
        neg = min(neg, eta.min())
    return [("membership simplex", worst < 1e-12 and neg >= 0.0, f"sum error {worst:.1e}, min {neg:.1e}")]


def check_weighting():
    mu97 = weighting_mu(0.97)
    th = driver_activity(15.0, 1.0)
    return [
        ("mu(0.97) within 0.02 of 0.96", abs(mu97 - 0.96) <= 0.02, f"{mu97:.5f}"),
        ("mu(0.5) == 0.25", weighting_mu(0.5) == 0.25, f"{weighting_mu(0.5)!r}"),
        ("theta_d(T_dN=1, DS=1) == 1 - e^-8", abs(th - (1 - math.exp(-8))) <= 1e-12, f"{th!r}"),
    ]


def check_sdp():
    box = LmiBlock(np.eye(2), np.array([0]), np.array([[[0.0, 1.0], [1.0, 0.0]]]))
    s1 = solve(SdpProblem(1, [box], c=np.array([-1.0])))
    lo = LmiBlock(np.array([[-2.0]]), np.array([0]), np.array([[[1.0]]]))
    hi = LmiBlock(np.array([[5.0]]), np.array([0]), np.array([[[-1.0]]]))
    p2 = SdpProblem(1, [lo, hi], c=np.array([1.0]))
    s2 = solve(p2)
    text = export_sdpa(p2)
    return [
        ("SDP |y| <= 1 maximum", abs(s1.y[0] - 1.0) <= 1e-6, f"{s1.y[0]:.9f}"),
        ("SDP interval minimum", abs(s2.y[0] - 2.0) <= 1e-6, f"{s2.y[0]:.9f}"),
        ("SDPA round trip", export_sdpa(import_sdpa(text)) == text, ""),
    ]


def check_jacobi(seed: int = 0):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(8, 8))
    M = M + M.T
    err = np.abs(jacobi_eigenvalues(M) - np.linalg.eigvalsh(M)).max()
    return [("Jacobi eigenvalues", err < 1e-9, f"{err:.1e}")]


def check_rk4():
    x1 = integrate(lambda t, x: -x, [1.0], 1.0, 1e-3)[0]
    err = abs(x1 - math.exp(-1.0))
    return [("RK4 exponential test", err <= 1e-8, f"{err:.1e}")]


def run_all(ts, spec, res, params, gains, samples: int = 1000):
    out = []
    if res.fingerprint != ts.fingerprint():
        out.append(("gain set matches the configured T-S model", False,
                    f"{res.fingerprint} != {ts.fingerprint()}"))
    else:
        out.append(("gain set matches the configured T-S model", True, res.fingerprint))
    out += check_certificate(ts, spec, res, samples)
    out += check_reconstruction(ts, params, gains)
    out += check_memberships(ts)
    out += check_weighting()
    out += check_sdp()
    out += check_jacobi()
    out += check_rk4()
    return out
