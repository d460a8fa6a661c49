import dataclasses

import numpy as np
import pytest

from conftest import scalar_model
from sharedsteer.synthesis import (
    AssemblyError, CertificateRejected, DesignSpec, Layout, SynthesisInfeasible, assemble_problem,
    bisect_tau1, condition_count, extract_gains, lmi_margins, synthesize, verify_certificate,
)

STABLE = DesignSpec(u_max=(1.0,), tau_1=0.1, rho=1.0, R=((1.0,),), objective="feasibility")
UNSTABLE = DesignSpec(u_max=(0.1,), tau_1=0.1, rho=1.0, R=((1.0,),), objective="feasibility")


def test_condition_counts(dsas_model):
    spec = DesignSpec.dsas()
    counts = condition_count(dsas_model, spec)
    assert counts["Psi"] == 8 + 28
    assert counts["sat"] == 8 and counts["poly"] == 8 and counts["peak"] == 8
    assert counts["tau1-tau2*rho"] == 1


def test_decision_vector_layout(dsas_model):
    lay = Layout(8, 6, 1, 6)
    assert lay.m == 21 + 8 * (1 + 6 + 6 + 36 + 36 + 6 + 6 + 6 + 1) + 2
    p = assemble_problem(dsas_model, DesignSpec.dsas())
    assert p.m == lay.m == 855
    assert max(b.size for b in p.blocks) == 15
    p.validate()


def test_layout_pack_round_trip():
    lay = Layout(2, 3, 1, 3)
    y = np.random.default_rng(0).normal(size=lay.m)
    vals = {k: v[0] for k, v in lay.unpack(y).items()}
    np.testing.assert_array_equal(lay.pack(vals), y)


def test_assembly_rejects_mismatched_rows(dsas_model):
    bad = dataclasses.replace(DesignSpec.dsas(), h_rows=((1.0, 0.0, 0.0),))
    with pytest.raises(AssemblyError):
        assemble_problem(dsas_model, bad)
    with pytest.raises(AssemblyError):
        assemble_problem(dsas_model, dataclasses.replace(DesignSpec.dsas(), u_max=(15.0, 15.0)))


def test_design_spec_invariants():
    with pytest.raises(ValueError):
        DesignSpec(u_max=(0.0,))
    with pytest.raises(ValueError):
        DesignSpec(rho=-1.0)
    with pytest.raises(ValueError):
        DesignSpec(R=((-1.0,),))
    with pytest.raises(ValueError):
        DesignSpec(objective="fastest")


def test_assembled_blocks_match_direct_formulas():
    ts = scalar_model(-1.0)
    p = assemble_problem(ts, STABLE)
    lay = Layout(1, 1, 1, 1)
    rng = np.random.default_rng(5)
    y = rng.normal(size=lay.m)
    v = {k: a[0] for k, a in lay.unpack(y).items()}
    blocks = {b.name: b.evaluate(y) for b in p.blocks}
    X, V, W, S = v["X"][0, 0], v["V0"][0, 0], v["W0"][0, 0], v["S0"][0, 0]
    np.testing.assert_allclose(blocks["sat[0,0]"], [[X, V - W], [V - W, 1.0]])
    x31, x32, x33 = v["X310"][0, 0], v["X320"][0, 0], v["X330"][0, 0]
    x21, x22, x23 = v["X210"][0, 0], v["X220"][0, 0], v["X230"][0, 0]
    t2 = v["tau2"][0, 0]
    M = np.array([
        [-X + x31 + 0.05 * X, x32, x33, -S, 1.0],
        [X - x21, -x22, -x23, 0, 0],
        [V - x31, -x32, -x33, 0, 0],
        [W, 0, 0, -S, 0],
        [0, 0, 0, 0, -0.5 * t2],
    ])
    E = np.zeros((5, 5))
    E[0, 4] = E[4, 0] = 1.0
    eps = 1e-6 * np.linalg.norm(E, 2)
    expected = -(M + M.T) - eps * np.eye(5)
    np.testing.assert_allclose(blocks["Psi[0,0]<0"], expected, atol=1e-12)


def test_scalar_sanity_feasible():
    ts = scalar_model(-1.0)
    res = synthesize(ts, STABLE)
    rep = verify_certificate(ts, STABLE, res)
    assert rep.ok, rep.failures
    assert res.tau_1 - res.tau_2 * STABLE.rho > 0


def test_scalar_sanity_infeasible():
    ts = scalar_model(2.0)
    with pytest.raises(SynthesisInfeasible):
        synthesize(ts, UNSTABLE)


def test_scalar_cases_agree_with_reference_solver():
    pytest.importorskip("cvxpy")
    from oracles import reference_synthesis_status
    args = dict(Bu=[np.eye(1)], Bw=[np.eye(1)], C=[np.eye(1)], H=[], rho=1.0, R=np.eye(1))
    assert reference_synthesis_status([np.array([[-1.0]])], u_max=[1.0], tau1=0.1, **args) == "optimal"
    assert reference_synthesis_status([np.array([[2.0]])], u_max=[0.1], tau1=0.1, **args) == "infeasible"


def test_bisection_on_stable_scalar():
    ts = scalar_model(-1.0)
    spec = dataclasses.replace(STABLE, objective="maximize_tau1")
    tau, res = bisect_tau1(ts, spec)
    assert tau >= 0.1
    assert verify_certificate(ts, dataclasses.replace(spec, tau_1=tau), res).ok
    trace = res.solver["tau1_trace"]
    assert trace[0] == (1e-3, True)


def test_bisection_with_infeasible_bracket():
    ts = scalar_model(2.0)
    spec = dataclasses.replace(UNSTABLE, objective="maximize_tau1", tau1_bracket=(1e-3, 5.0))
    with pytest.raises(SynthesisInfeasible):
        bisect_tau1(ts, spec, grid=3)


def test_extract_gains_examples():
    assert np.all(extract_gains(np.eye(6), np.zeros((8, 1, 6))) == 0)
    V = np.random.default_rng(0).normal(size=(8, 1, 6))
    np.testing.assert_allclose(extract_gains(np.eye(6), V), V, atol=1e-15)
    rng = np.random.default_rng(1)
    R = rng.normal(size=(6, 6))
    X = R @ R.T + 0.5 * np.eye(6)
    K = extract_gains(X, V)
    back = np.einsum("ijk,kl->ijl", K, X)
    assert np.abs(back - V).max() <= 1e-9 * np.abs(V).max()


def test_extract_gains_rejects_singular():
    X = np.diag([1.0, 1.0, 1.0, 1.0, 1.0, 1e-14])
    with pytest.raises(CertificateRejected):
        extract_gains(X, np.ones((1, 1, 6)))


def test_min_gamma_objective_lowers_gamma():
    ts = scalar_model(-1.0)
    feas = synthesize(ts, STABLE)
    opt = synthesize(ts, dataclasses.replace(STABLE, objective="minimize_gamma"))
    assert opt.gamma <= feas.gamma + 1e-9
    assert opt.solver["status"] == "optimal"


@pytest.mark.slow
def test_demo_certificate_verifies(dsas_model, demo_spec, demo_certificate):
    rep = verify_certificate(dsas_model, demo_spec, demo_certificate)
    assert rep.ok, rep.failures
    assert rep.decay_failures == 0 and rep.decay_samples == 1000
    assert all(v <= 1 + 1e-9 for v in rep.polytope)
    res = demo_certificate
    assert np.abs(res.V - np.einsum("ijk,kl->ijl", res.K, res.X)).max() <= 1e-9 * np.abs(res.V).max()


@pytest.mark.slow
def test_perturbed_certificate_fails(dsas_model, demo_spec, demo_certificate):
    res = dataclasses.replace(demo_certificate, X=demo_certificate.X.copy())
    a, b = 2, 3
    res.X[a, b] *= 1.1
    res.X[b, a] = res.X[a, b]
    margins = lmi_margins(dsas_model, demo_spec, res)
    assert min(margins.values()) < -1e-7
    assert not verify_certificate(dsas_model, demo_spec, res).ok
