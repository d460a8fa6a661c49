import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sharedsteer.ts import (
    MembershipClamp, SchedulingBounds, build_ts_model, direct_model, dumps_ts_model, loads_ts_model,
    memberships, reconstruct,
)
from sharedsteer.vehicle import DomainError, DriverGains, VehicleParams

P, G = VehicleParams(), DriverGains()
TS = build_ts_model(P, G)
B = TS.bounds


def test_vertex_count_and_shapes():
    assert TS.r == 8
    assert TS.A.shape == (8, 6, 6) and TS.Bu.shape == (8, 6, 1) and TS.Bw.shape == (8, 6, 1)
    assert TS.C.shape == (8, 6, 6)


def test_corner_order_is_lexicographic():
    box = B.box()
    for i, bits in enumerate(itertools.product((0, 1), repeat=3)):
        np.testing.assert_array_equal(TS.corners[i], [box[k, bits[k]] for k in range(3)])


def test_first_vertex_row4():
    np.testing.assert_array_equal(TS.A[0][3], [1, 5, 9, 0, 0, 0])


def test_shared_wind_channel_and_input_rows():
    assert all(np.array_equal(TS.Bw[0], b) for b in TS.Bw)
    for i in range(8):
        mu = TS.corners[i, 2]
        assert TS.Bu[i, 5, 0] == pytest.approx(mu * 1.25)
        assert np.count_nonzero(TS.Bu[i]) == 1
    assert {TS.Bu[i, 5, 0] for i in range(8)} == {0.3125, 1.25}


def test_degenerate_bounds():
    with pytest.raises(DomainError):
        SchedulingBounds(v_min=10.0, v_max=10.0)


def test_memberships_at_corner():
    eta = memberships(9.0, 0.25, B)
    # corner (v_min, z2 max, mu_min) has bits (0, 1, 0), i.e. index 2
    assert eta[2] == 1.0 and eta.sum() == 1.0


def test_membership_example():
    eta = memberships(17.0, 0.625, B)
    w2 = (1 / 17 - 1 / 25) / (1 / 9 - 1 / 25)
    assert w2 == pytest.approx(0.2647, abs=1e-3)
    assert eta[0] == pytest.approx(0.5 * (1 - w2) * 0.5, abs=1e-12)
    assert eta[0] == pytest.approx(0.18387, abs=1e-3)


def test_vertices_reproduced():
    for i, (v, z2, mu) in enumerate(TS.corners):
        if abs(z2 - 1 / v) < 1e-15:
            A, Bu = reconstruct(TS, v, mu)
            np.testing.assert_allclose(A, TS.A[i], atol=1e-12)


def test_box_midpoint_is_vertex_average():
    # z1 and z2 are independent axes, so the box midpoint is fed through the
    # affine scheduled form rather than a physical speed
    from sharedsteer.ts import scheduled_matrices
    mid = B.box().mean(axis=1)
    A_mid = scheduled_matrices(P, G, *mid)[0]
    np.testing.assert_allclose(A_mid, TS.A.mean(axis=0), atol=1e-12)


def test_exact_reconstruction_grid():
    err = 0.0
    for v in np.linspace(9, 25, 20):
        for mu in np.linspace(0.25, 1, 20):
            A, Bu = reconstruct(TS, v, mu)
            Ad, Bd = direct_model(P, G, v, mu)
            err = max(err, np.abs(A - Ad).max(), np.abs(Bu - Bd).max())
    assert err < 1e-10


@settings(max_examples=300)
@given(st.floats(9, 25), st.floats(0.25, 1))
def test_simplex(v, mu):
    eta = memberships(v, mu, B)
    assert np.all(eta >= 0)
    assert abs(eta.sum() - 1) < 1e-12


def test_out_of_box_inputs_are_clamped_and_counted():
    c = MembershipClamp()
    np.testing.assert_array_equal(memberships(30.0, 1.2, B, c), memberships(25.0, 1.0, B))
    assert c.count == 1


def test_serialization_round_trip():
    text = dumps_ts_model(TS)
    back = loads_ts_model(text)
    assert dumps_ts_model(back) == text
    assert back.fingerprint() == TS.fingerprint()
    np.testing.assert_array_equal(back.A, TS.A)
    other = build_ts_model(P, DriverGains(-25.0, -1.0))
    assert other.fingerprint() != TS.fingerprint()


def test_serialization_rejects_other_documents():
    with pytest.raises(ValueError):
        loads_ts_model('{"format": "something-else", "version": 1}')
