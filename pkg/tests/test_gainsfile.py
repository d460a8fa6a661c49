import json

import numpy as np
import pytest

from conftest import scalar_model
from sharedsteer.gainsfile import GainsFileError, dumps_gains, loads_gains
from sharedsteer.synthesis import DesignSpec, synthesize

SPEC = DesignSpec(u_max=(1.0,), tau_1=0.1, rho=1.0, R=((1.0,),), h_rows=((0.5,),), objective="feasibility")


@pytest.fixture(scope="module")
def doc():
    res = synthesize(scalar_model(-1.0), SPEC)
    return res, dumps_gains(res, SPEC)


def test_round_trip_is_exact(doc):
    res, text = doc
    back, spec = loads_gains(text)
    for name in ("X", "K", "V", "W", "S"):
        np.testing.assert_array_equal(getattr(back, name), getattr(res, name))
    for k, v in back.slack.items():
        np.testing.assert_array_equal(v, res.slack[k])
    assert (back.tau_1, back.tau_2, back.gamma) == (res.tau_1, res.tau_2, res.gamma)
    assert back.fingerprint == res.fingerprint
    assert spec.h_rows == SPEC.h_rows and spec.R == SPEC.R and spec.u_max == SPEC.u_max
    assert dumps_gains(back, spec) == text


def _edit(text, fn):
    d = json.loads(text)
    fn(d)
    return json.dumps(d)


@pytest.mark.parametrize("mutate", [
    lambda t: t[: len(t) // 2],
    lambda t: "[]",
    lambda t: _edit(t, lambda d: d.update(version=2)),
    lambda t: _edit(t, lambda d: d.update(format="other")),
    lambda t: _edit(t, lambda d: d.pop("X")),
    lambda t: _edit(t, lambda d: d["design"].pop("R")),
    lambda t: _edit(t, lambda d: d.update(K=[[[1.0, 2.0]]])),
    lambda t: _edit(t, lambda d: d.update(K="abc")),
    lambda t: t.replace('"tau_2": ', '"tau_2": NaN, "_": ', 1),
])
def test_corrupted_documents_rejected(doc, mutate):
    with pytest.raises(GainsFileError):
        loads_gains(mutate(doc[1]))


def test_non_finite_matrix_rejected(doc):
    text = _edit(doc[1], lambda d: d.update(X=[[float("inf")]]))
    with pytest.raises(GainsFileError):
        loads_gains(text)
