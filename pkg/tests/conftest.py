import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from sharedsteer.synthesis import DesignSpec, synthesize  # noqa: E402
from sharedsteer.ts import SchedulingBounds, TsModel, build_ts_model  # noqa: E402

# reduced design wind for which the steering problem is feasible (the
# 1200 N design is not; see the acceptance suite)
DEMO_WIND = 100.0
DEMO_TAU1 = 0.6


def scalar_model(a, bu=1.0, bw=1.0, c=1.0):
    return TsModel(
        A=np.array([[[a]]]), Bu=np.array([[[bu]]]), Bw=np.array([[[bw]]]), C=np.array([[[c]]]),
        bounds=SchedulingBounds(), corners=np.zeros((1, 3)),
    )


@pytest.fixture(scope="session")
def dsas_model():
    return build_ts_model()


@pytest.fixture(scope="session")
def demo_spec():
    return DesignSpec.dsas(f_w_max=DEMO_WIND, tau_1=DEMO_TAU1, objective="feasibility")


@pytest.fixture(scope="session")
def demo_certificate(dsas_model, demo_spec):
    """Certified gains for the steering model at the reduced design wind."""
    return synthesize(dsas_model, demo_spec)


def stub_result(ts, K=None, u_max=15.0):
    """Gain set without a certificate, for exercising the simulator alone."""
    from sharedsteer.synthesis import SynthesisResult

    r, n = ts.r, ts.n_x
    K = np.zeros((r, 1, n)) if K is None else np.broadcast_to(np.asarray(K, dtype=float), (r, 1, n)).copy()
    return SynthesisResult(
        X=np.eye(n), V=K.copy(), W=np.zeros_like(K), S=np.ones((r, 1, 1)), slack={},
        tau_1=0.1, tau_2=0.1, gamma=1.0, K=K, fingerprint=ts.fingerprint(), u_max=(u_max,),
    )


# acceptance verdicts, printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        passed, title, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if passed else 'FAIL'}  {title}  ({detail})")
