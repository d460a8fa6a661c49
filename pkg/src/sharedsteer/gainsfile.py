"""Versioned text format for synthesized gain sets."""

from __future__ import annotations

import json

import numpy as np

from .synthesis import DesignSpec, SynthesisResult
from .ts import dump_json

FORMAT = "sharedsteer.gains"
VERSION = 1
_SLACK = ("X21", "X22", "X23", "X31", "X32", "X33")


class GainsFileError(ValueError):
    """The gains document is malformed or inconsistent."""


def gains_dict(res: SynthesisResult, spec: DesignSpec) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "ts_fingerprint": res.fingerprint,
        "design": {
            "u_max": list(spec.u_max), "rho": spec.rho, "R": [list(r) for r in spec.R],
            "h_rows": [list(h) for h in spec.h_rows], "eps": spec.eps, "objective": spec.objective,
        },
        "tau_1": res.tau_1, "tau_2": res.tau_2, "gamma": res.gamma,
        "K": res.K, "X": res.X, "V": res.V, "W": res.W, "S": res.S,
        "slack": {k: res.slack[k] for k in _SLACK},
    }


def dumps_gains(res: SynthesisResult, spec: DesignSpec) -> str:
    return dump_json(gains_dict(res, spec))


def loads_gains(text: str) -> tuple:
    """Parse a gains document into ``(SynthesisResult, DesignSpec)``."""
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GainsFileError(f"gains file is not valid JSON: {exc}") from exc
    if not isinstance(d, dict) or d.get("format") != FORMAT or d.get("version") != VERSION:
        raise GainsFileError("not a version-1 gains document")
    try:
        des = d["design"]
        spec = DesignSpec(
            u_max=tuple(float(u) for u in des["u_max"]), tau_1=float(d["tau_1"]), rho=float(des["rho"]),
            R=tuple(tuple(float(v) for v in r) for r in des["R"]),
            h_rows=tuple(tuple(float(v) for v in h) for h in des["h_rows"]),
            eps=float(des["eps"]), objective=des["objective"],
        )
        arr = {k: np.array(d[k], dtype=float) for k in ("K", "X", "V", "W", "S")}
        slack = {k: np.array(d["slack"][k], dtype=float) for k in _SLACK}
        res = SynthesisResult(
            X=arr["X"], V=arr["V"], W=arr["W"], S=arr["S"], slack=slack,
            tau_1=float(d["tau_1"]), tau_2=float(d["tau_2"]), gamma=float(d["gamma"]),
            K=arr["K"], fingerprint=str(d["ts_fingerprint"]), u_max=spec.u_max,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise GainsFileError(f"gains file is incomplete or malformed: {exc}") from exc
    r = res.K.shape[0]
    n = res.X.shape[0]
    if res.X.shape != (n, n) or res.K.ndim != 3 or res.K.shape[2] != n or res.V.shape != res.K.shape:
        raise GainsFileError("gains file has inconsistent matrix shapes")
    if res.W.shape != res.K.shape or res.S.shape[0] != r:
        raise GainsFileError("gains file has inconsistent per-rule blocks")
    scalars = np.array([res.tau_1, res.tau_2, res.gamma])
    if not all(np.all(np.isfinite(a)) for a in (res.X, res.K, res.V, res.W, res.S, scalars)):
        raise GainsFileError("gains file contains non-finite numbers")
    return res, spec
