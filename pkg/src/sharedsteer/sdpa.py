"""Sparse SDPA (``.dat-s``) export and import.

SDPA states ``min c @ x`` subject to ``sum_i F_i x_i - F_0 >= 0``; the
package form ``F0 + sum y_j F_j >= 0`` therefore exports ``F_0 = -F0``.
Entries are written upper-triangle only, sorted by matrix, block, row and
column, with 17 significant digits, so exporting an imported export
reproduces the same bytes.
"""

from __future__ import annotations

import re

import numpy as np

from .sdp import LmiBlock, SdpProblem


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def export_sdpa(problem: SdpProblem) -> str:
    problem.validate()
    lines = [
        f"{problem.m} = mDIM",
        f"{len(problem.blocks)} = nBLOCK",
        " ".join(str(b.size) for b in problem.blocks),
    ]
    c = np.zeros(problem.m) if problem.c is None else np.asarray(problem.c, dtype=float)
    lines.append(" ".join(_fmt(v) for v in c) if problem.m else "")
    entries = []
    for k, b in enumerate(problem.blocks, start=1):
        mats = [(0, -b.F0)] + [(int(j) + 1, F) for j, F in zip(b.idx, b.F)]
        for matno, F in mats:
            rows, cols = np.triu_indices(b.size)
            for i, j in zip(rows, cols):
                v = F[i, j]
                if v != 0.0:
                    entries.append((matno, k, i + 1, j + 1, v))
    entries.sort(key=lambda e: e[:4])
    lines += [f"{a} {b} {i} {j} {_fmt(v)}" for a, b, i, j, v in entries]
    return "\n".join(lines) + "\n"


def import_sdpa(text: str) -> SdpProblem:
    """Parse sparse SDPA text; raises ``ValueError`` on malformed input."""
    try:
        return _parse(text)
    except (IndexError, ValueError, KeyError) as exc:
        raise ValueError(f"malformed SDPA input: {exc}") from exc


def _parse(text: str) -> SdpProblem:
    raw = [ln.split("*")[0].split('"')[0].strip() for ln in text.splitlines()]
    raw = [ln for ln in raw if ln]
    tok = lambda s: [t for t in re.split(r"[\s,{}()=]+", s) if t]
    m = int(tok(raw[0])[0])
    nblock = int(tok(raw[1])[0])
    sizes = [int(t) for t in tok(raw[2])[:nblock]]
    pos = 3
    cvals: list[float] = []
    while len(cvals) < m:
        cvals += [float(t) for t in tok(raw[pos])]
        pos += 1
    if m == 0:
        pos += 1 if pos < len(raw) and not tok(raw[pos]) else 0
    dense = [np.zeros((m + 1, abs(n), abs(n))) for n in sizes]
    used = [set() for _ in sizes]
    for ln in raw[pos:]:
        parts = tok(ln)
        matno, blk, i, j = (int(t) for t in parts[:4])
        v = float(parts[4])
        M = dense[blk - 1][matno]
        M[i - 1, j - 1] = v
        M[j - 1, i - 1] = v
        if matno:
            used[blk - 1].add(matno - 1)
    blocks = []
    for k, D in enumerate(dense):
        idx = np.array(sorted(used[k]), dtype=int)
        blocks.append(LmiBlock(-D[0], idx, D[idx + 1] if len(idx) else np.zeros((0,) + D.shape[1:])))
    c = np.array(cvals[:m])
    return SdpProblem(m=m, blocks=blocks, c=c if np.any(c) else None)
