"""SDPA sparse ``.dat-s`` export and import.

SDPA states problems as ``min c^T x  s.t.  sum_i x_i F_i - F0 >= 0``; an
:class:`SdpProblem` block ``F0 + sum_i y_i F_i`` is therefore written with
matrix number 0 holding ``-F0``.
"""
from __future__ import annotations

import re

import numpy as np

from .problem import Block, SdpProblem


def _num(v: float) -> str:
    return format(float(v), ".17g")


def export_sdpa(p: SdpProblem) -> str:
    lines = [str(p.nvars), str(len(p.blocks))]
    lines.append(" ".join(str(-b.size if b.diagonal else b.size) for b in p.blocks))
    lines.append(" ".join(repr(float(c)) for c in p.objective))
    entries = []
    for j, b in enumerate(p.blocks, start=1):
        iu, ju = np.triu_indices(b.size)
        F0 = b.F0
        for i, k in zip(iu, ju):
            if F0[i, k] != 0.0:
                entries.append((0, j, i + 1, k + 1, -F0[i, k]))
        # merge duplicate triplets before writing
        acc: dict[tuple[int, int, int], float] = {}
        for v, r, c, val in zip(b.var, b.row, b.col, b.val):
            key = (int(v), int(r), int(c))
            acc[key] = acc.get(key, 0.0) + float(val)
        for (v, r, c), val in sorted(acc.items()):
            if val != 0.0:
                entries.append((v + 1, j, r + 1, c + 1, val))
    entries.sort(key=lambda e: (e[0], e[1], e[2], e[3]))
    for mat, blk, i, k, val in entries:
        lines.append(f"{mat} {blk} {i} {k} {_num(val)}")
    return "\n".join(lines) + "\n"


def parse_sdpa(text: str) -> SdpProblem:
    rows = []
    for raw in text.splitlines():
        s = raw.strip()
        if not s or s[0] in "\"*":
            continue
        rows.append(s)
    if len(rows) < 4:
        raise ValueError("SDPA text too short")
    tok = lambda s: [t for t in re.split(r"[\s,{}()]+", s) if t]
    nvars = int(tok(rows[0])[0])
    nblocks = int(tok(rows[1])[0])
    sizes = [int(t) for t in tok(rows[2])][:nblocks]
    c = np.array([float(t) for t in tok(rows[3])][:nvars])
    F0s = [np.zeros((abs(s), abs(s))) for s in sizes]
    trip = [([], [], [], []) for _ in sizes]
    for s in rows[4:]:
        t = tok(s)
        mat, blk, i, k = (int(x) for x in t[:4])
        val = float(t[4])
        i, k = min(i, k) - 1, max(i, k) - 1
        if mat == 0:
            F0s[blk - 1][i, k] -= val
            if i != k:
                F0s[blk - 1][k, i] -= val
        else:
            v, r, cc, vv = trip[blk - 1]
            v.append(mat - 1)
            r.append(i)
            cc.append(k)
            vv.append(val)
    blocks = [Block(abs(sz), F0=F0s[j], var=trip[j][0], row=trip[j][1], col=trip[j][2],
                    val=trip[j][3], diagonal=sz < 0) for j, sz in enumerate(sizes)]
    return SdpProblem(nvars, blocks, c)
