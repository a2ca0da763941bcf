"""Same margin-maximization problem handed to CVXOPT's conic solver.

Used as an external cross-check of the bundled interior-point method.
"""
from __future__ import annotations

import numpy as np

from .problem import SdpProblem, SdpSolution, SolverOptions, Status, block_min_eig


def solve_cvxopt(p: SdpProblem, opts: SolverOptions) -> SdpSolution:
    import cvxopt
    from cvxopt import matrix, solvers, spmatrix

    n = p.nvars
    feas = p.is_feasibility
    m = n + 1 if feas else n
    c = np.zeros(m)
    if feas:
        c[n] = -1.0
    else:
        c[:n] = p.objective
    Gl_rows, Gl_cols, Gl_vals, hl = [], [], [], []
    Gs, hs = [], []
    r = 0
    for b in p.blocks:
        k = b.size
        if b.diagonal:
            d = np.diag(b.F0)
            hl.extend(d.tolist())
            Gl_rows.extend((b.row + r).tolist())
            Gl_cols.extend(b.var.tolist())
            Gl_vals.extend((-b.val).tolist())
            if feas:
                Gl_rows.extend(range(r, r + k))
                Gl_cols.extend([n] * k)
                Gl_vals.extend([1.0] * k)
            r += k
            continue
        off = b.row != b.col
        # cvxopt stores column-major vec(S); both triangles are given
        rows = np.concatenate([b.col * k + b.row, (b.row * k + b.col)[off]])
        cols = np.concatenate([b.var, b.var[off]])
        vals = -np.concatenate([b.val, b.val[off]])
        if feas:
            rows = np.concatenate([rows, np.arange(k) * (k + 1)])
            cols = np.concatenate([cols, np.full(k, n)])
            vals = np.concatenate([vals, np.ones(k)])
        Gs.append(spmatrix(vals.tolist(), rows.tolist(), cols.tolist(), (k * k, m)))
        hs.append(matrix(b.F0.T.copy()))
    R = opts.var_bound
    for i in range(n):
        Gl_rows += [r, r + 1]
        Gl_cols += [i, i]
        Gl_vals += [1.0, -1.0]
        hl += [R, R]
        r += 2
    if feas:
        Gl_rows.append(r)
        Gl_cols.append(n)
        Gl_vals.append(1.0)
        hl.append(opts.margin_cap)
        r += 1
    Gl = spmatrix(Gl_vals, Gl_rows, Gl_cols, (r, m))
    solvers.options.update({"show_progress": bool(opts.verbose), "maxiters": opts.max_iter,
                            "abstol": 1e-9, "reltol": 1e-9, "feastol": 1e-9})
    res = solvers.sdp(matrix(c), Gl=Gl, hl=matrix(hl), Gs=Gs, hs=hs)
    x = res["x"]
    y = np.zeros(n) if x is None else np.array(x).ravel()[:n]
    residuals = [block_min_eig(b.evaluate(y), b.diagonal) for b in p.blocks]
    margin = min(residuals, default=float("inf"))
    if res["status"] == "optimal" or margin > 0:
        status = Status.FEASIBLE if margin > -opts.feas_tol and (not feas or margin > 0) \
            else Status.INFEASIBLE
    else:
        status = Status.MAX_ITERATIONS
    return SdpSolution(y=y, status=status, residuals=residuals,
                       iterations=int(res.get("iterations", 0)), margin=margin,
                       message=f"cvxopt: {res['status']}")

