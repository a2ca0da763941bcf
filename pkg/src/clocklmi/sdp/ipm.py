"""Primal-dual path-following interior-point method for block LMIs.

Solves ``min c^T y  s.t.  S = F0 + sum_i y_i F_i >= 0`` together with its dual
``max -<F0, Z>  s.t.  <F_i, Z> = c_i, Z >= 0`` from an infeasible start.
Search directions use Nesterov-Todd scaling and a Mehrotra
predictor-corrector; the Schur complement is assembled densely.

Feasibility problems are turned into margin maximization: every block gets
``-t I``, the objective is ``-t``, and ``t <= margin_cap`` together with
``|y_i| <= var_bound`` keep the problem compact so both sides stay strictly
feasible.
"""
from __future__ import annotations

import logging
import math

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .problem import SdpProblem, SdpSolution, SolverOptions, Status, block_min_eig

log = logging.getLogger(__name__)


_DENSE_LIMIT = 20000


class _NumericalFailure(Exception):
    pass


class _Cone:
    """Internal conic data: PSD blocks plus one block of scalar inequalities."""

    def __init__(self, m, c):
        self.m = m
        self.c = np.asarray(c, dtype=float)
        self.psd = []  # (k, F0, Fsp_local (m_loc x k^2), idx)
        self.lp_G = None
        self.lp_h = None

    def add_psd(self, k, F0, Fsp, idx):
        # tiny blocks are cheaper as dense arrays than as scipy sparse matrices
        if idx.size * k * k <= _DENSE_LIMIT:
            Fsp = Fsp.toarray()
        self.psd.append((k, F0, Fsp, idx))

    # S = F0 + A(y)
    def slack(self, y):
        out = []
        for k, F0, Fsp, idx in self.psd:
            v = Fsp.T @ y[idx]
            out.append(F0 + v.reshape(k, k))
        s_lp = self.lp_h + self.lp_G @ y
        return out, s_lp

    def apply(self, dy):
        out = []
        for k, F0, Fsp, idx in self.psd:
            out.append((Fsp.T @ dy[idx]).reshape(k, k))
        return out, self.lp_G @ dy

    def adjoint(self, mats, v_lp):
        g = np.zeros(self.m)
        for (k, F0, Fsp, idx), Z in zip(self.psd, mats):
            g[idx] += Fsp @ Z.ravel()
        g += self.lp_G.T @ v_lp
        return g


def _build_cone(p: SdpProblem, opts: SolverOptions, feasibility: bool) -> _Cone:
    n = p.nvars
    m = n + 1 if feasibility else n
    c = np.zeros(m)
    if feasibility:
        c[n] = -1.0
    else:
        c[:n] = p.objective
    cone = _Cone(m, c)
    lp_rows, lp_cols, lp_vals, lp_h = [], [], [], []
    r = 0
    for b in p.blocks:
        k = b.size
        if b.diagonal:
            diag = np.diag(b.F0)
            for i in range(k):
                lp_h.append(diag[i])
            lp_rows.extend((b.row + r).tolist())
            lp_cols.extend(b.var.tolist())
            lp_vals.extend(b.val.tolist())
            if feasibility:
                lp_rows.extend(range(r, r + k))
                lp_cols.extend([n] * k)
                lp_vals.extend([-1.0] * k)
            r += k
            continue
        idx = b.variables()
        if feasibility:
            idx = np.append(idx, n)
        local = np.full(m, -1, dtype=np.int64)
        local[idx] = np.arange(idx.size)
        off = b.row != b.col
        rows = np.concatenate([local[b.var], local[b.var[off]]])
        cols = np.concatenate([b.row * k + b.col, b.col[off] * k + b.row[off]])
        vals = np.concatenate([b.val, b.val[off]])
        if feasibility:
            rows = np.concatenate([rows, np.full(k, idx.size - 1)])
            cols = np.concatenate([cols, np.arange(k) * (k + 1)])
            vals = np.concatenate([vals, -np.ones(k)])
        Fsp = sp.csr_matrix((vals, (rows, cols)), shape=(idx.size, k * k))
        cone.add_psd(k, b.F0.copy(), Fsp, idx)
    # box on y and cap on the margin
    R = opts.var_bound
    if R and np.isfinite(R):
        for i in range(n):
            lp_rows += [r, r + 1]
            lp_cols += [i, i]
            lp_vals += [-1.0, 1.0]
            lp_h += [R, R]
            r += 2
    if feasibility:
        lp_rows.append(r)
        lp_cols.append(n)
        lp_vals.append(-1.0)
        lp_h.append(opts.margin_cap)
        r += 1
    cone.lp_G = sp.csr_matrix((lp_vals, (lp_rows, lp_cols)), shape=(r, m))
    if r * m <= _DENSE_LIMIT:
        cone.lp_G = cone.lp_G.toarray()
    cone.lp_h = np.asarray(lp_h, dtype=float)
    return cone


def _nt_scaling(S, Z):
    """Return ``(R, lam)`` with ``R^T Z R = R^{-1} S R^{-T} = diag(lam)``."""
    try:
        Ls = np.linalg.cholesky(S)
        Lz = np.linalg.cholesky(Z)
    except np.linalg.LinAlgError as exc:
        raise _NumericalFailure("iterate left the cone") from exc
    U, lam, Vt = np.linalg.svd(Lz.T @ Ls)
    if lam.min() <= 0:
        raise _NumericalFailure("degenerate scaling")
    R = Ls @ Vt.T / np.sqrt(lam)
    return R, lam


def _max_step(lam, d):
    """Largest ``a`` with ``diag(lam) + a d >= 0`` (``d`` in scaled coordinates)."""
    s = 1.0 / np.sqrt(lam)
    e = np.linalg.eigvalsh(s[:, None] * d * s[None, :])[0]
    return math.inf if e >= 0 else -1.0 / e


def _max_step_lp(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return math.inf
    return float(np.min(-v[neg] / dv[neg]))


def _schur(cone, Rinvs, w2inv_lp):
    M = np.zeros((cone.m, cone.m))
    for (k, F0, Fsp, idx), Rinv in zip(cone.psd, Rinvs):
        Winv = Rinv.T @ Rinv
        if k <= 40:
            K = np.kron(Winv, Winv)
            T = np.asarray(Fsp @ K)
        else:
            dense = (Fsp if isinstance(Fsp, np.ndarray) else Fsp.toarray()).reshape(-1, k, k)
            T = (Winv @ dense @ Winv).reshape(-1, k * k)
        Mloc = np.asarray(Fsp @ T.T)
        M[np.ix_(idx, idx)] += Mloc
    G = cone.lp_G
    if isinstance(G, np.ndarray):
        M += G.T @ (w2inv_lp[:, None] * G)
    else:
        M += np.asarray((G.T @ sp.diags(w2inv_lp) @ G).todense())
    return M


def _arrow_partition(p: SdpProblem, cone: _Cone):
    """Private variable groups (in cone indexing) and the shared rest, or ``None``.

    With every group confined to its own blocks the Schur matrix is block
    diagonal apart from the shared rows and columns, and a block-arrow
    Cholesky avoids factoring it as one dense matrix.
    """
    if not p.groups:
        return None
    gid = np.full(cone.m, -1, dtype=np.int64)
    for g, v in enumerate(p.groups):
        v = np.asarray(v, dtype=np.int64)
        if v.size and np.any(gid[v] >= 0):
            return None
        gid[v] = g
    for _, _, _, idx in cone.psd:
        ids = gid[idx]
        ids = ids[ids >= 0]
        if ids.size and np.any(ids != ids[0]):
            return None
    G = sp.coo_matrix(cone.lp_G)
    owner = gid[G.col]
    keep = owner >= 0
    pairs = np.unique(np.stack([G.row[keep], owner[keep]]), axis=1)
    if pairs.size and np.unique(pairs[0]).size != pairs.shape[1]:
        return None
    groups = [np.flatnonzero(gid == g) for g in range(len(p.groups))]
    groups = [g for g in groups if g.size]
    shared = np.flatnonzero(gid < 0)
    if not groups:
        return None
    return groups, shared


class _SchurFactor:
    """Cholesky factor of the diagonally scaled Schur matrix, dense or block-arrow."""

    def __init__(self, M, opts, arrow=None):
        # only the lower triangle of each diagonal block is read by the factorizations
        d = np.diag(M).copy()
        d[d <= 0] = 1.0
        self.scale = 1.0 / np.sqrt(d)
        self.arrow = arrow
        if arrow is None:
            Ms = M * self.scale[:, None] * self.scale[None, :]
        else:
            M *= self.scale[:, None]
            M *= self.scale[None, :]
            Ms = M
        for reg in (0.0, 1e-14, 1e-12, 1e-10):
            try:
                diag = self._dense(Ms, reg) if arrow is None else self._arrow(Ms, reg)
            except la.LinAlgError:
                continue
            cond = (diag.max() / diag.min()) ** 2 if diag.min() > 0 else math.inf
            if cond > opts.cond_limit:
                raise _NumericalFailure(f"Schur complement condition estimate {cond:.2e}")
            return
        raise _NumericalFailure("Schur complement not positive definite")

    def _dense(self, Ms, reg):
        if reg:
            Ms = Ms + reg * np.eye(Ms.shape[0])
        self.cf = la.cho_factor(Ms, lower=True, check_finite=False)
        return np.abs(np.diag(self.cf[0]))

    def _arrow(self, Ms, reg):
        groups, shared = self.arrow
        C = Ms[np.ix_(shared, shared)]
        self.parts = []
        diags = []
        for g in groups:
            Mg = Ms[np.ix_(g, g)]
            if reg:
                Mg = Mg + reg * np.eye(g.size)
            L = la.cholesky(Mg, lower=True, check_finite=False)
            W = la.solve_triangular(L, Ms[np.ix_(g, shared)], lower=True, check_finite=False)
            C -= W.T @ W
            self.parts.append((g, L, W))
            diags.append(np.diag(L))
        if reg:
            C = C + reg * np.eye(shared.size)
        self.Lc = la.cholesky(C, lower=True, check_finite=False)
        diags.append(np.diag(self.Lc))
        return np.abs(np.concatenate(diags))

    def solve(self, rhs):
        b = self.scale * rhs
        if self.arrow is None:
            return self.scale * la.cho_solve(self.cf, b, check_finite=False)
        _, shared = self.arrow
        bs = b[shared].copy()
        zs = []
        for g, L, W in self.parts:
            z = la.solve_triangular(L, b[g], lower=True, check_finite=False)
            bs -= W.T @ z
            zs.append(z)
        x = np.empty_like(b)
        xs = la.cho_solve((self.Lc, True), bs, check_finite=False)
        x[shared] = xs
        for (g, L, W), z in zip(self.parts, zs):
            x[g] = la.solve_triangular(L, z - W @ xs, lower=True, trans="T", check_finite=False)
        return self.scale * x


def solve_ipm(p: SdpProblem, opts: SolverOptions) -> SdpSolution:
    feasibility = p.is_feasibility
    cone = _build_cone(p, opts, feasibility)
    n, m = p.nvars, cone.m
    nb = len(cone.psd)
    nlp = cone.lp_h.size
    nu = sum(k for k, *_ in cone.psd) + nlp
    orig_blocks = p.blocks
    arrow = _arrow_partition(p, cone)

    # starting point: bound rows begin at their exact slack, balanced to mu = zeta^2
    scale0 = max(1.0, max((np.abs(F0).max() for _, F0, _, _ in cone.psd), default=0.0))
    zeta = 10.0 * math.sqrt(scale0)
    y = np.zeros(m)
    S = [zeta * np.eye(k) for k, *_ in cone.psd]
    Z = [zeta * np.eye(k) for k, *_ in cone.psd]
    s_lp = np.where(cone.lp_h > zeta, cone.lp_h, zeta)
    z_lp = zeta ** 2 / s_lp

    normF0 = 1.0 + math.sqrt(sum(np.sum(F0 ** 2) for _, F0, _, _ in cone.psd) + np.sum(cone.lp_h ** 2))
    normc = 1.0 + np.linalg.norm(cone.c)

    def true_margin(yv):
        return min((block_min_eig(b.evaluate(yv[:n]), b.diagonal) for b in orig_blocks),
                   default=math.inf)

    status = Status.MAX_ITERATIONS
    message = ""
    it = 0
    for it in range(1, opts.max_iter + 1):
        Sy, s_lp_y = cone.slack(y)
        Rp = [a - b for a, b in zip(Sy, S)]
        rp_lp = s_lp_y - s_lp
        rd = cone.adjoint(Z, z_lp) - cone.c
        gap = sum(np.vdot(a, b) for a, b in zip(S, Z)) + s_lp @ z_lp
        mu = gap / nu
        pobj = cone.c @ y
        dobj = -sum(np.vdot(F0, Zj) for (_, F0, _, _), Zj in zip(cone.psd, Z)) - cone.lp_h @ z_lp
        pres = math.sqrt(sum(np.sum(a ** 2) for a in Rp) + rp_lp @ rp_lp) / normF0
        dres = np.linalg.norm(rd) / normc
        relgap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        if opts.verbose:
            log.info("it %3d pobj %+.6e dobj %+.6e pres %.1e dres %.1e gap %.1e",
                     it, pobj, dobj, pres, dres, relgap)

        if feasibility and opts.early_exit:
            if y[n] > 0 and pres < 1e-6 and true_margin(y) > 0:
                status = Status.FEASIBLE
                message = "strictly feasible point found"
                break
            # weak duality bound on the margin, valid inside the box
            slack = opts.var_bound * np.sum(np.abs(rd[:n])) + opts.margin_cap * abs(rd[n])
            if -dobj + slack < -opts.feas_tol and dres < 1e-6:
                status = Status.INFEASIBLE
                message = "dual bound certifies negative margin"
                break
        if pres < opts.feas_tol and dres < opts.feas_tol and relgap < opts.gap_tol:
            status = Status.FEASIBLE if not feasibility or y[n] > 0 else Status.INFEASIBLE
            message = "converged"
            break

        try:
            scal = [_nt_scaling(Si, Zi) for Si, Zi in zip(S, Z)]
            Rinvs = [np.linalg.inv(R) for R, _ in scal]
            w2inv = z_lp / s_lp
            fac = _SchurFactor(_schur(cone, Rinvs, w2inv), opts, arrow)
        except (_NumericalFailure, np.linalg.LinAlgError) as exc:
            status = Status.NUMERICAL_FAILURE
            message = str(exc)
            break

        lam_lp = np.sqrt(s_lp * z_lp)
        w_lp = np.sqrt(s_lp / z_lp)

        def direction(Gam, gam_lp):
            # Gam: scaled-space targets for dS~ + dZ~ per block
            rhs = rd.copy()
            mats = []
            for (R, lam), Rinv, G_, Rpj in zip(scal, Rinvs, Gam, Rp):
                Winv = Rinv.T @ Rinv
                mats.append(Rinv.T @ G_ @ Rinv - Winv @ Rpj @ Winv)
            rhs += cone.adjoint(mats, gam_lp / w_lp - w2inv * rp_lp)
            dy = fac.solve(rhs)
            AdS, Ad_lp = cone.apply(dy)
            dS = [a + b for a, b in zip(AdS, Rp)]
            ds_lp = Ad_lp + rp_lp
            dZ = []
            for (R, lam), Rinv, G_, dSj in zip(scal, Rinvs, Gam, dS):
                Winv = Rinv.T @ Rinv
                dz = Rinv.T @ G_ @ Rinv - Winv @ dSj @ Winv
                dZ.append(0.5 * (dz + dz.T))
            dz_lp = gam_lp / w_lp - w2inv * ds_lp
            return dy, dS, dZ, ds_lp, dz_lp

        def steps(dS, dZ, ds_lp, dz_lp):
            ap, ad = math.inf, math.inf
            for (R, lam), Rinv, dSj, dZj in zip(scal, Rinvs, dS, dZ):
                ap = min(ap, _max_step(lam, Rinv @ dSj @ Rinv.T))
                ad = min(ad, _max_step(lam, R.T @ dZj @ R))
            ap = min(ap, _max_step_lp(s_lp, ds_lp))
            ad = min(ad, _max_step_lp(z_lp, dz_lp))
            return ap, ad

        # predictor
        Gam_a = [-np.diag(lam) for _, lam in scal]
        try:
            dy, dS, dZ, ds_lp, dz_lp = direction(Gam_a, -lam_lp)
            ap, ad = steps(dS, dZ, ds_lp, dz_lp)
        except np.linalg.LinAlgError as exc:
            status, message = Status.NUMERICAL_FAILURE, str(exc)
            break
        ap, ad = min(1.0, ap), min(1.0, ad)
        gap_a = sum(np.vdot(Si + ap * a, Zi + ad * b) for Si, Zi, a, b in zip(S, Z, dS, dZ))
        gap_a += (s_lp + ap * ds_lp) @ (z_lp + ad * dz_lp)
        sigma = min(1.0, max(0.0, gap_a / gap)) ** 3 if gap > 0 else 0.0

        # corrector
        Gam_c = []
        for (R, lam), Rinv, dSj, dZj in zip(scal, Rinvs, dS, dZ):
            ds_t = Rinv @ dSj @ Rinv.T
            dz_t = R.T @ dZj @ R
            prod = 0.5 * (ds_t @ dz_t + dz_t @ ds_t)
            rhs = sigma * mu * np.eye(lam.size) - np.diag(lam ** 2) - prod
            Gam_c.append(rhs / (0.5 * (lam[:, None] + lam[None, :])))
        rhs_lp = sigma * mu - lam_lp ** 2 - (ds_lp / w_lp) * (dz_lp * w_lp)
        try:
            dy, dS, dZ, ds_lp, dz_lp = direction(Gam_c, rhs_lp / lam_lp)
            ap, ad = steps(dS, dZ, ds_lp, dz_lp)
        except np.linalg.LinAlgError as exc:
            status, message = Status.NUMERICAL_FAILURE, str(exc)
            break
        ap = min(1.0, opts.step_fraction * ap)
        ad = min(1.0, opts.step_fraction * ad)

        y = y + ap * dy
        S = [Si + ap * d for Si, d in zip(S, dS)]
        S = [0.5 * (Si + Si.T) for Si in S]
        s_lp = s_lp + ap * ds_lp
        Z = [Zi + ad * d for Zi, d in zip(Z, dZ)]
        s_lp = np.maximum(s_lp, 1e-300)
        z_lp = np.maximum(z_lp + ad * dz_lp, 1e-300)
        if not (np.all(np.isfinite(y)) and all(np.all(np.isfinite(Si)) for Si in S)):
            status, message = Status.NUMERICAL_FAILURE, "non-finite iterate"
            break

    yv = y[:n].copy()
    residuals = [block_min_eig(b.evaluate(yv), b.diagonal) for b in orig_blocks]
    margin = min(residuals, default=math.inf)
    if feasibility:
        if status in (Status.MAX_ITERATIONS, Status.NUMERICAL_FAILURE) and margin > 0:
            status, message = Status.FEASIBLE, f"strictly feasible iterate ({message or status})"
        if status is Status.FEASIBLE and margin < -opts.feas_tol:
            status, message = Status.INFEASIBLE, f"final margin {margin:.3e}"
    sol = SdpSolution(y=yv, status=status, residuals=residuals, iterations=it,
                      margin=margin, message=message)
    if status is Status.INFEASIBLE:
        _attach_certificate(sol, p, cone, Z, z_lp)
    return sol


def _attach_certificate(sol, p, cone, Z, z_lp):
    """Normalized dual matrices of the original blocks and their residual ``|<F_i, Z>|``."""
    mats = []
    lp_pos = 0
    psd_iter = iter(Z)
    for b in p.blocks:
        if b.diagonal:
            mats.append(np.diag(z_lp[lp_pos:lp_pos + b.size]))
            lp_pos += b.size
        else:
            mats.append(next(psd_iter))
    tr = sum(np.trace(M) for M in mats)
    if tr <= 0:
        return
    mats = [M / tr for M in mats]
    g = np.zeros(p.nvars)
    for b, M in zip(p.blocks, mats):
        off = b.row != b.col
        contrib = b.val * M[b.row, b.col] * np.where(off, 2.0, 1.0)
        np.add.at(g, b.var, contrib)
    sol.dual = mats
    sol.dual_residual = float(np.max(np.abs(g))) if g.size else 0.0
