"""Small dense primal-dual interior-point solver for block SDPs.

Standard form, with symmetric PSD blocks ``X_b`` and a nonnegative vector
``x``::

    minimize    sum_b <C_b, X_b> + c . x
    subject to  sum_b <A_mb, X_b> + a_m . x = b_m,    m = 1..M
                X_b >= 0,  x >= 0

and its dual ``max b . y`` with ``Z_b = C_b - sum_m y_m A_mb >= 0``,
``z = c - A_lp^T y >= 0``. Search directions are HKM with a Mehrotra
predictor-corrector; every factorization is dense.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_ITER = 200
STEP_FRACTION = 0.98


@dataclass
class SdpData:
    C: list  # per block, (n_b, n_b)
    A: list  # per block, (M, n_b, n_b)
    c: np.ndarray  # (n_l,)
    A_lp: np.ndarray  # (M, n_l)
    b: np.ndarray  # (M,)


@dataclass
class IpmResult:
    status: str
    X: list
    x: np.ndarray
    y: np.ndarray
    Z: list
    z: np.ndarray
    primal_objective: float
    dual_objective: float
    iterations: int
    residuals: dict = field(default_factory=dict)


def _apply_A(data, X, x):
    out = data.A_lp @ x
    for A_b, X_b in zip(data.A, X):
        out = out + np.einsum("mij,ij->m", A_b, X_b)
    return out


def _apply_AT(data, y):
    return [np.einsum("m,mij->ij", y, A_b) for A_b in data.A], data.A_lp.T @ y


def _sym(m):
    return 0.5 * (m + m.T)


def _average(M, J):
    return M if J is None else 0.5 * (M + J @ M @ J.T)


def _max_step(X, dX):
    """Largest ``a <= 1`` with ``X + a dX`` PSD (before the safety fraction)."""
    L = np.linalg.cholesky(X)
    Li = np.linalg.inv(L)
    lam = np.linalg.eigvalsh(_sym(Li @ dX @ Li.T)).min()
    return 1.0 if lam >= -1.0 else -1.0 / lam


def _max_step_lp(x, dx):
    neg = dx < 0
    if not np.any(neg):
        return 1.0
    return min(1.0, float(np.min(-x[neg] / dx[neg])))


def _residuals(data, X, x, y, Z, z):
    ATy, ATy_lp = _apply_AT(data, y)
    rp = data.b - _apply_A(data, X, x)
    rd = [C - a - Zb for C, a, Zb in zip(data.C, ATy, Z)]
    rd_lp = data.c - ATy_lp - z
    pobj = sum(float(np.sum(C * Xb)) for C, Xb in zip(data.C, X)) + float(data.c @ x)
    dobj = float(data.b @ y)
    gap = sum(float(np.sum(Xb * Zb)) for Xb, Zb in zip(X, Z)) + float(x @ z)
    c_norm = np.sqrt(sum(np.sum(C * C) for C in data.C) + data.c @ data.c)
    d_norm = np.sqrt(sum(np.sum(r * r) for r in rd) + rd_lp @ rd_lp)
    res = {
        "primal": float(np.linalg.norm(rp) / (1.0 + np.linalg.norm(data.b))),
        "dual": float(d_norm / (1.0 + c_norm)),
        "complementarity": float(abs(gap) / (1.0 + abs(pobj) + abs(dobj))),
    }
    return rp, rd, rd_lp, pobj, dobj, gap, res


def solve(data: SdpData, tol: float = 1e-9, accept: float = 1e-8,
          max_iter: int = MAX_ITER, symmetry=None) -> IpmResult:
    """Run the interior-point method.

    Iterates stop once every relative residual is below ``tol``. Near a
    rank-deficient optimum the Newton systems get ill-conditioned and the
    residuals can start growing again; the best iterate seen is kept and
    reported as optimal when its residuals are below ``accept``.

    ``symmetry`` optionally gives, per block, an orthogonal ``J`` (or None)
    under which the data are invariant; iterates are averaged with their
    ``J``-conjugates after every step to stop drift off the invariant set.
    """
    sizes = [C.shape[0] for C in data.C]
    n_l = data.c.shape[0]
    nu = sum(sizes) + n_l
    a_norms = [np.sqrt(sum(np.sum(A_b[m] ** 2) for A_b in data.A) + data.A_lp[m] @ data.A_lp[m])
               for m in range(data.b.shape[0])]
    c_norm = np.sqrt(sum(np.sum(C * C) for C in data.C) + data.c @ data.c)
    xi = max(10.0, np.sqrt(nu), max((1.0 + abs(bm)) / (1.0 + an) for bm, an in zip(data.b, a_norms)))
    eta = max(10.0, np.sqrt(nu), max(a_norms), c_norm)
    X = [xi * np.eye(n) for n in sizes]
    Z = [eta * np.eye(n) for n in sizes]
    x = xi * np.ones(n_l)
    z = eta * np.ones(n_l)
    y = np.zeros(data.b.shape[0])

    it = 0
    best = None
    stalled = 0
    while True:
        rp, rd, rd_lp, pobj, dobj, gap, res = _residuals(data, X, x, y, Z, z)
        worst = max(res.values())
        if best is None or worst < best[0]:
            best = (worst, it, [b.copy() for b in X], x.copy(), y.copy(),
                    [b.copy() for b in Z], z.copy(), pobj, dobj, res)
            stalled = 0
        else:
            stalled += 1
        if worst <= tol or it >= max_iter or stalled >= 5:
            break
        it += 1
        mu = gap / nu
        try:
            Zinv = [np.linalg.inv(Zb) for Zb in Z]
            G = [np.einsum("ij,mjk,kl->mil", Xb, A_b, Zi) for Xb, A_b, Zi in zip(X, data.A, Zinv)]
            M = (data.A_lp * (x / z)) @ data.A_lp.T
            for A_b, G_b in zip(data.A, G):
                M = M + np.einsum("mij,lji->ml", A_b, G_b)
            M = _sym(M)
            chol = np.linalg.cholesky(M)
        except np.linalg.LinAlgError:
            break

        def direction(R, r_lp):
            # dX = (R - X dZ) Z^-1 with dZ = Rd - A^T dy; R = sigma mu I - XZ (- corrector)
            base = [Rb @ Zi - Xb @ rdb @ Zi for Rb, Xb, rdb, Zi in zip(R, X, rd, Zinv)]
            base_lp = r_lp / z - x * rd_lp / z
            rhs = rp - _apply_A(data, base, base_lp)
            dy = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
            ATdy, ATdy_lp = _apply_AT(data, dy)
            dZ = [rdb - a for rdb, a in zip(rd, ATdy)]
            dz = rd_lp - ATdy_lp
            dX = [_sym(bb + Xb @ a @ Zi) for bb, Xb, a, Zi in zip(base, X, ATdy, Zinv)]
            dx = base_lp + (x / z) * ATdy_lp
            return dX, dx, dy, dZ, dz

        def steps(dX, dx, dZ, dz):
            ap = min([_max_step(Xb, d) for Xb, d in zip(X, dX)] + [_max_step_lp(x, dx)])
            ad = min([_max_step(Zb, d) for Zb, d in zip(Z, dZ)] + [_max_step_lp(z, dz)])
            return ap, ad

        try:
            R0 = [-Xb @ Zb for Xb, Zb in zip(X, Z)]
            aff = direction(R0, -x * z)
            ap, ad = steps(aff[0], aff[1], aff[3], aff[4])
            mu_aff = (sum(np.sum((Xb + ap * d) * (Zb + ad * e))
                          for Xb, d, Zb, e in zip(X, aff[0], Z, aff[3]))
                      + (x + ap * aff[1]) @ (z + ad * aff[4])) / nu
            sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3
            R = [sigma * mu * np.eye(Xb.shape[0]) - Xb @ Zb - d @ e
                 for Xb, Zb, d, e in zip(X, Z, aff[0], aff[3])]
            r_lp = sigma * mu - x * z - aff[1] * aff[4]
            dX, dx, dy, dZ, dz = direction(R, r_lp)
            ap, ad = steps(dX, dx, dZ, dz)
        except np.linalg.LinAlgError:
            break
        ap = min(1.0, STEP_FRACTION * ap)
        ad = min(1.0, STEP_FRACTION * ad)
        X = [Xb + ap * d for Xb, d in zip(X, dX)]
        x = x + ap * dx
        y = y + ad * dy
        Z = [Zb + ad * d for Zb, d in zip(Z, dZ)]
        z = z + ad * dz
        if symmetry is not None:
            X = [_average(Xb, J) for Xb, J in zip(X, symmetry)]
            Z = [_average(Zb, J) for Zb, J in zip(Z, symmetry)]

    worst, _, X, x, y, Z, z, pobj, dobj, res = best
    status = "optimal" if worst <= accept else "numerical-failure"
    return IpmResult(status, X, x, y, Z, z, pobj, dobj, it, res)
