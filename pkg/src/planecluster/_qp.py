"""Interior-point solver for ``min_z 1/2 z'Qz - l'z + sum_i u_i (|a_i'z| - tau_i)_+``.

Epigraph form with ``xi_i >= |a_i'z| - tau_i`` and ``xi_i >= 0``; Mehrotra
predictor-corrector steps, with the slack block eliminated so each Newton
system is ``d x d``.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def _max_step(v, dv):
    alpha = 1.0
    for i in range(v.shape[0]):
        if dv[i] < 0.0:
            a = -v[i] / dv[i]
            if a < alpha:
                alpha = a
    return alpha


@njit(cache=True)
def _newton(Q, A, D1, D2, D3, rz, rxi):
    E = D1 + D2 + D3
    coupling = D2 - D1
    weights = D1 + D2 - coupling * coupling / E
    S = Q + A.T @ (A * weights[:, None])
    rhs = rz - A.T @ (coupling * rxi / E)
    dz = np.linalg.solve(S, rhs)
    dxi = (rxi - coupling * (A @ dz)) / E
    return dz, dxi


@njit(cache=True)
def hinge_qp(Q, l, A, u, tau, z_start, max_iter, tol):
    """Return ``(z, iterations, converged)``."""
    m = A.shape[0]
    z = z_start.copy()
    t = A @ z
    xi = np.maximum(np.abs(t) - tau, 0.0) + 1.0
    s1 = xi - t + tau
    s2 = xi + t + tau
    s3 = xi.copy()
    l1 = np.ones(m) * np.maximum(u, 1e-8) * 0.5
    l2 = l1.copy()
    l3 = np.ones(m) * np.maximum(u, 1e-8) * 0.5
    ncons = 3 * m
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        t = A @ z
        # dual residual for (z, xi) and primal residuals per block
        rd_z = Q @ z - l - A.T @ (l2 - l1)
        rd_xi = u - l1 - l2 - l3
        rp1 = xi - t + tau - s1
        rp2 = xi + t + tau - s2
        rp3 = xi - s3
        gap = s1 @ l1 + s2 @ l2 + s3 @ l3
        mu = gap / ncons
        obj = 0.5 * (z @ (Q @ z)) - l @ z + u @ xi
        res = max(np.max(np.abs(rd_z)) if rd_z.size else 0.0, np.max(np.abs(rd_xi)),
                  np.max(np.abs(rp1)), np.max(np.abs(rp2)), np.max(np.abs(rp3)))
        res_scale = 1.0 + max(np.max(np.abs(t)), np.max(u), np.max(np.abs(l)), np.max(np.abs(Q @ z)))
        if gap <= tol * (1.0 + abs(obj)) and res <= 10.0 * tol * res_scale:
            converged = True
            break
        D1, D2, D3 = l1 / s1, l2 / s2, l3 / s3

        # predictor
        rc1, rc2, rc3 = -s1 * l1, -s2 * l2, -s3 * l3
        w1 = (rc1 - l1 * rp1) / s1
        w2 = (rc2 - l2 * rp2) / s2
        w3 = (rc3 - l3 * rp3) / s3
        dz, dxi = _newton(Q, A, D1, D2, D3, -rd_z + A.T @ (w2 - w1), -rd_xi + w1 + w2 + w3)
        dt = A @ dz
        ds1 = dxi - dt + rp1
        ds2 = dxi + dt + rp2
        ds3 = dxi + rp3
        dl1 = (rc1 - l1 * ds1) / s1
        dl2 = (rc2 - l2 * ds2) / s2
        dl3 = (rc3 - l3 * ds3) / s3
        ap = min(_max_step(s1, ds1), _max_step(s2, ds2), _max_step(s3, ds3))
        ad = min(_max_step(l1, dl1), _max_step(l2, dl2), _max_step(l3, dl3))
        mu_aff = ((s1 + ap * ds1) @ (l1 + ad * dl1) + (s2 + ap * ds2) @ (l2 + ad * dl2)
                  + (s3 + ap * ds3) @ (l3 + ad * dl3)) / ncons
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0

        # corrector
        rc1 = -s1 * l1 + sigma * mu - ds1 * dl1
        rc2 = -s2 * l2 + sigma * mu - ds2 * dl2
        rc3 = -s3 * l3 + sigma * mu - ds3 * dl3
        w1 = (rc1 - l1 * rp1) / s1
        w2 = (rc2 - l2 * rp2) / s2
        w3 = (rc3 - l3 * rp3) / s3
        dz, dxi = _newton(Q, A, D1, D2, D3, -rd_z + A.T @ (w2 - w1), -rd_xi + w1 + w2 + w3)
        dt = A @ dz
        ds1 = dxi - dt + rp1
        ds2 = dxi + dt + rp2
        ds3 = dxi + rp3
        dl1 = (rc1 - l1 * ds1) / s1
        dl2 = (rc2 - l2 * ds2) / s2
        dl3 = (rc3 - l3 * ds3) / s3
        ap = 0.995 * min(1.0 / 0.995, _max_step(s1, ds1), _max_step(s2, ds2), _max_step(s3, ds3))
        ad = 0.995 * min(1.0 / 0.995, _max_step(l1, dl1), _max_step(l2, dl2), _max_step(l3, dl3))
        z = z + ap * dz
        xi = xi + ap * dxi
        s1 = s1 + ap * ds1
        s2 = s2 + ap * ds2
        s3 = s3 + ap * ds3
        l1 = l1 + ad * dl1
        l2 = l2 + ad * dl2
        l3 = l3 + ad * dl3
    return z, it, converged
