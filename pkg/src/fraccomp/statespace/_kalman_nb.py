"""Compiled Kalman filter and smoother kernels (numba)."""

import numpy as np
import numba as nb

_LOG_2PI = np.log(2.0 * np.pi)


@nb.njit(cache=True)
def _chol_inv(F):
    """Cholesky-based inverse and log-determinant; ok=False if not PD."""
    k = F.shape[0]
    L = np.zeros((k, k))
    for j in range(k):
        s = F[j, j]
        for l in range(j):
            s -= L[j, l] * L[j, l]
        if not s > 0.0:
            return np.zeros((k, k)), 0.0, False
        L[j, j] = np.sqrt(s)
        for i in range(j + 1, k):
            s = F[i, j]
            for l in range(j):
                s -= L[i, l] * L[j, l]
            L[i, j] = s / L[j, j]
    logdet = 0.0
    for j in range(k):
        logdet += 2.0 * np.log(L[j, j])
    # inverse of L by forward substitution
    Li = np.zeros((k, k))
    for j in range(k):
        Li[j, j] = 1.0 / L[j, j]
        for i in range(j + 1, k):
            s = 0.0
            for l in range(j, i):
                s -= L[i, l] * Li[l, j]
            Li[i, j] = s / L[i, i]
    return Li.T @ Li, logdet, True


@nb.njit(cache=True)
def filter_core(T, Z, c, h, RQR, a0, P0, y, store, steady_state, ss_tol,
                out_v, out_F, out_finv, out_K, out_a, out_P, out_af, out_Pf, ll_t):
    """Returns ``(failed_at, steady_from, a_next, P_next)``; ``failed_at = -1`` on success."""
    n, p = y.shape
    a = a0.copy()
    P = P0.copy()
    TT = np.ascontiguousarray(T.T)
    steady = False
    steady_from = -1
    ssF = np.zeros((p, p))
    ssFinv = np.zeros((p, p))
    ssK = np.zeros((T.shape[0], p))
    ssPZ = np.zeros((T.shape[0], p))
    ssPf = np.zeros_like(P)
    ss_logdet = 0.0
    for t in range(n):
        if store:
            out_a[t] = a
            out_P[t] = P
        k = 0
        for i in range(p):
            if not np.isnan(y[t, i]):
                k += 1
        if steady and k == p:
            v = y[t] - c - Z @ a
            u = ssFinv @ v
            ll_t[t] = -0.5 * (p * _LOG_2PI + ss_logdet + v @ u)
            af = a + ssPZ @ u
            a = T @ af
            if store:
                out_v[t] = v
                out_F[t] = ssF
                out_finv[t] = ssFinv
                out_K[t] = ssK
                out_af[t] = af
                out_Pf[t] = ssPf
            continue
        steady = False
        if k == 0:
            if store:
                Fz = Z @ P @ Z.T
                for i in range(p):
                    Fz[i, i] += h[i]
                out_F[t] = Fz
                out_af[t] = a
                out_Pf[t] = P
            a = T @ a
            Pn = T @ P @ TT + RQR
            P = 0.5 * (Pn + Pn.T)
            continue
        idx = np.empty(k, dtype=np.int64)
        j = 0
        for i in range(p):
            if not np.isnan(y[t, i]):
                idx[j] = i
                j += 1
        Zt = np.empty((k, Z.shape[1]))
        vt = np.empty(k)
        for j in range(k):
            Zt[j] = Z[idx[j]]
        za = Zt @ a
        for j in range(k):
            vt[j] = y[t, idx[j]] - c[idx[j]] - za[j]
        PZ = P @ np.ascontiguousarray(Zt.T)
        F = Zt @ PZ
        for j in range(k):
            F[j, j] += h[idx[j]]
        Finv, logdet, ok = _chol_inv(F)
        if not ok:
            return t, steady_from, a, P
        u = Finv @ vt
        ll_t[t] = -0.5 * (k * _LOG_2PI + logdet + vt @ u)
        af = a + PZ @ u
        PZF = PZ @ Finv
        Pf = P - PZF @ np.ascontiguousarray(PZ.T)
        K = T @ PZF
        a = T @ af
        Pn = T @ Pf @ TT + RQR
        Pn = 0.5 * (Pn + Pn.T)
        if store:
            out_af[t] = af
            out_Pf[t] = Pf
            if k == p:
                out_v[t] = vt
                out_F[t] = F
                out_finv[t] = Finv
                out_K[t] = K
            else:
                Fz = Z @ P @ Z.T
                for i in range(p):
                    Fz[i, i] += h[i]
                out_F[t] = Fz
                for j in range(k):
                    out_v[t, idx[j]] = vt[j]
                    for l in range(k):
                        out_finv[t, idx[j], idx[l]] = Finv[j, l]
                    for r in range(K.shape[0]):
                        out_K[t, r, idx[j]] = K[r, j]
        if steady_state and k == p:
            diff = np.max(np.abs(Pn - P))
            scale = max(1.0, np.max(np.abs(P)))
            if diff <= ss_tol * scale:
                steady = True
                ssF = F
                ssFinv = Finv
                ssK = K
                ssPZ = PZ
                ssPf = Pf
                ss_logdet = logdet
                if steady_from < 0:
                    steady_from = t + 1
        P = Pn
    return -1, steady_from, a, P


@nb.njit(cache=True)
def smoother_core(T, Z, v0, finv, gains, a_pred, P_pred, means, covs):
    n = v0.shape[0]
    m = T.shape[0]
    r = np.zeros(m)
    N = np.zeros((m, m))
    ZT = np.ascontiguousarray(Z.T)
    for t in range(n - 1, -1, -1):
        ZF = ZT @ finv[t]
        L = T - gains[t] @ Z
        LT = np.ascontiguousarray(L.T)
        r = ZF @ v0[t] + LT @ r
        N = ZF @ Z + LT @ N @ L
        P = P_pred[t]
        means[t] = a_pred[t] + P @ r
        V = P - P @ N @ P
        covs[t] = 0.5 * (V + V.T)
