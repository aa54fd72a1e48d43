"""Compiled inner loops for the Kalman filter and backward sampler.

All matrices arrive as contiguous float64 arrays; time runs along axis 0
with index ``k`` standing for model time ``t = k + 1``. State and observation
dimensions are small, so products are written as plain loops rather than
BLAS calls.
"""

import numpy as np
from numba import njit

LOG_2PI = np.log(2.0 * np.pi)


@njit(cache=True)
def psd_eig(A, rtol):
    """Eigen-decompose a symmetric matrix, clipping tiny eigenvalues to zero.

    Returns ``(vals, vecs, status)``; ``status`` is 1 when some eigenvalue is
    below ``-rtol * max|eig|``. Eigenvalues with ``|lam| <= rtol * max|eig|``
    are set to exactly zero.
    """
    vals, vecs = np.linalg.eigh(A)
    scale = np.max(np.abs(vals))
    status = 0
    thresh = rtol * scale
    for i in range(vals.shape[0]):
        if vals[i] < -thresh:
            status = 1
        if vals[i] <= thresh:
            vals[i] = 0.0
    return vals, vecs, status


@njit(cache=True)
def pinv_from_eig(vals, vecs):
    n = vals.shape[0]
    inv = np.zeros(n)
    for i in range(n):
        if vals[i] > 0.0:
            inv[i] = 1.0 / vals[i]
    return (vecs * inv) @ vecs.T


@njit(cache=True)
def chol_psd(A, rtol):
    """Lower Cholesky factor of a symmetric PSD matrix.

    Pivots at or below ``rtol * max(diag)`` are treated as zero and their
    column is dropped. Returns ``(L, rank, status)`` with ``status`` 1 when a
    pivot is clearly negative.
    """
    n = A.shape[0]
    L = np.zeros((n, n))
    scale = 0.0
    for i in range(n):
        if A[i, i] > scale:
            scale = A[i, i]
    tol = rtol * scale
    rank = 0
    status = 0
    for j in range(n):
        d = A[j, j]
        for k in range(j):
            d -= L[j, k] * L[j, k]
        if d <= tol:
            if d < -tol:
                status = 1
            continue
        ljj = np.sqrt(d)
        L[j, j] = ljj
        rank += 1
        for i in range(j + 1, n):
            s = A[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / ljj
    return L, rank, status


@njit(cache=True)
def chol_solve(L, b):
    """Solve (L L') x = b for full-rank lower-triangular L; b is (n,) or (n, k)."""
    n = L.shape[0]
    x = b.copy()
    for i in range(n):
        s = x[i]
        for k in range(i):
            s = s - L[i, k] * x[k]
        x[i] = s / L[i, i]
    for i in range(n - 1, -1, -1):
        s = x[i]
        for k in range(i + 1, n):
            s = s - L[k, i] * x[k]
        x[i] = s / L[i, i]
    return x


@njit(cache=True)
def mm(A, B):
    n, r = A.shape
    c = B.shape[1]
    out = np.zeros((n, c))
    for i in range(n):
        for k in range(r):
            a = A[i, k]
            if a != 0.0:
                for j in range(c):
                    out[i, j] += a * B[k, j]
    return out


@njit(cache=True)
def mmt(A, B):
    """A @ B.T"""
    n, r = A.shape
    c = B.shape[0]
    out = np.zeros((n, c))
    for i in range(n):
        for j in range(c):
            s = 0.0
            for k in range(r):
                s += A[i, k] * B[j, k]
            out[i, j] = s
    return out


@njit(cache=True)
def mv(A, x):
    n, r = A.shape
    out = np.zeros(n)
    for i in range(n):
        s = 0.0
        for k in range(r):
            s += A[i, k] * x[k]
        out[i] = s
    return out


@njit(cache=True)
def symmetrize(A):
    n = A.shape[0]
    for i in range(n):
        for j in range(i + 1, n):
            v = 0.5 * (A[i, j] + A[j, i])
            A[i, j] = v
            A[j, i] = v
    return A


@njit(cache=True)
def quad_form(A, B):
    """A B A' for square B."""
    return mmt(mm(A, B), A)


@njit(cache=True)
def filter_kernel(F, G, V, W, m0, C0, y, rtol):
    T = y.shape[0]
    mdim = y.shape[1]
    p = m0.shape[0]
    a = np.empty((T, p))
    R = np.empty((T, p, p))
    m = np.empty((T + 1, p))
    C = np.empty((T + 1, p, p))
    f = np.empty((T, mdim))
    Q = np.empty((T, mdim, mdim))
    ll = np.empty(T)
    m[0] = m0
    C[0] = symmetrize(C0.copy())
    for k in range(T):
        Gk = G[k]
        Fk = F[k]
        ak = mv(Gk, m[k])
        Rk = symmetrize(quad_form(Gk, C[k]) + W[k])
        fk = mv(Fk, ak)
        RFt = mmt(Rk, Fk)
        Qk = symmetrize(mm(Fk, RFt) + V)
        L, rank, status = chol_psd(Qk, rtol)
        if status != 0 or rank < mdim:
            return a, R, m, C, f, Q, ll, k + 1
        e = y[k] - fk
        # K' = Q^{-1} F R
        Kt = chol_solve(L, RFt.T.copy())
        K = Kt.T.copy()
        IKF = -mm(K, Fk)
        for i in range(p):
            IKF[i, i] += 1.0
        m[k + 1] = ak + mv(K, e)
        C[k + 1] = symmetrize(quad_form(IKF, Rk) + quad_form(K, V))
        a[k] = ak
        R[k] = Rk
        f[k] = fk
        Q[k] = Qk
        logdet = 0.0
        for i in range(mdim):
            logdet += 2.0 * np.log(L[i, i])
        u = chol_solve(L, e)
        ll[k] = -0.5 * (mdim * LOG_2PI + logdet + np.dot(e, u))
    return a, R, m, C, f, Q, ll, 0


@njit(cache=True)
def backward_kernel(G, a, R, m, C, z, rtol):
    T = a.shape[0]
    p = m.shape[1]
    theta = np.empty((T + 1, p))
    n_singular = 0
    L, _, _ = chol_psd(C[T], rtol)
    theta[T] = m[T] + mv(L, z[T])
    for k in range(T - 1, -1, -1):
        # condition theta_k on theta_{k+1}; R[k] is the prior covariance of theta_{k+1}
        CGt = mmt(C[k], G[k])
        LR, rank, _ = chol_psd(R[k], rtol)
        if rank == p:
            Bt = chol_solve(LR, CGt.T.copy())
            B = Bt.T.copy()
        else:
            n_singular += 1
            rv, rvec, _ = psd_eig(R[k], rtol)
            B = CGt @ pinv_from_eig(rv, rvec)
        h = m[k] + mv(B, theta[k + 1] - a[k])
        H = symmetrize(C[k] - mmt(B, CGt))
        LH, _, _ = chol_psd(H, rtol)
        theta[k] = h + mv(LH, z[k])
    return theta, n_singular
