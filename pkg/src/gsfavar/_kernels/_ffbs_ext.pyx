# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled forward-filtering backward-sampling kernel.

Same contract as ``_ffbs_py.ffbs``. Arrays are C-contiguous float64; BLAS and
LAPACK see them as transposed column-major buffers.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, isfinite
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport dgemm, dgemv
from scipy.linalg.cython_lapack cimport dpotrf, dpotrs

cnp.import_array()


cdef void _gemm(bint ta, bint tb, int m, int n, int k, double alpha,
                double* a, int lda, double* b, int ldb, double beta,
                double* c, int ldc) noexcept nogil:
    # row-major C(m x n) = alpha op(A) op(B) + beta C
    cdef char fa = b'T' if ta else b'N'
    cdef char fb = b'T' if tb else b'N'
    dgemm(&fb, &fa, &n, &m, &k, &alpha, b, &ldb, a, &lda, &beta, c, &ldc)


cdef int _chol_lower(double* s, double* work, int n) noexcept nogil:
    # factor row-major SPD s into work (row-major lower); retries with jitter
    cdef char uplo = b'U'
    cdef int info = 0, i, j, attempt
    cdef double tr = 0.0, jit
    for i in range(n):
        tr += s[i * n + i]
    for attempt in range(5):
        memcpy(work, s, n * n * sizeof(double))
        if attempt > 0:
            jit = 1e-10 * (tr / n if tr > 0 else 1e-300)
            for j in range(attempt - 1):
                jit *= 10.0
            for i in range(n):
                work[i * n + i] += jit
        dpotrf(&uplo, &n, work, &n, &info)
        if info == 0:
            for i in range(n):
                for j in range(i + 1, n):
                    work[i * n + j] = 0.0
            return 0
    return 1


cdef void _psd_chol(double* m, double* out, int n, double ref) noexcept nogil:
    cdef int i, j, p
    cdef double d, acc, s, tol = ref
    for i in range(n):
        if m[i * n + i] > tol:
            tol = m[i * n + i]
        for j in range(n):
            out[i * n + j] = 0.0
    tol = 1e-13 * (tol if tol > 0 else 1e-300)
    for j in range(n):
        acc = 0.0
        for p in range(j):
            acc += out[j * n + p] * out[j * n + p]
        d = m[j * n + j] - acc
        if d <= tol:
            continue
        s = sqrt(d)
        out[j * n + j] = s
        for i in range(j + 1, n):
            acc = 0.0
            for p in range(j):
                acc += out[i * n + p] * out[j * n + p]
            out[i * n + j] = (m[i * n + j] - acc) / s


def psd_cholesky(m, double ref=0.0):
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] a = np.ascontiguousarray(m, dtype=np.float64)
    cdef int n = a.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] out = np.zeros((n, n))
    _psd_chol(&a[0, 0], &out[0, 0], n, ref)
    return out


def ffbs(y, z, r, q, m0, p0, normals):
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=3, mode="c"] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=3, mode="c"] rv = np.ascontiguousarray(r, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] m0v = np.ascontiguousarray(m0, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] p0v = np.ascontiguousarray(p0, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] nv = np.ascontiguousarray(normals, dtype=np.float64)

    cdef int T = yv.shape[0]
    cdef int n = yv.shape[1]
    cdef int k = m0v.shape[0]
    cdef int one = 1
    cdef int info = 0
    cdef char uplo = b'U'
    cdef int t, i, j
    cdef bint ok = True
    cdef double acc, ref

    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] means = np.empty((T + 1, k))
    cdef cnp.ndarray[cnp.float64_t, ndim=3, mode="c"] covs = np.empty((T + 1, k, k))
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] path = np.empty((T + 1, k))

    cdef double[:, ::1] pp = np.empty((k, k))
    cdef double[:, ::1] pzt = np.empty((k, n))
    cdef double[:, ::1] gain = np.empty((k, n))
    cdef double[:, ::1] s = np.empty((n, n))
    cdef double[:, ::1] cs = np.empty((n, n))
    cdef double[:, ::1] cp = np.empty((k, k))
    cdef double[:, ::1] jt = np.empty((k, k))
    cdef double[:, ::1] cov = np.empty((k, k))
    cdef double[:, ::1] lcov = np.empty((k, k))
    cdef double[::1] innov = np.empty(n)
    cdef double[::1] dx = np.empty(k)
    cdef double[::1] x = np.empty(k)

    with nogil:
        for i in range(k):
            means[0, i] = m0v[i]
            for j in range(k):
                covs[0, i, j] = p0v[i, j]

        for t in range(T):
            for i in range(k):
                for j in range(k):
                    pp[i, j] = covs[t, i, j] + qv[i, j]
            # pzt = pp z'
            _gemm(False, True, k, n, k, 1.0, &pp[0, 0], k, &zv[t, 0, 0], k, 0.0, &pzt[0, 0], n)
            # s = z pzt + r
            for i in range(n):
                for j in range(n):
                    s[i, j] = rv[t, i, j]
            _gemm(False, False, n, n, k, 1.0, &zv[t, 0, 0], k, &pzt[0, 0], n, 1.0, &s[0, 0], n)
            for i in range(n):
                for j in range(i + 1, n):
                    acc = 0.5 * (s[i, j] + s[j, i])
                    s[i, j] = acc
                    s[j, i] = acc
            if _chol_lower(&s[0, 0], &cs[0, 0], n) != 0:
                ok = False
                break
            # gain = pzt s^{-1}: column-major solve with rhs buffer pzt
            for i in range(k):
                for j in range(n):
                    gain[i, j] = pzt[i, j]
            # cs holds row-major lower == column-major upper factor
            dpotrs(&uplo, &n, &k, &cs[0, 0], &n, &gain[0, 0], &n, &info)
            for i in range(n):
                acc = yv[t, i]
                for j in range(k):
                    acc -= zv[t, i, j] * means[t, j]
                innov[i] = acc
            for i in range(k):
                acc = means[t, i]
                for j in range(n):
                    acc += gain[i, j] * innov[j]
                means[t + 1, i] = acc
            # covs[t+1] = pp - gain pzt'
            for i in range(k):
                for j in range(k):
                    cov[i, j] = pp[i, j]
            _gemm(False, True, k, k, n, -1.0, &gain[0, 0], n, &pzt[0, 0], n, 1.0, &cov[0, 0], k)
            for i in range(k):
                for j in range(k):
                    covs[t + 1, i, j] = 0.5 * (cov[i, j] + cov[j, i])
                    if not isfinite(covs[t + 1, i, j]):
                        ok = False
                if not isfinite(means[t + 1, i]):
                    ok = False
            if not ok:
                break

    if not ok:
        return None, means, covs, False

    with nogil:
        _psd_chol(&covs[T, 0, 0], &lcov[0, 0], k, 0.0)
        for i in range(k):
            acc = means[T, i]
            for j in range(i + 1):
                acc += lcov[i, j] * nv[T, j]
            x[i] = acc
            path[T, i] = acc

        for t in range(T - 1, -1, -1):
            for i in range(k):
                for j in range(k):
                    pp[i, j] = covs[t, i, j] + qv[i, j]
                    jt[i, j] = covs[t, i, j]
            if _chol_lower(&pp[0, 0], &cp[0, 0], k) != 0:
                ok = False
                break
            # column-major solve (P_t+Q) X = P_t gives X' = P_t (P_t+Q)^{-1} in row-major
            dpotrs(&uplo, &k, &k, &cp[0, 0], &k, &jt[0, 0], &k, &info)
            for i in range(k):
                dx[i] = x[i] - means[t, i]
            for i in range(k):
                for j in range(k):
                    cov[i, j] = covs[t, i, j]
            _gemm(False, False, k, k, k, -1.0, &jt[0, 0], k, &covs[t, 0, 0], k, 1.0, &cov[0, 0], k)
            for i in range(k):
                for j in range(i + 1, k):
                    acc = 0.5 * (cov[i, j] + cov[j, i])
                    cov[i, j] = acc
                    cov[j, i] = acc
            ref = 0.0
            for i in range(k):
                if covs[t, i, i] > ref:
                    ref = covs[t, i, i]
            _psd_chol(&cov[0, 0], &lcov[0, 0], k, ref)
            for i in range(k):
                acc = means[t, i]
                for j in range(k):
                    acc += jt[i, j] * dx[j]
                for j in range(i + 1):
                    acc += lcov[i, j] * nv[t, j]
                path[t, i] = acc
            for i in range(k):
                x[i] = path[t, i]

    if not ok:
        return None, means, covs, False
    return path, means, covs, True
