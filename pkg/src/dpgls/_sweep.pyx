# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled reassignment sweeps; mirror of ``_sweep_py``."""

from libc.math cimport exp, log, log1p, lgamma, sqrt, M_PI, INFINITY
from libc.stdlib cimport malloc, free

cdef double LOG_2PI = log(2.0 * M_PI)


cdef inline void _relabel(long long[:] assign, long long old, long long new) noexcept nogil:
    cdef Py_ssize_t j
    for j in range(assign.shape[0]):
        if assign[j] == old:
            assign[j] = new


cdef inline Py_ssize_t _pick(double* lw, Py_ssize_t m, double top, double u) noexcept nogil:
    cdef Py_ssize_t k
    cdef double total = 0.0, acc = 0.0, target
    for k in range(m):
        lw[k] = exp(lw[k] - top)
        total += lw[k]
    target = u * total
    for k in range(m):
        acc += lw[k]
        if target < acc:
            return k
    return m - 1


def sweep_scalar(double[:] e, long long[:] assign, double[:] values, long long[:] counts,
                 Py_ssize_t K, double alpha, double a, double b, double[:] u, double[:] g):
    cdef Py_ssize_t n = e.shape[0], i, k, pick
    cdef long long c, last
    cdef double log_alpha = log(alpha)
    cdef double new_const = lgamma(a + 0.5) - lgamma(a) - 0.5 * log(2.0 * b * M_PI)
    cdef double ei, e2, v, w, top
    cdef double* lw = <double*> malloc((n + 1) * sizeof(double))
    if lw == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(n):
                c = assign[i]
                counts[c] -= 1
                if counts[c] == 0:
                    last = K - 1
                    if c != last:
                        values[c] = values[last]
                        counts[c] = counts[last]
                        _relabel(assign, last, c)
                    counts[last] = 0
                    K = last
                ei = e[i]
                e2 = ei * ei
                top = -INFINITY
                for k in range(K):
                    v = values[k]
                    w = log(<double> counts[k]) - 0.5 * (LOG_2PI + log(v)) - 0.5 * e2 / v
                    lw[k] = w
                    if w > top:
                        top = w
                w = log_alpha + new_const - (a + 0.5) * log1p(e2 / (2.0 * b))
                lw[K] = w
                if w > top:
                    top = w
                pick = _pick(lw, K + 1, top, u[i])
                if pick == K:
                    values[K] = (b + 0.5 * e2) / g[i]
                    counts[K] = 0
                    K += 1
                assign[i] = pick
                counts[pick] += 1
    finally:
        free(lw)
    return K


cdef int _chol_small(double* m, double* L, Py_ssize_t q) noexcept nogil:
    cdef Py_ssize_t j, r, p
    cdef double s
    for j in range(q * q):
        L[j] = 0.0
    for j in range(q):
        s = m[j * q + j]
        for p in range(j):
            s -= L[j * q + p] * L[j * q + p]
        if not s > 0.0:
            return -1
        L[j * q + j] = sqrt(s)
        for r in range(j + 1, q):
            s = m[r * q + j]
            for p in range(j):
                s -= L[r * q + p] * L[j * q + p]
            L[r * q + j] = s / L[j * q + j]
    return 0


cdef inline void _forward(double* L, double* x, double* z, Py_ssize_t q) noexcept nogil:
    cdef Py_ssize_t r, p
    cdef double s
    for r in range(q):
        s = x[r]
        for p in range(r):
            s -= L[r * q + p] * z[p]
        z[r] = s / L[r * q + r]


def sweep_matrix(double[:, :] E, long long[:] assign, double[:, :, :] chols, double[:] halflogdet,
                 long long[:] counts, Py_ssize_t K, double alpha, double nu,
                 double[:, :] W, double[:, :] W_chol, double[:, :, :] A, double[:] u):
    cdef Py_ssize_t n = E.shape[0], q = E.shape[1]
    cdef Py_ssize_t i, k, r, s, p, pick
    cdef long long c, last
    cdef double log_alpha = log(alpha)
    cdef double w_half = 0.0, new_const, top, w, quad, acc
    cdef double* lw = <double*> malloc((n + 1) * sizeof(double))
    cdef double* buf = <double*> malloc((7 * q * q + 3 * q) * sizeof(double))
    cdef double* Wl
    cdef double* Wm
    cdef double* psi
    cdef double* C
    cdef double* Ai
    cdef double* B
    cdef double* Ls
    cdef double* ei
    cdef double* z
    cdef double* tmp
    cdef int status = 0
    if lw == NULL or buf == NULL:
        free(lw)
        free(buf)
        raise MemoryError()
    Wl = buf
    Wm = buf + q * q
    psi = buf + 2 * q * q
    C = buf + 3 * q * q
    Ai = buf + 4 * q * q
    B = buf + 5 * q * q
    Ls = buf + 6 * q * q
    ei = buf + 7 * q * q
    z = ei + q
    tmp = z + q
    for r in range(q):
        for s in range(q):
            Wl[r * q + s] = W_chol[r, s]
            Wm[r * q + s] = W[r, s]
        w_half += log(W_chol[r, r])
    new_const = (lgamma(0.5 * (nu + 1.0)) - lgamma(0.5 * (nu - q + 1.0))
                 - 0.5 * q * log(M_PI) - w_half)
    try:
        with nogil:
            for i in range(n):
                c = assign[i]
                counts[c] -= 1
                if counts[c] == 0:
                    last = K - 1
                    if c != last:
                        for r in range(q):
                            for s in range(q):
                                chols[c, r, s] = chols[last, r, s]
                        halflogdet[c] = halflogdet[last]
                        counts[c] = counts[last]
                        _relabel(assign, last, c)
                    counts[last] = 0
                    K = last
                for r in range(q):
                    ei[r] = E[i, r]
                top = -INFINITY
                for k in range(K):
                    quad = 0.0
                    for r in range(q):
                        acc = ei[r]
                        for p in range(r):
                            acc -= chols[k, r, p] * z[p]
                        z[r] = acc / chols[k, r, r]
                        quad += z[r] * z[r]
                    w = log(<double> counts[k]) - 0.5 * q * LOG_2PI - halflogdet[k] - 0.5 * quad
                    lw[k] = w
                    if w > top:
                        top = w
                _forward(Wl, ei, z, q)
                quad = 0.0
                for r in range(q):
                    quad += z[r] * z[r]
                w = log_alpha + new_const - 0.5 * (nu + 1.0) * log1p(quad)
                lw[K] = w
                if w > top:
                    top = w
                pick = _pick(lw, K + 1, top, u[i])
                if pick == K:
                    for r in range(q):
                        for s in range(q):
                            psi[r * q + s] = Wm[r * q + s] + ei[r] * ei[s]
                            Ai[r * q + s] = A[i, r, s]
                    if _chol_small(psi, C, q) != 0:
                        status = -1
                        break
                    for r in range(q):
                        _forward(Ai, C + r * q, B + r * q, q)
                    for r in range(q):
                        for s in range(q):
                            acc = 0.0
                            for p in range(q):
                                acc += B[r * q + p] * B[s * q + p]
                            psi[r * q + s] = acc
                    if _chol_small(psi, Ls, q) != 0:
                        status = -1
                        break
                    quad = 0.0
                    for r in range(q):
                        for s in range(q):
                            chols[K, r, s] = Ls[r * q + s]
                        quad += log(Ls[r * q + r])
                    halflogdet[K] = quad
                    counts[K] = 0
                    K += 1
                assign[i] = pick
                counts[pick] += 1
    finally:
        free(lw)
        free(buf)
    if status != 0:
        raise ArithmeticError("non positive pivot in new-group covariance")
    return K
