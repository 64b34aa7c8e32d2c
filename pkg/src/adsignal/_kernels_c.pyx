# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels; see ``_kernels_py`` for semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport ceil, INFINITY
from libc.stdlib cimport malloc, free

cnp.import_array()


def batch_revenue(W, rweights):
    cdef const double[:, ::1] w = np.ascontiguousarray(W, dtype=np.float64)
    cdef const double[::1] r = np.ascontiguousarray(rweights, dtype=np.float64)
    cdef Py_ssize_t rows = w.shape[0], n = w.shape[1], top = r.shape[0]
    cdef Py_ssize_t i, k, p, q, filled
    cdef double x, acc
    out = np.zeros(rows, dtype=np.float64)
    cdef double[::1] o = out
    cdef double *buf = <double *> malloc(top * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    try:
        for i in range(rows):
            filled = 0
            # keep the `top` largest values in descending order (insertion)
            for k in range(n):
                x = w[i, k]
                if filled == top and x <= buf[top - 1]:
                    continue
                p = filled if filled < top else top - 1
                while p > 0 and buf[p - 1] < x:
                    buf[p] = buf[p - 1]
                    p -= 1
                buf[p] = x
                if filled < top:
                    filled += 1
            acc = 0.0
            for q in range(filled):
                acc += buf[q] * r[q]
            o[i] = acc
    finally:
        free(buf)
    return out


def dp_best_values(const double[::1] vgrid, const double[::1] deltas, const double[::1] b,
                   const long[::1] sizes, const double[::1] F, int c, int jcap,
                   double fmax, double max_negy, double sum_b, double[::1] out):
    cdef Py_ssize_t d = deltas.shape[0], T = vgrid.shape[0]
    cdef Py_ssize_t t, th, w, j, jj, width = jcap + 1
    cdef long k, s
    cdef double v, gain, cand, val, best = -INFINITY, bound
    cdef int evaluated = 0
    cdef double *NE = <double *> malloc((c + 1) * width * sizeof(double))
    if NE == NULL:
        raise MemoryError()
    try:
        for t in range(T):
            v = vgrid[t]
            bound = v * fmax + (max_negy if max_negy < v * sum_b else v * sum_b)
            if bound < best:
                break
            evaluated += 1
            for w in range((c + 1) * width):
                NE[w] = -INFINITY
            for th in range(d):
                k = <long> ceil(v * c / deltas[th] - 1e-9)
                if k < 1:
                    k = 1
                if k > c:
                    continue
                s = sizes[th]
                gain = b[th]
                jj = s if s < jcap else jcap
                # 0/1 update: descending w reads only pre-item cells
                for w in range(c, k - 1, -1):
                    for j in range(jcap, -1, -1):
                        cand = NE[(w - k) * width + j]
                        if cand == -INFINITY:
                            continue
                        cand += gain
                        jj = j + s
                        if jj > jcap:
                            jj = jcap
                        if cand > NE[w * width + jj]:
                            NE[w * width + jj] = cand
                    jj = s if s < jcap else jcap
                    if gain > NE[w * width + jj]:
                        NE[w * width + jj] = gain
            val = -INFINITY
            for j in range(width):
                cand = NE[c * width + j]
                if cand != -INFINITY:
                    cand = v * (F[j] + cand)
                    if cand > val:
                        val = cand
            out[t] = val
            if val > best:
                best = val
    finally:
        free(NE)
    return evaluated
