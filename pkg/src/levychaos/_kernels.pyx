# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batch kernel for iterated integrals over a tree of index words."""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free

ctypedef cnp.int64_t i64

cnp.import_array()


cdef inline void _advance(double h, Py_ssize_t s, i64 inc, Py_ssize_t p, Py_ssize_t Nn, Py_ssize_t D1,
                          double* val, double* pre, double* coef, i64* depth,
                          const double[:, ::1] seg_F, const i64[::1] parent, const i64[::1] member,
                          const double[::1] at0, const double[::1] comp,
                          const double[:, ::1] dW) noexcept nogil:
    cdef Py_ssize_t node, k, par, r
    cdef double a, acc, Fv
    coef[0] = val[0]
    pre[0] = val[0]
    for node in range(1, Nn):
        par = parent[node]
        r = member[node]
        Fv = seg_F[s, node]
        a = -comp[r] * Fv
        coef[node * D1] = val[node]
        for k in range(depth[node]):
            coef[node * D1 + k + 1] = a * coef[par * D1 + k] / (k + 1)
        acc = coef[node * D1 + depth[node]]
        for k in range(depth[node] - 1, -1, -1):
            acc = acc * h + coef[node * D1 + k]
        if inc >= 0:
            acc += at0[r] * Fv * val[par] * dW[p, inc]
        pre[node] = acc
    for node in range(Nn):
        val[node] = pre[node]


cdef inline void _jump(Py_ssize_t s, Py_ssize_t j, Py_ssize_t Nn, double* val, double* pre,
                       const double[:, ::1] seg_F, const i64[::1] parent, const i64[::1] member,
                       const double[:, ::1] jvals) noexcept nogil:
    cdef Py_ssize_t node
    pre[0] = val[0]
    for node in range(1, Nn):
        pre[node] = val[node] + seg_F[s, node] * val[parent[node]] * jvals[member[node], j]
    for node in range(Nn):
        val[node] = pre[node]


def tree_terminal(const double[::1] knots, const i64[::1] grid_inc, const double[:, ::1] seg_F,
                  const i64[::1] parent, const i64[::1] member, double root_value,
                  const double[::1] at0, const double[::1] comp, const double[:, ::1] dW,
                  const i64[::1] offsets, const double[::1] jtimes, const double[:, ::1] jvals):
    """Terminal values of every node of an index tree, for every path.

    See ``levychaos.kernels.tree_terminal`` for the argument contract.
    """
    cdef Py_ssize_t S = knots.shape[0] - 1
    cdef Py_ssize_t Nn = parent.shape[0]
    cdef Py_ssize_t P = offsets.shape[0] - 1
    cdef Py_ssize_t p, s, node, D1
    cdef i64 j, jend
    cdef double last
    cdef i64* depth = <i64*> malloc(Nn * sizeof(i64))
    depth[0] = 0
    for node in range(1, Nn):
        depth[node] = depth[parent[node]] + 1
    D1 = 1
    for node in range(Nn):
        if depth[node] + 1 > D1:
            D1 = depth[node] + 1
    cdef double* val = <double*> malloc(Nn * sizeof(double))
    cdef double* pre = <double*> malloc(Nn * sizeof(double))
    cdef double* coef = <double*> malloc(Nn * D1 * sizeof(double))
    out = np.empty((P, Nn), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for p in range(P):
            val[0] = root_value
            for node in range(1, Nn):
                val[node] = 0.0
            last = 0.0
            j = offsets[p]
            jend = offsets[p + 1]
            for s in range(S):
                while j < jend and jtimes[j] < knots[s + 1]:
                    _advance(jtimes[j] - last, s, -1, p, Nn, D1, val, pre, coef, depth,
                             seg_F, parent, member, at0, comp, dW)
                    _jump(s, j, Nn, val, pre, seg_F, parent, member, jvals)
                    last = jtimes[j]
                    j += 1
                _advance(knots[s + 1] - last, s, grid_inc[s + 1], p, Nn, D1, val, pre, coef, depth,
                         seg_F, parent, member, at0, comp, dW)
                last = knots[s + 1]
            while j < jend:
                _jump(S - 1, j, Nn, val, pre, seg_F, parent, member, jvals)
                j += 1
            for node in range(Nn):
                o[p, node] = val[node]
    free(depth)
    free(val)
    free(pre)
    free(coef)
    return out
