# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled characteristic integrator for Fourier-mode velocity fields."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos

cnp.import_array()


cdef inline void _velocity(double x0, double x1, const double[:] c,
                           const double[:, :] kvec, const double[:, :] amp,
                           const int[:] kind, Py_ssize_t m, bint with_grad,
                           double* v, double* g) noexcept nogil:
    cdef Py_ssize_t i
    cdef double th, f, df, ci
    v[0] = 0.0
    v[1] = 0.0
    if with_grad:
        g[0] = 0.0
        g[1] = 0.0
        g[2] = 0.0
        g[3] = 0.0
    for i in range(m):
        ci = c[i]
        if ci == 0.0:
            continue
        th = kvec[i, 0] * x0 + kvec[i, 1] * x1
        if kind[i] == 0:
            f = cos(th)
            df = -sin(th)
        else:
            f = sin(th)
            df = cos(th)
        v[0] += ci * f * amp[i, 0]
        v[1] += ci * f * amp[i, 1]
        if with_grad:
            df *= ci
            g[0] += df * amp[i, 0] * kvec[i, 0]
            g[1] += df * amp[i, 0] * kvec[i, 1]
            g[2] += df * amp[i, 1] * kvec[i, 0]
            g[3] += df * amp[i, 1] * kvec[i, 1]


cdef inline void _matmul(const double* g, const double* a, double* out) noexcept nogil:
    out[0] = g[0] * a[0] + g[1] * a[2]
    out[1] = g[0] * a[1] + g[1] * a[3]
    out[2] = g[2] * a[0] + g[3] * a[2]
    out[3] = g[2] * a[1] + g[3] * a[3]


def trace_modes(x0, double h, table, kvec, amp, kind, bint with_jac):
    """Integrate ``dX/ds = v(X, s)`` with classical RK4 for every point.

    Same contract as the numpy fallback.
    """
    cdef const double[:, :] xs = np.ascontiguousarray(x0, dtype=np.float64)
    cdef const double[:, :, :] tab = np.ascontiguousarray(table, dtype=np.float64)
    cdef const double[:, :] kv = np.ascontiguousarray(kvec, dtype=np.float64)
    cdef const double[:, :] am = np.ascontiguousarray(amp, dtype=np.float64)
    cdef const int[:] kd = np.ascontiguousarray(kind, dtype=np.int32)
    cdef Py_ssize_t P = xs.shape[0], nsub = tab.shape[0], m = kv.shape[0]
    X_out = np.empty((P, 2))
    J_out = np.empty((P, 2, 2))
    cdef double[:, :] Xo = X_out
    cdef double[:, :, :] Jo = J_out
    cdef Py_ssize_t p, k, r
    cdef double X[2]
    cdef double J[4]
    cdef double Js[4]
    cdef double v1[2]
    cdef double v2[2]
    cdef double v3[2]
    cdef double v4[2]
    cdef double g1[4]
    cdef double g2[4]
    cdef double g3[4]
    cdef double g4[4]
    cdef double L1[4]
    cdef double L2[4]
    cdef double L3[4]
    cdef double L4[4]
    cdef double hh = 0.5 * h, h6 = h / 6.0
    with nogil:
        for p in range(P):
            X[0] = xs[p, 0]
            X[1] = xs[p, 1]
            J[0] = 1.0
            J[1] = 0.0
            J[2] = 0.0
            J[3] = 1.0
            for k in range(nsub):
                _velocity(X[0], X[1], tab[k, 0], kv, am, kd, m, with_jac, v1, g1)
                _velocity(X[0] + hh * v1[0], X[1] + hh * v1[1], tab[k, 1], kv, am, kd, m, with_jac, v2, g2)
                _velocity(X[0] + hh * v2[0], X[1] + hh * v2[1], tab[k, 1], kv, am, kd, m, with_jac, v3, g3)
                _velocity(X[0] + h * v3[0], X[1] + h * v3[1], tab[k, 2], kv, am, kd, m, with_jac, v4, g4)
                if with_jac:
                    _matmul(g1, J, L1)
                    for r in range(4):
                        Js[r] = J[r] + hh * L1[r]
                    _matmul(g2, Js, L2)
                    for r in range(4):
                        Js[r] = J[r] + hh * L2[r]
                    _matmul(g3, Js, L3)
                    for r in range(4):
                        Js[r] = J[r] + h * L3[r]
                    _matmul(g4, Js, L4)
                    for r in range(4):
                        J[r] += h6 * (L1[r] + 2.0 * L2[r] + 2.0 * L3[r] + L4[r])
                X[0] += h6 * (v1[0] + 2.0 * v2[0] + 2.0 * v3[0] + v4[0])
                X[1] += h6 * (v1[1] + 2.0 * v2[1] + 2.0 * v3[1] + v4[1])
            Xo[p, 0] = X[0]
            Xo[p, 1] = X[1]
            Jo[p, 0, 0] = J[0]
            Jo[p, 0, 1] = J[1]
            Jo[p, 1, 0] = J[2]
            Jo[p, 1, 1] = J[3]
    return X_out, (J_out if with_jac else None)
