"""Numpy implementation of the characteristic integrator (fallback for the compiled core)."""

import numpy as np


def _modal_velocity(x, c, kvec, amp, kind):
    theta = x @ kvec.T
    cs, sn = np.cos(theta), np.sin(theta)
    f = np.where(kind[None, :] == 0, cs, sn)
    df = np.where(kind[None, :] == 0, -sn, cs)
    v = (f * c[None, :]) @ amp
    return v, df * c[None, :]


def _modal_gradient(dfc, kvec, amp):
    # grad[p, a, b] = sum_i dfc[p, i] amp[i, a] kvec[i, b]
    return np.einsum("pi,ia,ib->pab", dfc, amp, kvec)


def trace_modes(x0, h, table, kvec, amp, kind, with_jac):
    """Integrate ``dX/ds = v(X, s)`` with classical RK4 for every point.

    Parameters
    ----------
    x0 : ndarray, shape (P, 2)
        Start points.
    h : float
        Signed substep.
    table : ndarray, shape (nsub, 3, m)
        Mode coefficients at the start, middle and end of every substep.
    kvec, amp : ndarray, shape (m, 2)
        Wavevectors and amplitude vectors of the modes.
    kind : ndarray of int32, shape (m,)
        0 for cosine modes, 1 for sine modes.
    with_jac : bool
        Also integrate the variational equation for ``dX/dx0``.

    Returns
    -------
    X : ndarray, shape (P, 2)
    J : ndarray, shape (P, 2, 2) or None
    """
    X = np.array(x0, dtype=float, copy=True)
    P = len(X)
    J = np.broadcast_to(np.eye(2), (P, 2, 2)).copy() if with_jac else None
    for row in table:
        c0, c1, c2 = row
        v1, d1 = _modal_velocity(X, c0, kvec, amp, kind)
        v2, d2 = _modal_velocity(X + 0.5 * h * v1, c1, kvec, amp, kind)
        v3, d3 = _modal_velocity(X + 0.5 * h * v2, c1, kvec, amp, kind)
        v4, d4 = _modal_velocity(X + h * v3, c2, kvec, amp, kind)
        if with_jac:
            L1 = _modal_gradient(d1, kvec, amp) @ J
            L2 = _modal_gradient(d2, kvec, amp) @ (J + 0.5 * h * L1)
            L3 = _modal_gradient(d3, kvec, amp) @ (J + 0.5 * h * L2)
            L4 = _modal_gradient(d4, kvec, amp) @ (J + h * L3)
            J = J + (h / 6.0) * (L1 + 2.0 * L2 + 2.0 * L3 + L4)
        X = X + (h / 6.0) * (v1 + 2.0 * v2 + 2.0 * v3 + v4)
    return X, J
