"""Smooth cutoff family used to truncate the stress and the drag term.

The mother bump equals one on ``[-1, 1]``, vanishes outside ``(-2, 2)`` and
switches between the two with the classical ``exp(-1/x)`` transition.  The
truncation is its primitive, so it follows the identity up to ``level`` and
saturates at ``1.5 * level`` beyond ``2 * level``.
"""

from functools import lru_cache

import numpy as np

from .errors import DomainError

_PANELS = 64
_PANEL_NODES = 20


def _smooth_step(x):
    """Return ``exp(-1/x)`` for ``x > 0`` and zero otherwise."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    # below ~1.4e-3 the value underflows to 0 anyway
    pos = x > 1e-3
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def transition(u):
    """Decreasing transition from 1 at ``u <= 0`` to 0 at ``u >= 1``.

    Satisfies ``transition(u) + transition(1 - u) == 1``.
    """
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    a = _smooth_step(1.0 - u)
    b = _smooth_step(u)
    return a / (a + b)


@lru_cache(maxsize=None)
def _panel_table():
    nodes, weights = np.polynomial.legendre.leggauss(_PANEL_NODES)
    edges = np.linspace(0.0, 1.0, _PANELS + 1)
    width = edges[1] - edges[0]
    x = edges[:-1, None] + 0.5 * width * (nodes[None, :] + 1.0)
    panel_integrals = 0.5 * width * (transition(x.ravel()).reshape(x.shape) @ weights)
    cumulative = np.concatenate([[0.0], np.cumsum(panel_integrals)])
    return nodes, weights, edges, cumulative


def transition_integral(u):
    """Return the integral of :func:`transition` over ``[0, u]`` for ``u`` in ``[0, 1]``.

    Uses cached Gauss-Legendre panels; the partial panel containing ``u``
    is integrated with the same rule mapped onto ``[edge, u]``.
    """
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    nodes, weights, edges, cumulative = _panel_table()
    flat = u.ravel()
    idx = np.minimum((flat * _PANELS).astype(int), _PANELS - 1)
    left = edges[idx]
    half = 0.5 * (flat - left)
    pts = left[:, None] + half[:, None] * (nodes[None, :] + 1.0)
    partial = half * (transition(pts) @ weights)
    return (cumulative[idx] + partial).reshape(u.shape)


def mother_bump(s):
    """Smooth bump equal to 1 on ``[-1, 1]`` and 0 outside ``(-2, 2)``."""
    a = np.abs(np.asarray(s, dtype=float))
    return transition(a - 1.0)


class CutoffFamily:
    """Cutoff, truncation and damped identity at a fixed truncation level.

    Parameters
    ----------
    level : float
        Truncation level; the truncation is the identity on ``[-level, level]``.
    """

    def __init__(self, level):
        if not level > 0:
            raise DomainError(f"truncation level must be positive, got {level}")
        self.level = float(level)

    def cutoff(self, s):
        """Scaled bump ``Gamma(s / level)``."""
        return mother_bump(np.asarray(s, dtype=float) / self.level)

    def truncation(self, s):
        """Primitive of the cutoff from 0, extended as an odd function."""
        s = np.asarray(s, dtype=float)
        a = np.abs(s)
        u = a / self.level
        out = np.where(u <= 1.0, a, self.level * (1.0 + transition_integral(u - 1.0)))
        return np.sign(s) * out

    def damped_identity(self, s):
        """``s`` times the cutoff: the identity on the plateau, zero beyond ``2 * level``."""
        s = np.asarray(s, dtype=float)
        return s * self.cutoff(s)

    def regularized_truncation(self, s, delta, panels=8):
        """Integral of ``damped_identity(t) / (t + delta)`` over ``[0, s]``.

        Parameters
        ----------
        s : array_like
            Nonnegative arguments.
        delta : float
            Regularization parameter, strictly positive.
        panels : int
            Gauss panels used on the transition interval.

        Returns
        -------
        numpy.ndarray
            Values with the shape of ``s``.
        """
        if not delta > 0:
            raise DomainError(f"delta must be positive, got {delta}")
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise DomainError("regularized truncation is defined for s >= 0")
        ell = self.level
        inner = np.minimum(s, ell)
        out = inner - delta * np.log1p(inner / delta)
        # transition part over [ell, min(s, 2 ell)] in the variable u = t/ell - 1
        umax = np.clip(s / ell - 1.0, 0.0, 1.0).ravel()
        nodes, weights = np.polynomial.legendre.leggauss(_PANEL_NODES)
        total = np.zeros_like(umax)
        for j in range(panels):
            a = umax * j / panels
            b = umax * (j + 1) / panels
            half = 0.5 * (b - a)
            u = a[:, None] + half[:, None] * (nodes[None, :] + 1.0)
            t = ell * (1.0 + u)
            integrand = t * transition(u) / (t + delta)
            total += half * ell * (integrand @ weights)
        return out + total.reshape(s.shape)


def entropy_density(s):
    """Return ``s log s + 1`` with the continuous value 1 at ``s = 0``."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise DomainError("entropy density is defined for s >= 0")
    safe = np.where(s > 0, s, 1.0)
    return np.where(s > 0, s * np.log(safe), 0.0) + 1.0


def relative_entropy_density(s):
    """Return ``s log s - s + 1``, the entropy density minus its linear part at 1.

    Computed without cancellation for ``s`` near 1.
    """
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise DomainError("entropy density is defined for s >= 0")
    d = s - 1.0
    close = np.abs(d) < 0.5
    dc = np.where(close, d, 0.0)
    # s log s - s + 1 = (1 + d) log1p(d) - d
    near = (1.0 + dc) * np.log1p(dc) - dc
    sf = np.where(s > 0, s, 1.0)
    far = np.where(s > 0, s * np.log(sf), 0.0) - s + 1.0
    return np.where(close, near, far)
