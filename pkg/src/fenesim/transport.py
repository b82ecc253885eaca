"""Density transport by backward characteristics.

The density is the initial density pulled back along the flow,
``rho(x, t) = rho0(X(x, t; 0))``, where ``X(x, t; s)`` is the position at
time ``s`` of the particle that sits at ``x`` at time ``t``.
"""

import math

import numpy as np

from . import kernels


class ModalVelocity:
    """Velocity made of Fourier modes with coefficients linear between knots in time.

    Parameters
    ----------
    basis
        Object with ``wavevectors``, ``amplitudes`` (both ``(m, 2)``) and
        ``kinds`` (``(m,)``, 0 for cosine and 1 for sine).
    times : array_like
        Increasing knot times.
    coeffs : array_like
        ``(len(times), m)`` coefficients; held constant outside the knots.
    """

    def __init__(self, basis, times, coeffs):
        self.basis = basis
        self.times = np.atleast_1d(np.asarray(times, dtype=float))
        self.coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
        if self.coeffs.shape[0] != len(self.times):
            raise ValueError("one coefficient vector per knot time is required")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("knot times must increase")

    def coefficients_at(self, s):
        """Coefficients at the times ``s`` (scalar or array), shape ``s.shape + (m,)``."""
        s = np.asarray(s, dtype=float)
        if len(self.times) == 1:
            return np.broadcast_to(self.coeffs[0], s.shape + self.coeffs.shape[1:]).copy()
        sc = np.clip(s, self.times[0], self.times[-1])
        idx = np.clip(np.searchsorted(self.times, sc, side="right") - 1, 0, len(self.times) - 2)
        t0, t1 = self.times[idx], self.times[idx + 1]
        w = ((sc - t0) / (t1 - t0))[..., None]
        return (1.0 - w) * self.coeffs[idx] + w * self.coeffs[idx + 1]

    def __call__(self, x, s):
        return self.basis.velocity(x, self.coefficients_at(s))

    def gradient(self, x, s):
        return self.basis.velocity_gradient(x, self.coefficients_at(s))


class AnalyticVelocity:
    """Velocity given by callables ``v(x, s)`` and ``grad_v(x, s)`` (``grad[p, a, b] = d v_a / d x_b``)."""

    def __init__(self, velocity, gradient):
        self._v = velocity
        self._g = gradient

    def __call__(self, x, s):
        return np.asarray(self._v(np.asarray(x, dtype=float), s), dtype=float)

    def gradient(self, x, s):
        return np.asarray(self._g(np.asarray(x, dtype=float), s), dtype=float)


def _substeps(t, s, ds):
    n = max(1, int(math.ceil(abs(s - t) / ds - 1e-9)))
    return n, (s - t) / n


def _rk4_generic(field, x, t, s, ds, with_jacobian):
    n, h = _substeps(t, s, ds)
    X = np.array(x, dtype=float, copy=True)
    J = np.broadcast_to(np.eye(X.shape[1]), X.shape + (X.shape[1],)).copy() if with_jacobian else None
    tau = t
    for _ in range(n):
        k1 = field(X, tau)
        k2 = field(X + 0.5 * h * k1, tau + 0.5 * h)
        k3 = field(X + 0.5 * h * k2, tau + 0.5 * h)
        k4 = field(X + h * k3, tau + h)
        if with_jacobian:
            L1 = field.gradient(X, tau) @ J
            L2 = field.gradient(X + 0.5 * h * k1, tau + 0.5 * h) @ (J + 0.5 * h * L1)
            L3 = field.gradient(X + 0.5 * h * k2, tau + 0.5 * h) @ (J + 0.5 * h * L2)
            L4 = field.gradient(X + h * k3, tau + h) @ (J + h * L3)
            J = J + (h / 6.0) * (L1 + 2 * L2 + 2 * L3 + L4)
        X = X + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        tau = t + (_ + 1) * h
    return X, J


class CharMap:
    """Backward characteristics of a velocity field.

    Parameters
    ----------
    field : ModalVelocity or AnalyticVelocity
    ds : float
        Largest RK4 substep.
    """

    def __init__(self, field, ds=1e-3):
        if not ds > 0:
            raise ValueError("substep must be positive")
        self.field = field
        self.ds = float(ds)

    def trace(self, x, t, s, with_jacobian=False):
        """Return ``X(x, t; s)`` (unwrapped) and optionally ``dX/dx`` of shape ``(P, 2, 2)``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if s == t:
            J = np.broadcast_to(np.eye(x.shape[1]), x.shape + (x.shape[1],)).copy()
            return (x.copy(), J) if with_jacobian else x.copy()
        if isinstance(self.field, ModalVelocity):
            n, h = _substeps(t, s, self.ds)
            stage = t + h * np.arange(n)[:, None] + h * np.array([0.0, 0.5, 1.0])[None, :]
            table = self.field.coefficients_at(stage)
            b = self.field.basis
            X, J = kernels.trace_modes(x, h, table, b.wavevectors, b.amplitudes, b.kinds, with_jacobian)
        else:
            X, J = _rk4_generic(self.field, x, t, s, self.ds, with_jacobian)
        return (X, J) if with_jacobian else X

    def density(self, rho0, x, t):
        """``rho0`` composed with the foot points ``X(x, t; 0)``."""
        return np.asarray(rho0(self.trace(x, t, 0.0)), dtype=float)

    def jacobian_det(self, x, t, s=0.0):
        _, J = self.trace(x, t, s, with_jacobian=True)
        return np.linalg.det(J)


def integrate_characteristic(field, x, t, s, ds=1e-3):
    """Position at time ``s`` of the particles found at ``x`` at time ``t``."""
    return CharMap(field, ds).trace(x, t, s)


def density_at(rho0, field, x, t, ds=1e-3):
    """Transported density ``rho0(X(x, t; 0))``."""
    return CharMap(field, ds).density(rho0, x, t)


def jacobian_det(field, x, t, s=0.0, ds=1e-3):
    """Determinant of ``dX(x, t; s)/dx`` from the variational equation."""
    return CharMap(field, ds).jacobian_det(x, t, s)


def renormalized_density(beta, rho0, field, x, t, ds=1e-3):
    """``beta(rho(x, t))``, which equals ``beta(rho0)`` pulled back along the flow."""
    return np.asarray(beta(density_at(rho0, field, x, t, ds)), dtype=float)


class GridFlowMap:
    """Foot points ``X(x_g, t; 0)`` of a periodic grid, stored as a displacement field.

    The map is advanced window by window: the grid is traced back over the
    window and the stored displacement is evaluated at the landing points
    by trigonometric interpolation.

    Parameters
    ----------
    lengths : tuple of float
        Torus side lengths.
    grid : int
        Points per direction; grid points are ordered row-major in ``(x1, x2)``.
    displacement : ndarray, optional
        ``(grid * grid, 2)`` values of ``X(x_g, t; 0) - x_g``; zero by default.
    """

    def __init__(self, lengths, grid, displacement=None, time=0.0):
        self.lengths = tuple(float(v) for v in lengths)
        self.grid = int(grid)
        x1 = np.arange(grid) * self.lengths[0] / grid
        x2 = np.arange(grid) * self.lengths[1] / grid
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        self.points = np.column_stack([X1.ravel(), X2.ravel()])
        if displacement is None:
            displacement = np.zeros_like(self.points)
        self.displacement = np.asarray(displacement, dtype=float)
        self.time = float(time)
        self._spectrum = None

    def feet(self):
        return self.points + self.displacement

    def _coefficients(self):
        if self._spectrum is None:
            N = self.grid
            D = self.displacement.reshape(N, N, 2)
            spec = np.fft.fft2(D, axes=(0, 1)) / (N * N)
            if N % 2 == 0:
                spec[N // 2, :, :] = 0.0
                spec[:, N // 2, :] = 0.0
            self._spectrum = spec
        return self._spectrum

    def displacement_at(self, y):
        """Trigonometric interpolant of the displacement at points ``y`` of shape ``(P, 2)``."""
        N = self.grid
        spec = self._coefficients()
        k = np.fft.fftfreq(N, d=1.0 / N)
        E1 = np.exp(2j * np.pi * np.outer(y[:, 0], k) / self.lengths[0])
        E2 = np.exp(2j * np.pi * np.outer(y[:, 1], k) / self.lengths[1])
        out = np.empty_like(y)
        for c in range(2):
            out[:, c] = np.real(np.sum((E1 @ spec[:, :, c]) * E2, axis=1))
        return out

    def advance(self, field, t_to, ds):
        """Return the map at ``t_to`` for a velocity ``field`` valid on ``[self.time, t_to]``."""
        y = CharMap(field, ds).trace(self.points, t_to, self.time)
        feet = y + self.displacement_at(y)
        return GridFlowMap(self.lengths, self.grid, feet - self.points, t_to)

    def density(self, rho0):
        return np.asarray(rho0(self.feet()), dtype=float)
