"""Fourier-Galerkin bases on the periodic box and assembly of the finite-level systems.

Matrices follow the convention ``row = test function, column = trial
function``.  The velocity system reads ``Mass dc/dt = A c + B`` and the PDF
system ``d/dt (N d) = -L d + R``.
"""

from dataclasses import dataclass

import numpy as np

from .confspace import ApproxMaxwellian, ConfQuadrature, Maxwellian, build_conf_basis
from .errors import CapacityError
from .truncation import CutoffFamily


class Torus:
    """Periodic box with a uniform ``grid x grid`` trapezoid quadrature."""

    def __init__(self, lengths=(2 * np.pi, 2 * np.pi), grid=16):
        self.lengths = tuple(float(v) for v in lengths)
        self.grid = int(grid)
        x1 = np.arange(self.grid) * self.lengths[0] / self.grid
        x2 = np.arange(self.grid) * self.lengths[1] / self.grid
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        self.points = np.column_stack([X1.ravel(), X2.ravel()])
        self.volume = self.lengths[0] * self.lengths[1]
        self.weight = self.volume / len(self.points)

    def integrate(self, values):
        """Sum over the leading (grid) axis times the cell area."""
        return self.weight * np.sum(values, axis=0)


def _half_plane_modes(torus):
    """Integer wavevectors of the half plane, sorted by physical length then lexicographically."""
    cap = torus.grid // 4
    modes = [
        (n1, n2)
        for n1 in range(0, cap + 1)
        for n2 in range(-cap, cap + 1)
        if n1 > 0 or n2 > 0
    ]
    L1, L2 = torus.lengths
    key = lambda n: (round((2 * np.pi * n[0] / L1) ** 2 + (2 * np.pi * n[1] / L2) ** 2, 12), n)
    return sorted(modes, key=key)


class VelocityBasis:
    """Divergence-free real Fourier modes ``k_perp/|k| cos(k.x)`` and ``k_perp/|k| sin(k.x)``.

    Modes are ordered by ``|k|``, then lexicographically by the integer
    wavevector, cosine before sine, and normalized in ``L^2`` of the box.
    """

    def __init__(self, m, torus):
        pairs = [(n, kind) for n in _half_plane_modes(torus) for kind in (0, 1)]
        if m > len(pairs):
            raise CapacityError(
                f"requested {m} velocity modes but a grid of {torus.grid} supports at most {len(pairs)}"
            )
        self.m = int(m)
        self.torus = torus
        L = np.asarray(torus.lengths)
        ints = np.array([p[0] for p in pairs[:m]], dtype=float).reshape(m, 2)
        self.integer_wavevectors = ints.astype(int)
        self.wavevectors = 2 * np.pi * ints / L
        self.kinds = np.array([p[1] for p in pairs[:m]], dtype=np.int32)
        kn = np.linalg.norm(self.wavevectors, axis=1)
        perp = np.column_stack([-self.wavevectors[:, 1], self.wavevectors[:, 0]]) / kn[:, None]
        self.amplitudes = perp * np.sqrt(2.0 / torus.volume)
        self.values = self.evaluate(torus.points)
        self.gradients = self.evaluate_gradient(torus.points)

    def _trig(self, x):
        theta = np.asarray(x, dtype=float) @ self.wavevectors.T
        cs, sn = np.cos(theta), np.sin(theta)
        f = np.where(self.kinds == 0, cs, sn)
        df = np.where(self.kinds == 0, -sn, cs)
        return f, df

    def evaluate(self, x):
        """Mode values ``(P, m, 2)``."""
        f, _ = self._trig(x)
        return f[:, :, None] * self.amplitudes[None, :, :]

    def evaluate_gradient(self, x):
        """Mode gradients ``(P, m, 2, 2)`` with ``[p, i, a, b] = d w_ia / d x_b``."""
        _, df = self._trig(x)
        return df[:, :, None, None] * self.amplitudes[None, :, :, None] * self.wavevectors[None, :, None, :]

    def velocity(self, x, coeffs):
        f, _ = self._trig(x)
        return (f * coeffs) @ self.amplitudes

    def velocity_gradient(self, x, coeffs):
        _, df = self._trig(x)
        return np.einsum("pi,ia,ib->pab", df * coeffs, self.amplitudes, self.wavevectors)

    def project(self, values):
        """L^2 projection coefficients of grid values ``(P, 2)``."""
        return self.torus.weight * np.einsum("pa,pia->i", values, self.values)


class ScalarBasis:
    """Real trigonometric functions on the box: the constant, then cosine/sine pairs by ``|k|``."""

    def __init__(self, torus):
        modes = _half_plane_modes(torus)
        L = np.asarray(torus.lengths)
        ints = np.array([(0, 0)] + [n for n in modes for _ in (0, 1)], dtype=float)
        kinds = np.array([0] + [kind for _ in modes for kind in (0, 1)], dtype=np.int32)
        self.torus = torus
        self.integer_wavevectors = ints.astype(int)
        self.wavevectors = 2 * np.pi * ints / L
        self.kinds = kinds
        self.scale = np.full(len(kinds), np.sqrt(2.0 / torus.volume))
        self.scale[0] = np.sqrt(1.0 / torus.volume)
        k2 = np.round(np.sum(self.wavevectors**2, axis=1), 12)
        shells = np.unique(k2)
        self.levels = np.searchsorted(shells, k2)
        self.values = self.evaluate(torus.points)
        self.gradients = self.evaluate_gradient(torus.points)

    def __len__(self):
        return len(self.kinds)

    def evaluate(self, x):
        theta = np.asarray(x, dtype=float) @ self.wavevectors.T
        return np.where(self.kinds == 0, np.cos(theta), np.sin(theta)) * self.scale

    def evaluate_gradient(self, x):
        theta = np.asarray(x, dtype=float) @ self.wavevectors.T
        d = np.where(self.kinds == 0, -np.sin(theta), np.cos(theta)) * self.scale
        return d[:, :, None] * self.wavevectors[None, :, :]


class PdfBasis:
    """Tensor functions ``X_a(x) Q_b(q)``; the first ``n`` pairs by combined level.

    Pairs are sorted by ``(shell(a) + degree(b), shell(a), a, b)`` so that the
    constant function comes first and smaller bases are prefixes of larger ones.
    """

    def __init__(self, n, scalar_basis, conf_basis):
        nx, nq = len(scalar_basis), conf_basis.n_conf
        if n > nx * nq:
            raise CapacityError(f"requested {n} PDF modes but at most {nx * nq} are available")
        lx = scalar_basis.levels
        dq = conf_basis.degrees
        pairs = sorted(
            ((a, b) for a in range(nx) for b in range(nq)),
            key=lambda p: (lx[p[0]] + dq[p[1]], lx[p[0]], p[0], p[1]),
        )[:n]
        self.n = int(n)
        self.x_index = np.array([p[0] for p in pairs], dtype=int)
        self.q_index = np.array([p[1] for p in pairs], dtype=int)
        self.nx = int(self.x_index.max()) + 1
        self.nq = nq
        self.scalar_basis = scalar_basis
        self.conf_basis = conf_basis

    def to_matrix(self, coeffs):
        """Scatter coefficients into an ``(nx, nq)`` array."""
        D = np.zeros((self.nx, self.nq))
        D[self.x_index, self.q_index] = coeffs
        return D

    def gather(self, matrix):
        return matrix[self.x_index, self.q_index]

    def expand(self, tensor):
        """Select ``tensor[a_i, a_j] * (b_i == b_j)`` from an ``(nx, nx)`` spatial block."""
        same = self.q_index[:, None] == self.q_index[None, :]
        return tensor[self.x_index[:, None], self.x_index[None, :]] * same

    def tensor(self, x_block, q_block):
        """Entries ``x_block[a_i, a_j] * q_block[b_i, b_j]`` of a separable operator."""
        xi, qi = self.x_index, self.q_index
        return x_block[xi[:, None], xi[None, :]] * q_block[qi[:, None], qi[None, :]]


@dataclass
class VelocitySystem:
    mass: np.ndarray
    A: np.ndarray
    B: np.ndarray


@dataclass
class PdfSystem:
    L: np.ndarray
    R: np.ndarray


class Discretization:
    """All bases, quadratures and precomputed node tables of one finite level.

    Parameters
    ----------
    setup : ProblemSetup
    levels : Levels, optional
        Overrides ``setup.levels``.
    """

    def __init__(self, setup, levels=None):
        lv = levels or setup.levels
        self.setup = setup
        self.levels = lv
        self.chain = setup.chain
        self.rouse = setup.rouse
        self.laws = setup.laws
        self.cutoff = CutoffFamily(lv.ell)
        self.torus = Torus(setup.lengths, setup.grid)
        self.vbasis = VelocityBasis(lv.m, self.torus)
        self.sbasis = ScalarBasis(self.torus)
        self.maxwellian = Maxwellian.from_chain(setup.chain)
        self.quad = ConfQuadrature(setup.chain, setup.radial_order, setup.angular_order, self.maxwellian)
        self.approx = ApproxMaxwellian(self.maxwellian, lv.m, exact=setup.maxwellian == "exact")
        self.cbasis = build_conf_basis(lv.n_conf, self.approx, self.quad)
        self.pbasis = PdfBasis(lv.n, self.sbasis, self.cbasis)

        q = self.quad.nodes
        K, d = q.shape[1:]
        self.M = self.maxwellian(q)
        self.Mm = self.approx(q)
        self.wq = self.quad.weights
        self.wM = self.wq * self.M
        self.wMm = self.wq * self.Mm
        gradM = self.maxwellian.gradient(q)
        self.stress_kernel = -K * self.wM[:, None, None] * np.eye(d) - np.einsum(
            "a,ajc,ajd->acd", self.wq, gradM, q
        )
        dQ = self.cbasis.gradients
        self.drift_kernel = np.einsum("a,ajb,aqjc->acbq", self.wM, q, dQ)
        AdQ = self.rouse.apply_springs(dQ)
        self.conf_stiffness = np.einsum("a,aqjc,arjc->qr", self.wMm, AdQ, dQ)

        nx = self.pbasis.nx
        self.X = self.sbasis.values[:, :nx]
        self.dX = self.sbasis.gradients[:, :nx]
        self.Q = self.cbasis.values
        w = self.torus.weight
        self.x_stiffness = w * np.einsum("pac,pbc->ab", self.dX, self.dX)
        self.x_gram = w * self.X.T @ self.X
        self.pdf_diffusion = self.pbasis.expand(self.x_stiffness) + self.pbasis.tensor(self.x_gram, self.conf_stiffness)

    @property
    def points(self):
        return self.torus.points

    # field evaluation -------------------------------------------------
    def velocity(self, c):
        return np.einsum("pia,i->pa", self.vbasis.values, c)

    def velocity_gradient(self, c):
        return np.einsum("piab,i->pab", self.vbasis.gradients, c)

    def pdf_values(self, d):
        """PDF ratio at ``(x, q)`` nodes, shape ``(P, Q)``."""
        D = self.pbasis.to_matrix(d)
        return (self.X @ D) @ self.Q.T

    def pdf_x_gradient(self, d):
        D = self.pbasis.to_matrix(d)
        return np.einsum("pac,ab,qb->pqc", self.dX, D, self.Q)

    def pdf_q_gradient(self, d):
        D = self.pbasis.to_matrix(d)
        return np.einsum("pa,ab,qbjc->pqjc", self.X, D, self.cbasis.gradients)

    def project_pdf(self, values):
        """``L^2_{M^m}`` projection of ``(P, Q)`` node values onto the PDF basis."""
        inner = self.torus.weight * (self.X.T @ (values * self.wMm[None, :]) @ self.Q)
        return self.pbasis.gather(inner)

    def stress(self, rho, xi_values):
        """Divergence-form polymer stress from ratio values; negative values are clamped."""
        pos = np.maximum(xi_values, 0.0)
        T = self.cutoff.truncation(pos)
        zeta = self.laws.drag(rho)
        return self.laws.k * zeta[:, None, None] * np.einsum("pa,acd->pcd", T, self.stress_kernel)


def build_velocity_basis(m, torus):
    return VelocityBasis(m, torus)


def _check_finite(name, values, points):
    values = np.asarray(values)
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values.reshape(len(points), -1)))[0][0]
        raise FloatingPointError(f"non-finite {name} at grid node {int(bad)}, x = {tuple(points[bad])}")


def assemble_velocity_system(disc, rho, u, varrho, tau, force):
    """Velocity blocks at one time level.

    Parameters
    ----------
    disc : Discretization
    rho, varrho : ndarray, shape (P,)
        Density and polymer number density at the grid nodes.
    u : ndarray, shape (m,)
        Coefficients of the convecting velocity.
    tau : ndarray, shape (P, 2, 2)
        Polymer stress.
    force : ndarray, shape (P, 2)
        Body force.

    Returns
    -------
    VelocitySystem
        ``mass[j, i] = int rho w_i.w_j``,
        ``A[j, i] = -(int rho (u.grad) w_i . w_j + int mu D(w_i):D(w_j))``,
        ``B[j] = int rho f.w_j - int tau:grad w_j``.
    """
    pts = disc.points
    for name, val in (("density", rho), ("polymer density", varrho), ("stress", tau), ("forcing", force)):
        _check_finite(name, val, pts)
    W, G = disc.vbasis.values, disc.vbasis.gradients
    w = disc.torus.weight
    mass = w * np.einsum("p,pia,pja->ji", rho, W, W)
    uval = disc.velocity(u)
    _check_finite("convecting velocity", uval, pts)
    conv = np.einsum("pb,piab->pia", uval, G)
    C = w * np.einsum("p,pia,pja->ji", rho, conv, W)
    mu = disc.laws.viscosity(rho, varrho)
    S = 0.5 * (G + G.transpose(0, 1, 3, 2))
    V = w * np.einsum("p,piab,pjab->ji", mu, S, S)
    B = w * (np.einsum("p,pa,pja->j", rho, force, W) - np.einsum("pab,pjab->j", tau, G))
    return VelocitySystem(mass, -(C + V), B)


def pdf_mass_matrix(disc, zeta):
    """``N[i, j] = int M^m zeta phi_i phi_j``."""
    w = disc.torus.weight
    Nx = w * np.einsum("p,pa,pb->ab", zeta, disc.X, disc.X)
    return disc.pbasis.expand(Nx)


def drift_drive(disc, zeta, grad_u, xi_values):
    """``R_i = int M zeta Lambda_l(xi) (grad u) q . grad_q phi_i`` for every PDF mode."""
    lam = disc.cutoff.damped_identity(xi_values)
    Q = disc.drift_kernel.shape[-1]
    t = (lam @ disc.drift_kernel.reshape(len(disc.wq), -1)).reshape(len(lam), 2, 2, Q)
    per_node = np.einsum("pcbq,pcb->pq", t, grad_u) * (disc.torus.weight * zeta)[:, None]
    return disc.pbasis.gather(disc.X.T @ per_node)


def assemble_fp_system(disc, zeta, u, xi):
    """PDF blocks at one time level.

    Parameters
    ----------
    disc : Discretization
    zeta : ndarray, shape (P,)
        Drag coefficient at the grid nodes.
    u : ndarray, shape (m,)
        Convecting velocity coefficients.
    xi : ndarray, shape (n,)
        PDF coefficients entering the truncated drift.

    Returns
    -------
    PdfSystem
        ``L`` holds advection ``-int M^m zeta phi_j u.grad_x phi_i`` and both
        diffusions; ``R`` the truncated drift.
    """
    pts = disc.points
    _check_finite("drag", zeta, pts)
    uval = disc.velocity(u)
    _check_finite("convecting velocity", uval, pts)
    w = disc.torus.weight
    adv_x = -w * np.einsum("p,pac,pc,pb->ab", zeta, disc.dX, uval, disc.X)
    L = disc.pbasis.expand(adv_x) + disc.pdf_diffusion
    R = drift_drive(disc, zeta, disc.velocity_gradient(u), disc.pdf_values(xi))
    return PdfSystem(L, R)


def polymer_number_density(disc, zeta, xi):
    """``zeta int M^m [xi]_+ dq`` at the grid nodes, plus the fraction of clamped nodes."""
    values = disc.pdf_values(xi) if np.ndim(xi) == 1 else np.asarray(xi)
    clamped = values < 0
    dens = zeta * (np.maximum(values, 0.0) @ disc.wMm)
    return dens, float(np.mean(clamped))
