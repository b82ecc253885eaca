"""Configuration space: Maxwellians, quadrature on FENE balls, weighted basis, polymer stress."""

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement
from math import comb

import numpy as np
from scipy.special import roots_jacobi

from .errors import ConfigError, DomainError, QuadratureError
from .truncation import CutoffFamily

STRESS_FORMS = ("kramers", "divergence", "gradient")


def _check_extensibility(b):
    if not b >= 2.0:
        raise DomainError(f"extensibility b = {b} must be at least 2")


@lru_cache(maxsize=None)
def _radial_rule(b, d, order):
    """Nodes in ``t = r^2/b`` and plain weights for ``int_0^sqrt(b) r^(d-1) f dr``.

    Gauss-Jacobi in ``x = 2t - 1`` with weight ``(1-x)^(b/2-1) (1+x)^((d-2)/2)``,
    which makes ``M * polynomial`` and ``M * U' * polynomial`` exact.
    """
    alpha = 0.5 * b - 1.0
    beta = 0.5 * (d - 2)
    x, w = roots_jacobi(order, alpha, beta)
    t = 0.5 * (1.0 + x)
    # int_0^sqrt(b) r^(d-1) f dr = b^(d/2)/4 * 2^-beta int (1+x)^beta f dx
    plain = 0.25 * b ** (0.5 * d) * 2.0 ** (-beta) * w / (1.0 - x) ** alpha
    return t, plain


@lru_cache(maxsize=None)
def _sphere_rule(d, order):
    """Directions and weights on the unit sphere ``S^(d-1)``."""
    if d == 2:
        theta = 2.0 * np.pi * np.arange(order) / order
        dirs = np.column_stack([np.cos(theta), np.sin(theta)])
        return dirs, np.full(order, 2.0 * np.pi / order)
    c, wc = np.polynomial.legendre.leggauss(order)
    n_phi = 2 * order
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    s = np.sqrt(1.0 - c * c)
    dirs = np.stack(
        [np.outer(s, np.cos(phi)), np.outer(s, np.sin(phi)), np.outer(c, np.ones(n_phi))], axis=-1
    ).reshape(-1, 3)
    w = np.outer(wc, np.full(n_phi, 2.0 * np.pi / n_phi)).ravel()
    return dirs, w


class BallRule:
    """Quadrature on the ball of radius ``sqrt(b)`` in ``d`` dimensions.

    Parameters
    ----------
    b : float
        Extensibility (``b >= 2``).
    d : int
        Dimension, 2 or 3.
    radial_order, angular_order : int
        Radial Gauss-Jacobi nodes; angular nodes (trapezoid in 2D, Gauss
        points in the polar cosine in 3D with twice as many azimuths).
    """

    def __init__(self, b, d, radial_order, angular_order):
        _check_extensibility(b)
        if d not in (2, 3):
            raise DomainError("dimension must be 2 or 3")
        if radial_order < 1 or angular_order < 1:
            raise QuadratureError("quadrature orders must be positive")
        self.b, self.d = float(b), int(d)
        self.radial_order, self.angular_order = int(radial_order), int(angular_order)
        t, wr = _radial_rule(self.b, self.d, self.radial_order)
        dirs, wa = _sphere_rule(self.d, self.angular_order)
        r = np.sqrt(self.b * t)
        self.nodes = (r[:, None, None] * dirs[None, :, :]).reshape(-1, self.d)
        self.weights = np.outer(wr, wa).ravel()

    @property
    def exact_degree(self):
        """Largest total degree ``p`` with ``(1-|q|^2/b)^(b/2) * poly_p`` integrated exactly."""
        radial = 2 * (2 * self.radial_order - 2)
        angular = self.angular_order - 1 if self.d == 2 else 2 * self.angular_order - 1
        return max(0, min(radial, angular))

    def integrate(self, values):
        return np.tensordot(values, self.weights, axes=([-1], [0]))


def partition_function(b, d, radial_order=None):
    """Normalization ``Z = int_{|q| < sqrt(b)} (1 - |q|^2/b)^(b/2) dq``.

    Evaluated with the radial Gauss-Jacobi rule, which is exact here.
    """
    _check_extensibility(b)
    t, w = _radial_rule(float(b), int(d), radial_order or 4)
    area = 2.0 * np.pi if d == 2 else 4.0 * np.pi
    return float(area * np.sum(w * (1.0 - t) ** (0.5 * b)))


class Maxwellian:
    """Normalized Maxwellian ``M(q) = prod_j (1 - |q_j|^2/b_j)^(b_j/2) / Z_j``.

    Parameters
    ----------
    b : sequence of float
        Extensibility per spring (``b_j >= 2``).
    d : int
        Dimension of each spring vector.
    """

    def __init__(self, b, d):
        self.b = tuple(float(x) for x in np.atleast_1d(b))
        for bj in self.b:
            _check_extensibility(bj)
        self.d = int(d)
        self.K = len(self.b)
        self.Z = tuple(partition_function(bj, self.d) for bj in self.b)
        self._b = np.asarray(self.b)
        self._Z = np.asarray(self.Z)

    @classmethod
    def from_chain(cls, chain):
        return cls(chain.b, chain.d)

    def _reduced(self, q, strict=False):
        q = np.asarray(q, dtype=float)
        if q.shape[-2:] != (self.K, self.d):
            raise ValueError(f"configurations must have trailing shape {(self.K, self.d)}, got {q.shape}")
        t = np.sum(q * q, axis=-1) / self._b
        if np.any(t > 1.0 + 1e-12) or (strict and np.any(t >= 1.0)):
            raise DomainError("configuration outside the admissible domain")
        return q, np.minimum(t, 1.0)

    def spring_factors(self, q):
        """Per-spring Maxwellians, shape ``(..., K)``."""
        q, t = self._reduced(q)
        return (1.0 - t) ** (0.5 * self._b) / self._Z

    def __call__(self, q):
        return np.prod(self.spring_factors(q), axis=-1)

    def log(self, q):
        q, t = self._reduced(q, strict=True)
        return np.sum(0.5 * self._b * np.log1p(-t) - np.log(self._Z), axis=-1)

    def gradient(self, q):
        """Gradient with respect to each spring vector, shape ``(..., K, d)``."""
        q, t = self._reduced(q)
        f = (1.0 - t) ** (0.5 * self._b) / self._Z
        # d/dq_j of spring factor j: -(1 - t_j)^(b_j/2 - 1) q_j / Z_j
        df = -((1.0 - t) ** (0.5 * self._b - 1.0) / self._Z)[..., None] * q
        out = np.empty_like(q)
        for j in range(self.K):
            others = np.prod(np.delete(f, j, axis=-1), axis=-1)
            out[..., j, :] = df[..., j, :] * others[..., None]
        return out

    def spring_force_factor(self, q):
        """``U'_j(|q_j|^2/2) = 1/(1 - |q_j|^2/b_j)``, shape ``(..., K)``."""
        q, t = self._reduced(q, strict=True)
        return 1.0 / (1.0 - t)


def maxwellian_eval(chain_or_maxwellian, q):
    """Evaluate the Maxwellian of a chain (or a :class:`Maxwellian`) at ``q`` of shape ``(..., K, d)``."""
    m = chain_or_maxwellian
    if not isinstance(m, Maxwellian):
        m = Maxwellian.from_chain(m)
    q = np.asarray(q, dtype=float)
    if np.any(np.sum(q * q, axis=-1) > np.asarray(m.b) * (1 + 1e-12)):
        raise DomainError("configuration outside the admissible domain")
    return m(q)


class ApproxMaxwellian:
    """Maxwellian raised by a floor: ``M^m = M (1 - exp(-m M)) + 1/m``.

    The core ``M (1 - exp(-m M))`` is positive inside the domain, vanishes on
    the boundary and differs from ``M`` by at most ``1/(e m)``.  With
    ``exact=True`` the object stands for the unmodified Maxwellian.
    """

    def __init__(self, maxwellian, m, exact=False):
        if not exact and (int(m) != m or m < 1):
            raise ConfigError(f"Maxwellian index must be a positive integer, got {m}")
        self.maxwellian = maxwellian
        self.m = m
        self.exact = bool(exact)

    @property
    def floor(self):
        return 0.0 if self.exact else 1.0 / self.m

    def core(self, q):
        M = self.maxwellian(q)
        if self.exact:
            return M
        return -M * np.expm1(-self.m * M)

    def __call__(self, q):
        return self.core(q) + self.floor

    def sup_defect(self):
        """Bound on ``|core - M|`` over the domain: the maximum of ``x exp(-m x)`` for ``0 <= x <= max M``."""
        if self.exact:
            return 0.0
        top = float(np.prod(1.0 / np.asarray(self.maxwellian.Z)))
        x = min(top, 1.0 / self.m)
        return x * np.exp(-self.m * x)


class ConfQuadrature:
    """Tensor quadrature on the product of spring balls.

    Attributes
    ----------
    nodes : numpy.ndarray
        Shape ``(Q, K, d)``.
    weights : numpy.ndarray
        Plain weights, ``sum(w f(q)) ~ int_D f dq``.
    maxwellian_weights : numpy.ndarray
        ``weights * M(nodes)``.
    """

    def __init__(self, chain, radial_order, angular_order, maxwellian=None):
        self.chain = chain
        self.radial_order, self.angular_order = int(radial_order), int(angular_order)
        rules = [BallRule(bj, chain.d, radial_order, angular_order) for bj in chain.b]
        nodes, weights = rules[0].nodes[:, None, :], rules[0].weights
        for rule in rules[1:]:
            n1, n2 = len(weights), len(rule.weights)
            nodes = np.concatenate(
                [np.repeat(nodes, n2, axis=0), np.tile(rule.nodes[:, None, :], (n1, 1, 1))], axis=1
            )
            weights = np.outer(weights, rule.weights).ravel()
        self.nodes = nodes
        self.weights = weights
        self.exact_degree = min(r.exact_degree for r in rules)
        self.maxwellian = maxwellian or Maxwellian.from_chain(chain)
        self.maxwellian_weights = weights * self.maxwellian(nodes)

    def __len__(self):
        return len(self.weights)

    def integrate(self, values, weight=None):
        w = self.weights if weight is None else self.weights * weight
        return np.tensordot(values, w, axes=([-1], [0]))


def _monomial_exponents(nvars, max_degree):
    """Exponent tuples of all monomials up to ``max_degree``, graded then lexicographic."""
    out = []
    for deg in range(max_degree + 1):
        for combo in combinations_with_replacement(range(nvars), deg):
            e = [0] * nvars
            for v in combo:
                e[v] += 1
            out.append(tuple(e))
    return np.array(out, dtype=int).reshape(len(out), nvars)


def _monomials(z, exps):
    """Monomial values and gradients at scaled points ``z`` of shape ``(N, nvars)``."""
    powers = z[:, None, :] ** exps[None, :, :]
    values = np.prod(powers, axis=-1)
    grads = np.empty(values.shape + (z.shape[1],))
    for v in range(z.shape[1]):
        e = exps[:, v]
        dp = np.where(e[None, :] > 0, e[None, :] * z[:, None, v] ** np.maximum(e - 1, 0)[None, :], 0.0)
        rest = np.prod(np.delete(powers, v, axis=-1), axis=-1)
        grads[..., v] = dp * rest
    return values, grads


@dataclass
class ConfBasis:
    """Orthonormal configuration basis in the ``M^m``-weighted inner product.

    Attributes
    ----------
    coeffs : numpy.ndarray
        ``(n_conf, n_monomials)`` expansion in scaled monomials ``q_j / sqrt(b_j)``.
    values : numpy.ndarray
        ``(Q, n_conf)`` values at the quadrature nodes.
    gradients : numpy.ndarray
        ``(Q, n_conf, K, d)`` configuration gradients at the nodes.
    degrees : numpy.ndarray
        Polynomial degree of each function.
    gram_residual : float
        ``max |<Q_a, Q_b> - delta_ab|`` in the discrete inner product.
    """

    exponents: np.ndarray
    scale: np.ndarray
    coeffs: np.ndarray
    values: np.ndarray
    gradients: np.ndarray
    degrees: np.ndarray
    weights: np.ndarray
    gram_residual: float

    @property
    def n_conf(self):
        return self.coeffs.shape[0]

    def evaluate(self, q):
        q = np.asarray(q, dtype=float)
        z = (q / self.scale[:, None]).reshape(len(q), -1)
        vals, _ = _monomials(z, self.exponents)
        return vals @ self.coeffs.T

    def gradient(self, q):
        q = np.asarray(q, dtype=float)
        K, d = q.shape[1:]
        z = (q / self.scale[:, None]).reshape(len(q), -1)
        _, grads = _monomials(z, self.exponents)
        g = np.einsum("bm,nmv->nbv", self.coeffs, grads)
        return g.reshape(len(q), -1, K, d) / self.scale[None, None, :, None]


def monomial_count(nvars, degree):
    return comb(nvars + degree, degree)


def build_conf_basis(n_conf, approx, quad):
    """Gram-Schmidt basis of ``n_conf`` polynomials orthonormal in ``L^2_{M^m}``.

    Parameters
    ----------
    n_conf : int
        Number of basis functions; the first is the constant.
    approx : ApproxMaxwellian
        Weight of the inner product.
    quad : ConfQuadrature
        Quadrature defining the discrete inner product.

    Returns
    -------
    ConfBasis

    Raises
    ------
    QuadratureError
        If the quadrature cannot resolve the products of the requested
        polynomials, or the Gram-Schmidt step loses rank.
    """
    chain = quad.chain
    nvars = chain.K * chain.d
    degree = 0
    while monomial_count(nvars, degree) < n_conf:
        degree += 1
    if 2 * degree > quad.exact_degree:
        raise QuadratureError(
            f"quadrature resolves products up to degree {quad.exact_degree}; "
            f"basis of size {n_conf} needs degree {degree} (products of degree {2 * degree})"
        )
    exps = _monomial_exponents(nvars, degree)[:n_conf]
    scale = np.sqrt(np.asarray(chain.b))
    z = (quad.nodes / scale[:, None]).reshape(len(quad), -1)
    mono, _ = _monomials(z, exps)
    w = quad.weights * approx(quad.nodes)
    V = mono.copy()
    C = np.eye(n_conf)
    for j in range(n_conf):
        before = np.sqrt(np.sum(w * V[:, j] ** 2))
        for _ in range(2):
            for i in range(j):
                proj = np.sum(w * V[:, i] * V[:, j])
                V[:, j] -= proj * V[:, i]
                C[j] -= proj * C[i]
        norm = np.sqrt(np.sum(w * V[:, j] ** 2))
        if not norm > 1e-10 * before:
            raise QuadratureError(f"rank deficiency at polynomial degree {int(exps[j].sum())}")
        V[:, j] /= norm
        C[j] /= norm
    gram = (V * w[:, None]).T @ V
    resid = float(np.max(np.abs(gram - np.eye(n_conf))))
    basis = ConfBasis(exps, scale, C, V, None, exps.sum(axis=1), w, resid)
    basis.gradients = basis.gradient(quad.nodes)
    return basis


def kramers_stress(quad, laws, rho, psi, ell, form="divergence", psi_grad=None, maxwellian=None):
    """Polymer extra stress at spatial nodes from PDF-ratio values at ``(x, q)`` nodes.

    Parameters
    ----------
    quad : ConfQuadrature
    laws : MaterialLaws
        Supplies ``k`` and the drag ``zeta(rho)``.
    rho : numpy.ndarray
        Density at ``P`` spatial nodes.
    psi : numpy.ndarray
        ``(P, Q)`` values of the PDF ratio; negative values are clamped to 0.
    ell : float
        Truncation level.
    form : {"kramers", "divergence", "gradient"}
        ``kramers`` integrates the truncated PDF against the spring force,
        ``divergence`` against the Maxwellian gradient, ``gradient`` pairs
        the configuration gradient of the truncated ratio with ``q``.
    psi_grad : numpy.ndarray, optional
        ``(P, Q, K, d)`` configuration gradients, needed for ``gradient``.
    maxwellian : Maxwellian, optional
        Defaults to the quadrature's Maxwellian.

    Returns
    -------
    tau : numpy.ndarray
        ``(P, d, d)`` stress.
    clamped : int
        Number of nodes where ``psi`` was negative.
    """
    if form not in STRESS_FORMS:
        raise ValueError(f"unknown stress form {form!r}; expected one of {STRESS_FORMS}")
    maxw = maxwellian or quad.maxwellian
    psi = np.asarray(psi, dtype=float)
    clamped = int(np.count_nonzero(psi < 0))
    pos = np.maximum(psi, 0.0)
    cut = CutoffFamily(ell)
    q = quad.nodes
    K, d = q.shape[1:]
    M = maxw(q)
    eye = np.eye(d)
    if form == "gradient":
        if psi_grad is None:
            raise ValueError("gradient form needs configuration gradients of psi")
        factor = cut.cutoff(pos) * (psi > 0)
        kernel = np.einsum("a,pa,pajc,ajd->pcd", quad.weights * M, factor, psi_grad, q)
    else:
        T = cut.truncation(pos)
        if form == "kramers":
            force = maxw.spring_force_factor(q)
            S = np.einsum("a,aj,ajc,ajd->acd", quad.weights * M, force, q, q) - K * (
                quad.weights * M
            )[:, None, None] * eye
        else:
            gradM = maxw.gradient(q)
            S = -K * (quad.weights * M)[:, None, None] * eye - np.einsum(
                "a,ajc,ajd->acd", quad.weights, gradM, q
            )
        kernel = np.einsum("pa,acd->pcd", T, S)
    zeta = laws.drag(np.asarray(rho, dtype=float))
    return laws.k * zeta[:, None, None] * kernel, clamped
