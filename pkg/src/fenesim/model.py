"""Physical model: FENE springs, Rouse coupling, coefficient laws and problem setup."""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, DomainError

# centre-of-mass diffusion and Deborah number are fixed by the model's normalization
CENTRE_OF_MASS_DIFFUSION = 1.0
DEBORAH = 0.25


def fene_potential(s, b):
    """FENE spring potential ``-(b/2) log(1 - 2 s / b)``.

    Parameters
    ----------
    s : array_like
        Half squared spring length, ``0 <= s < b/2``.
    b : float
        Extensibility parameter.

    Returns
    -------
    numpy.ndarray
        Potential values, zero at ``s = 0`` and unbounded as ``s -> b/2``.
    """
    s = np.asarray(s, dtype=float)
    _check_spring_range(s, b)
    return -0.5 * b * np.log1p(-2.0 * s / b)


def fene_potential_derivative(s, b):
    """Derivative ``b / (b - 2 s)`` of :func:`fene_potential`."""
    s = np.asarray(s, dtype=float)
    _check_spring_range(s, b)
    return b / (b - 2.0 * s)


def _check_spring_range(s, b):
    if np.any(s < 0):
        raise DomainError("spring argument must be nonnegative")
    if np.any(s >= 0.5 * b):
        raise DomainError(f"spring beyond full extension: s must be < b/2 = {0.5 * b}")


@dataclass(frozen=True)
class FeneChain:
    """Bead-spring chain of ``K`` FENE springs in ``d`` dimensions.

    Each spring ``j`` lives in the open ball of radius ``sqrt(b[j])``; the
    configuration domain is the product of these balls.
    """

    K: int
    b: tuple
    d: int = 2

    def __post_init__(self):
        b = tuple(float(x) for x in np.atleast_1d(self.b))
        object.__setattr__(self, "b", b)
        if int(self.K) != self.K or self.K < 1:
            raise ConfigError(f"number of springs K must be a positive integer, got {self.K}")
        if len(b) != self.K:
            raise ConfigError(f"expected {self.K} extensibility parameters, got {len(b)}")
        for j, bj in enumerate(b):
            if not bj > 2.0:
                raise ConfigError(
                    f"extensibility b[{j}] = {bj} violates the constraint b > 2 "
                    "(the Maxwellian must vanish faster than linearly at the ball boundary)"
                )
        if self.d not in (2, 3):
            raise ConfigError(f"spatial dimension must be 2 or 3, got {self.d}")

    @property
    def radii(self):
        return np.sqrt(np.asarray(self.b))

    def contains(self, q):
        """Return a mask of configurations ``q`` (shape ``(..., K, d)``) inside the domain."""
        q = np.asarray(q, dtype=float)
        r2 = np.sum(q * q, axis=-1)
        return np.all(r2 < np.asarray(self.b), axis=-1)


def rouse_matrix(K):
    """Classical Rouse chain matrix: 2 on the diagonal, -1 next to it."""
    A = 2.0 * np.eye(K)
    idx = np.arange(K - 1)
    A[idx, idx + 1] = -1.0
    A[idx + 1, idx] = -1.0
    return A


def rouse_apply(A, B):
    """Apply the Rouse coupling to a ``d x K`` matrix: returns ``B @ A``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if B.shape[-1] != A.shape[0] or A.shape[0] != A.shape[1]:
        raise ValueError(f"shape mismatch: B {B.shape} with A {A.shape}")
    return B @ A


@dataclass(frozen=True)
class RouseSystem:
    """Symmetric positive-definite Rouse matrix with its extreme eigenvalues."""

    A: np.ndarray
    C1: float = field(init=False)
    C2: float = field(init=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float, ndmin=2)
        if A.shape[0] != A.shape[1]:
            raise ConfigError(f"Rouse matrix must be square, got shape {A.shape}")
        if not np.allclose(A, A.T, rtol=0, atol=1e-14):
            raise ConfigError("Rouse matrix must be symmetric")
        eig = np.linalg.eigvalsh(A)
        if eig[0] <= 0:
            raise ConfigError(f"Rouse matrix must be positive definite, smallest eigenvalue {eig[0]}")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "C1", float(eig[0]))
        object.__setattr__(self, "C2", float(eig[-1]))

    @classmethod
    def default(cls, K):
        return cls(rouse_matrix(K))

    @property
    def K(self):
        return self.A.shape[0]

    def apply_springs(self, G):
        """Couple spring gradients stored as ``(..., K, d)``: ``out[j] = sum_i A[j, i] G[i]``."""
        return np.einsum("ji,...id->...jd", self.A, G)


@dataclass(frozen=True)
class CoefficientLaw:
    """Named coefficient law.

    Kinds
    -----
    ``constant``
        ``params = (value,)``.
    ``affine_rho``
        ``a + b * rho`` with ``params = (a, b)``; not clamped.
    ``affine_rho_varrho``
        ``a + b * rho + c * varrho`` with ``params = (a, b, c)``, clamped to
        the declared range of the law.
    """

    kind: str
    params: tuple
    lower: float = -np.inf
    upper: float = np.inf

    KINDS = ("constant", "affine_rho", "affine_rho_varrho")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ConfigError(f"unknown coefficient law {self.kind!r}; expected one of {self.KINDS}")
        need = {"constant": 1, "affine_rho": 2, "affine_rho_varrho": 3}[self.kind]
        params = tuple(float(p) for p in self.params)
        if len(params) != need:
            raise ConfigError(f"law {self.kind!r} takes {need} parameters, got {len(params)}")
        object.__setattr__(self, "params", params)

    def __call__(self, rho, varrho=0.0):
        rho = np.asarray(rho, dtype=float)
        p = self.params
        if self.kind == "constant":
            return np.full(np.broadcast(rho, varrho).shape, p[0])
        if self.kind == "affine_rho":
            return p[0] + p[1] * rho + 0.0 * np.asarray(varrho)
        raw = p[0] + p[1] * rho + p[2] * np.asarray(varrho, dtype=float)
        return np.clip(raw, self.lower, self.upper)

    @property
    def depends_on_density(self):
        return self.kind != "constant" and self.params[1] != 0.0

    @property
    def depends_on_polymer(self):
        return self.kind == "affine_rho_varrho" and self.params[2] != 0.0


@dataclass(frozen=True)
class MaterialLaws:
    """Viscosity ``mu(rho, varrho)``, drag ``zeta(rho)``, stress scale ``k`` and declared ranges."""

    mu: CoefficientLaw
    zeta: CoefficientLaw
    k: float = 1.0
    rho_min: float = 0.5
    rho_max: float = 2.0
    mu_min: float = 0.5
    mu_max: float = 2.0
    zeta_min: float = 0.5
    zeta_max: float = 2.0

    def __post_init__(self):
        for name in ("rho_min", "rho_max", "mu_min", "mu_max", "zeta_min", "zeta_max"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"declared bound {name} must be positive")
        for lo, hi in (("rho_min", "rho_max"), ("mu_min", "mu_max"), ("zeta_min", "zeta_max")):
            if getattr(self, lo) > getattr(self, hi):
                raise ConfigError(f"{lo} exceeds {hi}")
        if self.k < 0:
            raise ConfigError("stress scale k must be nonnegative")
        if self.mu.kind == "affine_rho_varrho":
            object.__setattr__(
                self, "mu", CoefficientLaw(self.mu.kind, self.mu.params, self.mu_min, self.mu_max)
            )

    def viscosity(self, rho, varrho):
        return self.mu(rho, varrho)

    def drag(self, rho):
        return self.zeta(rho)


@dataclass(frozen=True)
class Levels:
    """Discretization levels: truncation, velocity modes, PDF modes, configuration modes."""

    ell: float
    m: int
    n: int
    n_conf: int

    def __post_init__(self):
        if not self.ell > 0:
            raise ConfigError("truncation level must be positive")
        for name in ("m", "n", "n_conf"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigError(f"level {name} must be a positive integer, got {v}")


@dataclass(frozen=True)
class ProblemSetup:
    """Everything needed to run the discrete scheme.

    Attributes
    ----------
    chain, rouse, laws
        Model description.
    lengths : tuple of float
        Torus side lengths.
    grid : int
        Points per direction of the spatial quadrature grid.
    final_time, dt : float
        Time horizon and step.
    levels : Levels
        Truncation level and basis sizes.
    radial_order, angular_order : int
        Configuration quadrature orders per spring.
    rho0, v0 : callable
        Initial density and velocity, evaluated on points of shape ``(P, 2)``.
    psi0 : callable
        Initial PDF ratio, called as ``psi0(x, q)`` with ``x`` of shape
        ``(P, 2)`` and ``q`` of shape ``(Q, K, d)``; returns ``(P, Q)``.
    forcing : callable or None
        Body force ``forcing(x, t)`` returning ``(P, 2)``.
    """

    chain: FeneChain
    rouse: RouseSystem
    laws: MaterialLaws
    levels: Levels
    rho0: Callable
    v0: Callable
    psi0: Callable
    forcing: Optional[Callable] = None
    lengths: tuple = (2 * np.pi, 2 * np.pi)
    grid: int = 16
    final_time: float = 1.0
    dt: float = 1e-2
    radial_order: int = 8
    angular_order: int = 16
    varrho_max: float = 2.0
    maxwellian: str = "approximate"
    tol: float = 1e-10
    max_iter: int = 50
    damping: float = 1.0
    substeps: int = 10
    transport: str = "composed"
    normalize_initial: bool = False
    rescale_initial_pdf: bool = False

    def __post_init__(self):
        if self.rouse.K != self.chain.K:
            raise ConfigError("Rouse matrix size does not match the number of springs")
        if self.maxwellian not in ("approximate", "exact"):
            raise ConfigError("maxwellian must be 'approximate' or 'exact'")
        if self.transport not in ("composed", "exact"):
            raise ConfigError("transport must be 'composed' or 'exact'")
        if not self.dt > 0:
            raise ConfigError("time step must be positive")
        if self.final_time < 0:
            raise ConfigError("final time must be nonnegative")
        if not 0 < self.damping <= 1:
            raise ConfigError("damping must lie in (0, 1]")
        if self.grid < 4:
            raise ConfigError("spatial grid needs at least 4 points per direction")
        if len(self.lengths) != 2 or min(self.lengths) <= 0:
            raise ConfigError("two positive torus side lengths are required")

    @property
    def volume(self):
        return float(np.prod(self.lengths))

    @property
    def n_steps(self):
        n = self.final_time / self.dt
        steps = int(round(n))
        if abs(n - steps) > 1e-9 * max(1.0, n):
            raise ConfigError(f"final time {self.final_time} is not a multiple of dt {self.dt}")
        return steps

    def grid_points(self):
        """Uniform periodic grid, shape ``(grid * grid, 2)``, row-major in (x1, x2)."""
        x1 = np.arange(self.grid) * self.lengths[0] / self.grid
        x2 = np.arange(self.grid) * self.lengths[1] / self.grid
        X1, X2 = np.meshgrid(x1, x2, indexing="ij")
        return np.column_stack([X1.ravel(), X2.ravel()])


@dataclass
class Violation:
    check: str
    message: str
    value: float
    location: Optional[tuple] = None


@dataclass
class ValidationReport:
    violations: list
    normalization_defect: float
    entropy: float

    @property
    def ok(self):
        return not self.violations


def validate_setup(setup, samples=21):
    """Check structural assumptions on coefficients and initial data.

    Parameters
    ----------
    setup : ProblemSetup
    samples : int
        Points per axis of the ``(rho, varrho)`` sampling grid.

    Returns
    -------
    ValidationReport
        Violations with locations, the normalization defect
        ``int M zeta(rho0) psi0 - 1`` and the initial relative entropy.
    """
    from .confspace import ConfQuadrature, Maxwellian
    from .truncation import entropy_density

    laws = setup.laws
    out = []
    rho_s = np.linspace(laws.rho_min, laws.rho_max, samples)
    var_s = np.linspace(0.0, setup.varrho_max, samples)
    R, V = np.meshgrid(rho_s, var_s, indexing="ij")
    mu = laws.viscosity(R, V)
    bad = (mu < laws.mu_min - 1e-14) | (mu > laws.mu_max + 1e-14)
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        out.append(Violation("viscosity_range", f"mu = {mu[i, j]:.6g} outside [{laws.mu_min}, {laws.mu_max}]",
                             float(mu[i, j]), (float(R[i, j]), float(V[i, j]))))
    zeta = laws.drag(rho_s)
    bad = (zeta < laws.zeta_min - 1e-14) | (zeta > laws.zeta_max + 1e-14)
    if np.any(bad):
        i = int(np.argmax(bad))
        out.append(Violation("drag_range", f"zeta = {zeta[i]:.6g} outside [{laws.zeta_min}, {laws.zeta_max}]",
                             float(zeta[i]), (float(rho_s[i]),)))

    x = setup.grid_points()
    rho0 = np.asarray(setup.rho0(x), dtype=float)
    bad = (rho0 < laws.rho_min) | (rho0 > laws.rho_max)
    if np.any(bad):
        i = int(np.argmax(bad))
        out.append(Violation("initial_density_range",
                             f"rho0 = {rho0[i]:.6g} outside [{laws.rho_min}, {laws.rho_max}]",
                             float(rho0[i]), tuple(x[i])))

    quad = ConfQuadrature(setup.chain, setup.radial_order, setup.angular_order)
    maxw = Maxwellian.from_chain(setup.chain)
    psi0 = np.asarray(setup.psi0(x, quad.nodes), dtype=float)
    if np.any(psi0 < 0):
        p, a = np.unravel_index(np.argmin(psi0), psi0.shape)
        out.append(Violation("initial_pdf_nonnegative", f"psi0 = {psi0[p, a]:.6g} < 0",
                             float(psi0[p, a]), (tuple(x[p]), tuple(quad.nodes[a].ravel()))))
    wx = setup.volume / len(x)
    wm = quad.weights * maxw(quad.nodes)
    mass = wx * np.sum(laws.drag(rho0)[:, None] * psi0 * wm[None, :])
    entropy = wx * np.sum(wm[None, :] * entropy_density(np.maximum(psi0, 0.0)))
    if not np.isfinite(entropy):
        out.append(Violation("initial_entropy", "relative entropy of psi0 is not finite", float(entropy)))
    if not np.all(np.isfinite(setup.v0(x))):
        out.append(Violation("initial_velocity", "initial velocity is not finite", float("nan")))
    return ValidationReport(out, float(mass - 1.0), float(entropy))
