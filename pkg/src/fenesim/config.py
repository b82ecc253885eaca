"""Run configuration: a validated YAML tree that builds a :class:`ProblemSetup`.

Initial data and forcing are chosen from named built-ins so that a config
file fully determines a run. Random built-ins draw from a generator seeded
by the config's ``seed``.
"""

import math
from pathlib import Path
from typing import List, Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import ConfigError
from .model import CoefficientLaw, FeneChain, Levels, MaterialLaws, ProblemSetup, RouseSystem

TWO_PI = 2.0 * math.pi


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ChainConfig(_Strict):
    springs: int = 1
    extensibility: List[float] = Field(default_factory=lambda: [4.0])
    dimension: int = 2
    rouse_matrix: Optional[List[List[float]]] = None


class LawConfig(_Strict):
    kind: Literal["constant", "affine_rho", "affine_rho_varrho"] = "constant"
    params: List[float] = Field(default_factory=lambda: [1.0])


class LawsConfig(_Strict):
    viscosity: LawConfig = Field(default_factory=LawConfig)
    drag: LawConfig = Field(default_factory=LawConfig)
    stress_scale: float = 1.0
    rho_range: List[float] = Field(default_factory=lambda: [0.5, 2.0])
    mu_range: List[float] = Field(default_factory=lambda: [0.5, 2.0])
    zeta_range: List[float] = Field(default_factory=lambda: [0.5, 2.0])

    @field_validator("rho_range", "mu_range", "zeta_range")
    @classmethod
    def _pair(cls, v):
        if len(v) != 2:
            raise ValueError("a range is a list [lower, upper]")
        return v


class LevelsConfig(_Strict):
    ell: float = 5.0
    velocity_modes: int = 8
    pdf_modes: int = 46
    conf_modes: int = 6


class FieldConfig(_Strict):
    kind: str
    params: List[float] = Field(default_factory=list)


class InitialConfig(_Strict):
    density: FieldConfig = Field(default_factory=lambda: FieldConfig(kind="uniform", params=[1.0]))
    velocity: FieldConfig = Field(default_factory=lambda: FieldConfig(kind="rest"))
    pdf: FieldConfig = Field(default_factory=lambda: FieldConfig(kind="equilibrium", params=[1.0]))


class NumericsConfig(_Strict):
    lengths: List[float] = Field(default_factory=lambda: [TWO_PI, TWO_PI])
    grid: int = 16
    final_time: float = 0.1
    dt: float = 1e-2
    radial_order: int = 6
    angular_order: int = 12
    varrho_max: float = 2.0
    maxwellian: Literal["approximate", "exact"] = "exact"
    tol: float = 1e-10
    max_iter: int = 50
    damping: float = 1.0
    substeps: int = 10
    transport: Literal["composed", "exact"] = "composed"
    normalize_initial: bool = False
    rescale_initial_pdf: bool = False


class OutputConfig(_Strict):
    directory: str = "fenesim-out"
    cadence: int = 1
    snapshots: bool = True


class SweepConfig(_Strict):
    ell: Optional[List[float]] = None
    m: Optional[List[int]] = None
    n: Optional[List[int]] = None
    n_conf: Optional[List[int]] = None
    dt: Optional[List[float]] = None

    def ladders(self):
        return {k: v for k, v in self.model_dump().items() if v}


class RunConfig(_Strict):
    """Complete, serializable description of a run."""

    chain: ChainConfig = Field(default_factory=ChainConfig)
    laws: LawsConfig = Field(default_factory=LawsConfig)
    levels: LevelsConfig = Field(default_factory=LevelsConfig)
    initial: InitialConfig = Field(default_factory=InitialConfig)
    forcing: FieldConfig = Field(default_factory=lambda: FieldConfig(kind="none"))
    numerics: NumericsConfig = Field(default_factory=NumericsConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    tolerances: dict = Field(default_factory=dict)
    seed: int = 0


# ---------------------------------------------------------------------------
# named initial data


def _angles(x, lengths):
    return TWO_PI * x[:, 0] / lengths[0], TWO_PI * x[:, 1] / lengths[1]


def _param(spec, i, default):
    return spec.params[i] if len(spec.params) > i else default


def density_builtin(spec, lengths, rng=None):
    """``uniform(value)`` or ``wave(mean, amplitude)``: ``mean + amplitude sin x1 cos x2``."""
    if spec.kind == "uniform":
        value = _param(spec, 0, 1.0)
        return lambda x: np.full(len(x), value)
    if spec.kind == "wave":
        mean, amp = _param(spec, 0, 1.0), _param(spec, 1, 0.1)

        def rho0(x):
            a, b = _angles(x, lengths)
            return mean + amp * np.sin(a) * np.cos(b)

        return rho0
    raise ConfigError(f"initial.density.kind: unknown density {spec.kind!r}; expected 'uniform' or 'wave'")


def velocity_builtin(spec, lengths, rng):
    """Divergence-free initial velocities.

    ``rest``; ``taylor_green(amplitude)``; ``vortex_shear(amplitude)``, a
    Taylor-Green vortex plus the shear ``(0, cos x1)``; ``random(amplitude)``,
    a seeded stream function on the wavevectors with ``|n_i| <= 2``.
    """
    kind = spec.kind
    amp = _param(spec, 0, 1e-2)
    s1, s2 = TWO_PI / lengths[0], TWO_PI / lengths[1]
    if kind == "rest":
        return lambda x: np.zeros_like(x, dtype=float)
    if kind in ("taylor_green", "vortex_shear"):
        shear = 1.0 if kind == "vortex_shear" else 0.0

        def v0(x):
            a, b = _angles(x, lengths)
            u1 = s2 * np.sin(a) * np.cos(b)
            u2 = -s1 * np.cos(a) * np.sin(b)
            return amp * np.column_stack([u1, u2 + shear * np.cos(a)])

        return v0
    if kind == "random":
        modes = [(i, j) for i in range(-2, 3) for j in range(-2, 3) if (i, j) > (0, 0)]
        coef = rng.standard_normal((len(modes), 2))
        coef /= np.sum(np.abs(coef))

        def v0(x):
            # stream function sum c cos(k.x) + s sin(k.x); v = (d2 phi, -d1 phi)
            out = np.zeros_like(x, dtype=float)
            for (i, j), (c, s) in zip(modes, coef):
                k1, k2 = i * s1, j * s2
                ph = k1 * x[:, 0] + k2 * x[:, 1]
                dphi = -c * np.sin(ph) + s * np.cos(ph)
                out[:, 0] += k2 * dphi
                out[:, 1] -= k1 * dphi
            return amp * out

        return v0
    raise ConfigError(
        f"initial.velocity.kind: unknown velocity {kind!r}; expected rest, taylor_green, vortex_shear or random"
    )


def pdf_builtin(spec, lengths, chain, rng):
    """Initial PDF ratios ``psi0(x, q)``.

    ``equilibrium(value)``; ``perturbed(amplitude)``:
    ``1 + a cos x1 q1 q2 / b + a q1^2 / b`` on the first spring;
    ``random(amplitude)``: ``1 + a`` times a seeded combination of
    ``{1, cos x1, sin x2}`` and quadratic monomials of ``q / sqrt(b)``,
    scaled so the perturbation is bounded by ``a``.
    """
    kind = spec.kind
    b = chain.b[0]
    if kind == "equilibrium":
        value = _param(spec, 0, 1.0)
        return lambda x, q: np.full((len(x), len(q)), value)
    amp = _param(spec, 0, 1e-2)
    if kind == "perturbed":

        def psi0(x, q):
            a, _ = _angles(x, lengths)
            q1, q2 = q[:, 0, 0], q[:, 0, 1]
            return 1.0 + amp * np.cos(a)[:, None] * (q1 * q2 / b)[None, :] + amp * (q1 * q1 / b)[None, :]

        return psi0
    if kind == "random":
        coef = rng.standard_normal((3, 3))
        coef /= np.sum(np.abs(coef))

        def psi0(x, q):
            a, c = _angles(x, lengths)
            xs = np.column_stack([np.ones(len(x)), np.cos(a), np.sin(c)])
            z = q[:, 0, :] / math.sqrt(b)
            qs = np.column_stack([z[:, 0] ** 2, z[:, 0] * z[:, 1], z[:, 1] ** 2])
            return 1.0 + amp * xs @ coef @ qs.T

        return psi0
    raise ConfigError(f"initial.pdf.kind: unknown PDF {kind!r}; expected equilibrium, perturbed or random")


def forcing_builtin(spec, lengths):
    """``none`` or ``kolmogorov(amplitude)``: the steady body force ``(amplitude sin x2, 0)``."""
    if spec.kind == "none":
        return None
    if spec.kind == "kolmogorov":
        amp = _param(spec, 0, 1e-2)

        def force(x, t):
            _, b = _angles(x, lengths)
            return np.column_stack([amp * np.sin(b), np.zeros(len(x))])

        return force
    raise ConfigError(f"forcing.kind: unknown forcing {spec.kind!r}; expected 'none' or 'kolmogorov'")


# ---------------------------------------------------------------------------


def build_setup(cfg):
    """Translate a :class:`RunConfig` into a :class:`ProblemSetup`."""
    rng = np.random.default_rng(cfg.seed)
    c = cfg.chain
    try:
        chain = FeneChain(c.springs, tuple(c.extensibility), c.dimension)
    except ConfigError as exc:
        raise ConfigError(f"chain.extensibility: {exc}") from None
    rouse = RouseSystem(np.asarray(c.rouse_matrix)) if c.rouse_matrix is not None else RouseSystem.default(c.springs)
    L = cfg.laws
    laws = MaterialLaws(
        CoefficientLaw(L.viscosity.kind, tuple(L.viscosity.params)),
        CoefficientLaw(L.drag.kind, tuple(L.drag.params)),
        k=L.stress_scale,
        rho_min=L.rho_range[0],
        rho_max=L.rho_range[1],
        mu_min=L.mu_range[0],
        mu_max=L.mu_range[1],
        zeta_min=L.zeta_range[0],
        zeta_max=L.zeta_range[1],
    )
    lv = cfg.levels
    levels = Levels(lv.ell, lv.velocity_modes, lv.pdf_modes, lv.conf_modes)
    num = cfg.numerics
    lengths = tuple(num.lengths)
    return ProblemSetup(
        chain,
        rouse,
        laws,
        levels,
        density_builtin(cfg.initial.density, lengths),
        velocity_builtin(cfg.initial.velocity, lengths, rng),
        pdf_builtin(cfg.initial.pdf, lengths, chain, rng),
        forcing=forcing_builtin(cfg.forcing, lengths),
        lengths=lengths,
        grid=num.grid,
        final_time=num.final_time,
        dt=num.dt,
        radial_order=num.radial_order,
        angular_order=num.angular_order,
        varrho_max=num.varrho_max,
        maxwellian=num.maxwellian,
        tol=num.tol,
        max_iter=num.max_iter,
        damping=num.damping,
        substeps=num.substeps,
        transport=num.transport,
        normalize_initial=num.normalize_initial,
        rescale_initial_pdf=num.rescale_initial_pdf,
    )


def parse_config(data):
    """Validate a mapping; raises :class:`ConfigError` naming the offending key."""
    try:
        return RunConfig.model_validate(data or {})
    except ValidationError as exc:
        err = exc.errors()[0]
        key = ".".join(str(p) for p in err["loc"]) or "<root>"
        raise ConfigError(f"{key}: {err['msg']}") from None


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping at the top level")
    return parse_config(data)


def dump_config(cfg):
    """Serialize with every default written out."""
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False)


def config_schema():
    return RunConfig.model_json_schema()


def reference_config(name):
    """Built-in configs: ``equilibrium`` and ``small_data`` (the smooth reference run)."""
    if name == "equilibrium":
        return RunConfig(
            laws=LawsConfig(drag=LawConfig(kind="constant", params=[1.0])),
            levels=LevelsConfig(velocity_modes=4, pdf_modes=22),
            numerics=NumericsConfig(final_time=1.0, dt=1e-2),
        )
    if name == "small_data":
        return RunConfig(
            laws=LawsConfig(drag=LawConfig(kind="affine_rho", params=[0.5, 0.5])),
            initial=InitialConfig(
                density=FieldConfig(kind="wave", params=[1.0, 0.1]),
                velocity=FieldConfig(kind="vortex_shear", params=[1e-2]),
                pdf=FieldConfig(kind="perturbed", params=[1e-2]),
            ),
            numerics=NumericsConfig(final_time=0.4, dt=1e-2),
        )
    raise ConfigError(f"unknown reference config {name!r}")
