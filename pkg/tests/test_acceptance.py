"""Acceptance criteria 1-10, each at its stated tolerance.

Every test records one PASS/FAIL line, printed in the terminal summary.
"""

import math
from dataclasses import replace

import numpy as np

from conftest import record, small_data_setup
from fenesim.confspace import ConfQuadrature, Maxwellian, kramers_stress, partition_function
from fenesim.diagnostics import energy, invariant_suite, nikolskii_norm, pdf_mass, fluid_mass
from fenesim.galerkin import Discretization
from fenesim.model import FeneChain, MaterialLaws, CoefficientLaw, RouseSystem, fene_potential_derivative
from fenesim.solver import run, trajectory_distance
from fenesim.transport import AnalyticVelocity, CharMap
from fenesim.truncation import CutoffFamily

# calibrated once on the reference small-data run (dt ladder 2e-2, 1e-2, 5e-3 gives
# at most 0.039) and frozen
C_CAL = 0.05

B_MATRIX = (2.0, 4.0, 12.0)
D_MATRIX = (2, 3)


def _ball_quadrature(b, d, radial=12, angular=24):
    return ConfQuadrature(FeneChain(1, (b,), d) if b > 2 else _Chain(b, d), radial, angular)


class _Chain:
    # b = 2 is admissible for the quadrature and Maxwellian primitives only
    def __init__(self, b, d):
        self.K, self.b, self.d = 1, (b,), d


def test_criterion_01_maxwellian_normalization():
    worst = 0.0
    for b in B_MATRIX:
        for d in D_MATRIX:
            quad = _ball_quadrature(b, d)
            worst = max(worst, abs(np.sum(quad.weights * Maxwellian(b, d)(quad.nodes)) - 1.0))
    z_err = abs(partition_function(2.0, 2) - math.pi)
    ok = worst <= 1e-10 and z_err <= 1e-10
    record(1, "Maxwellian normalization", ok, f"max |int M - 1| = {worst:.2e}, |Z(2,2) - pi| = {z_err:.2e}")
    assert ok


def _random_psi(disc, rng, amplitude=0.3):
    coeffs = np.zeros(disc.pbasis.n)
    coeffs[0] = 1.0 / disc.pdf_values(np.eye(disc.pbasis.n)[0]).mean()
    coeffs[1:] = amplitude * rng.standard_normal(disc.pbasis.n - 1) / disc.pbasis.n
    return coeffs


def test_criterion_02_kramers_identity_and_stress_forms():
    identity_err = 0.0
    for b in B_MATRIX:
        for d in D_MATRIX:
            quad = _ball_quadrature(b, d)
            q = quad.nodes[:, 0, :]
            s = 0.5 * np.sum(q * q, axis=1)
            w = quad.weights * Maxwellian(b, d)(quad.nodes) * fene_potential_derivative(s, b)
            moment = np.einsum("a,ac,ad->cd", w, q, q)
            identity_err = max(identity_err, np.max(np.abs(moment - np.eye(d))))

    laws = MaterialLaws(CoefficientLaw("constant", (1.0,)), CoefficientLaw("affine_rho", (0.5, 0.5)))
    rho = np.array([0.7, 1.0, 1.6])
    eq_err = 0.0
    for b in (4.0, 12.0):
        quad = ConfQuadrature(FeneChain(1, (b,), 2), 10, 20)
        psi = np.ones((len(rho), len(quad)))
        grad = np.zeros((len(rho), len(quad), 1, 2))
        for form in ("kramers", "divergence", "gradient"):
            tau, _ = kramers_stress(quad, laws, rho, psi, 5.0, form, grad)
            eq_err = max(eq_err, np.max(np.abs(tau)))

    rng = np.random.default_rng(7)
    setup = small_data_setup()
    dev = 0.0
    for b in (4.0, 12.0):
        s = replace(setup, chain=FeneChain(1, (b,), 2), radial_order=10, angular_order=20)
        disc = Discretization(s)
        coeffs = _random_psi(disc, rng)
        assert np.min(disc.pdf_values(coeffs)) > 0 and np.max(disc.pdf_values(coeffs)) < disc.levels.ell
        rho_x = s.rho0(disc.points)
        psi = disc.pdf_values(coeffs)
        grad = disc.pdf_q_gradient(coeffs)
        forms = [kramers_stress(disc.quad, disc.laws, rho_x, psi, disc.levels.ell, f, grad)[0]
                 for f in ("kramers", "divergence", "gradient")]
        dev = max(dev, max(np.max(np.abs(forms[i] - forms[j])) for i, j in ((0, 1), (0, 2), (1, 2))))
    ok = identity_err <= 1e-10 and eq_err <= 1e-9 and dev <= 1e-7
    record(2, "Kramers identity and stress forms", ok,
           f"identity {identity_err:.2e}, equilibrium tau {eq_err:.2e}, form deviation {dev:.2e}")
    assert ok


def test_criterion_03_rouse_coercivity():
    rng = np.random.default_rng(3)
    violations = 0
    for K in (1, 2, 3, 5):
        rouse = RouseSystem.default(K)
        # eigenvalues of the (2, -1) tridiagonal matrix
        lam = 2.0 - 2.0 * np.cos(np.arange(1, K + 1) * np.pi / (K + 1))
        c1, c2 = lam.min(), lam.max()
        B = rng.standard_normal((2500, 2, K))
        AB = B @ rouse.A
        form = np.einsum("nik,nik->n", AB, B)
        norm2 = np.einsum("nik,nik->n", B, B)
        tol = 1e-12 * norm2
        violations += int(np.count_nonzero((form < c1 * norm2 - tol) | (form > c2 * norm2 + tol)))
    ok = violations == 0
    record(3, "Rouse coercivity", ok, f"{violations} violations in 10^4 samples")
    assert ok


def _tg(x, s):
    return np.column_stack([np.sin(x[:, 0]) * np.cos(x[:, 1]), -np.cos(x[:, 0]) * np.sin(x[:, 1])])


def _tg_grad(x, s):
    c1, s1, c2, s2 = np.cos(x[:, 0]), np.sin(x[:, 0]), np.cos(x[:, 1]), np.sin(x[:, 1])
    g = np.empty((len(x), 2, 2))
    g[:, 0, 0], g[:, 0, 1] = c1 * c2, -s1 * s2
    g[:, 1, 0], g[:, 1, 1] = s1 * s2, -c1 * c2
    return g


def test_criterion_04_transport_exactness(dt_ladder, long_run):
    rng = np.random.default_rng(4)
    x = rng.uniform(0, 2 * np.pi, (400, 2))
    V = np.array([0.7, -0.3])
    const = AnalyticVelocity(lambda y, s: np.broadcast_to(V, y.shape), lambda y, s: np.zeros((len(y), 2, 2)))
    rho0 = lambda y: np.sin(y[:, 0]) + 2.0
    err_const = np.max(np.abs(CharMap(const, 1e-3).density(rho0, x, 1.3) - (np.sin(x[:, 0] - 1.3 * V[0]) + 2.0)))
    # the stream function sin x1 sin x2 is constant along Taylor-Green particle paths
    tg = CharMap(AnalyticVelocity(_tg, _tg_grad), 1e-3)
    stream = lambda y: 2.0 + np.sin(y[:, 0]) * np.sin(y[:, 1])
    err_tg = np.max(np.abs(tg.density(stream, x, 1.0) - stream(x)))
    det_err = np.max(np.abs(tg.jacobian_det(x, 1.0) - 1.0))
    excursion = max(
        row.worst for tr in list(dt_ladder.values()) + [long_run]
        for row in invariant_suite(tr) if row.name == "density_bounds"
    )
    ok = err_const <= 1e-8 and err_tg <= 1e-8 and det_err <= 1e-8 and excursion == 0.0
    record(4, "transport exactness", ok,
           f"constant {err_const:.2e}, Taylor-Green {err_tg:.2e}, |det - 1| {det_err:.2e}, range excursion {excursion}")
    assert ok


def test_criterion_05_energy_inequality(dt_ladder):
    rates, finals = {}, {}
    for dt, tr in dt_ladder.items():
        rep = energy(tr)
        t = np.asarray(tr.times)
        rates[dt] = float(np.max(rep.residual[1:] / t[1:]))
        finals[dt] = float(np.max(rep.residual))
    bound_ok = all(rates[dt] <= C_CAL * dt * dt for dt in rates)
    dts = sorted(finals, reverse=True)
    decrease = [finals[a] / finals[b] for a, b in zip(dts, dts[1:])]
    total = energy(dt_ladder[5e-3]).total
    rise = float(np.max(np.diff(total)))
    ok = bound_ok and min(decrease) >= 3.0 and rise <= 1e-8
    detail = ", ".join(f"dt={dt:g}: {rates[dt]:.2e} <= {C_CAL * dt * dt:.2e}" for dt in dts)
    record(5, "discrete energy inequality", ok,
           f"{detail}; halving ratios {', '.join(f'{r:.2f}' for r in decrease)}; largest step rise {rise:.2e}")
    assert ok


def test_criterion_06_conservation(long_run):
    disc = long_run.disc
    assert len(long_run) == 101
    fm = np.array([fluid_mass(disc, r) for r in long_run.rho])
    pm = np.array([pdf_mass(disc, d, r) for d, r in zip(long_run.pdf, long_run.rho)])
    fd, pd = float(np.max(np.abs(fm - fm[0]))), float(np.max(np.abs(pm - pm[0])))
    ok = fd <= 1e-6 and pd <= 1e-8
    record(6, "conservation over 100 steps", ok, f"fluid mass drift {fd:.2e}, PDF mass drift {pd:.2e}")
    assert ok


def test_criterion_07_equilibrium_fixed_point(equilibrium_run):
    tr = equilibrium_run
    assert len(tr) == 101
    dv = max(np.max(np.abs(c - tr.velocity[0])) for c in tr.velocity)
    dp = max(np.max(np.abs(d - tr.pdf[0])) for d in tr.pdf)
    ent = energy(tr).column("entropy")
    zeta = float(tr.disc.laws.drag(np.ones(1))[0])
    target = tr.disc.laws.k * zeta * (2 * np.pi) ** 2
    ent_err = float(np.max(np.abs(ent - target)))
    ok = max(dv, dp) <= 1e-9 and ent_err <= 1e-8
    record(7, "equilibrium fixed point", ok, f"max coefficient change {max(dv, dp):.2e}, |entropy - 4 pi^2| {ent_err:.2e}")
    assert ok


def test_criterion_08_truncation():
    rng = np.random.default_rng(8)
    violations = {}
    ell, delta = 5.0, 0.01
    fam = CutoffFamily(ell)
    s = rng.uniform(0.0, 4 * ell, 100_000)
    inside = s <= ell
    violations["identity"] = int(np.count_nonzero(
        (np.abs(fam.truncation(s[inside]) - s[inside]) > 1e-12)
        | (fam.cutoff(s[inside]) != 1.0)
        | (np.abs(fam.damped_identity(s[inside]) - s[inside]) > 0)
    ))
    outside = s >= 2 * ell
    sat = fam.truncation(np.array([2 * ell]))[0]
    violations["support"] = int(np.count_nonzero(
        (fam.cutoff(s[outside]) != 0.0) | (fam.damped_identity(s[outside]) != 0.0)
        | (np.abs(fam.truncation(s[outside]) - sat) > 1e-12)
    ))
    a, b = rng.uniform(-4 * ell, 4 * ell, (2, 100_000))
    violations["lipschitz"] = int(np.count_nonzero(
        np.abs(fam.truncation(a) - fam.truncation(b)) > np.abs(a - b) * (1 + 1e-12) + 1e-15
    ))
    s_reg = rng.uniform(0.0, 4 * ell, 100_000)
    gap = np.abs(fam.regularized_truncation(s_reg, delta) - fam.truncation(s_reg))
    bound = delta * math.log(1 + ell / delta)
    violations["regularized_bound"] = int(np.count_nonzero(gap > bound * (1 + 1e-12)))

    base = small_data_setup(final_time=0.2)
    ref = run(base)
    max_psi = max(float(np.max(ref.disc.pdf_values(d))) for d in ref.pdf)
    dist = trajectory_distance(ref, run(base, replace(base.levels, ell=10.0)))
    ok = not any(violations.values()) and max_psi < ell and dist <= 1e-12
    detail = ", ".join(f"{k} {v}" for k, v in violations.items())
    record(8, "truncation correctness", ok,
           f"violations: {detail} (worst regularized gap {gap.max():.4f} vs bound {bound:.4f}); "
           f"ell-distance {dist:.2e}")
    assert ok


def test_criterion_09_self_convergence(dt_ladder):
    d1 = trajectory_distance(dt_ladder[2e-2], dt_ladder[1e-2])
    d2 = trajectory_distance(dt_ladder[1e-2], dt_ladder[5e-3])
    ratio = d1 / d2

    base = small_data_setup(final_time=0.2)
    ladder = [46, 74, 106, 142]
    trajs = [run(base, replace(base.levels, n=n)) for n in ladder]
    dists = [trajectory_distance(a, b) for a, b in zip(trajs, trajs[1:])]
    monotone = all(x > y for x, y in zip(dists, dists[1:]))

    t = np.linspace(0.0, 1.0, 201)
    value = nikolskii_norm(t[:, None], t, 0.125)
    h = t[1:-1]
    exact = float(np.max(h ** 0.875 * np.sqrt(1.0 - h)))
    nik_err = abs(value - exact) / exact
    ok = ratio >= 3.5 and monotone and nik_err <= 0.02
    record(9, "self-convergence", ok,
           f"dt ratio {ratio:.2f}, n-ladder distances {', '.join(f'{x:.2e}' for x in dists)}, "
           f"Nikolskii relative error {nik_err:.2e}")
    assert ok


def test_criterion_10_polymer_density_maximum_principle(dt_ladder, long_run):
    worst = -np.inf
    for tr in list(dt_ladder.values()) + [long_run]:
        disc = tr.disc
        lam = np.array([disc.pdf_values(d) @ disc.wMm for d in tr.pdf])
        worst = max(worst, float(np.max(lam) - np.max(lam[0])))
    ok = worst <= 1e-6
    record(10, "polymer density maximum principle", ok, f"max growth of lambda {worst:.2e}")
    assert ok
