import numpy as np
import pytest
from dataclasses import replace

from conftest import equilibrium_setup, small_data_setup
from fenesim.diagnostics import (
    energy,
    energy_pairing_defect,
    energy_terms,
    invariant_suite,
    nikolskii_norm,
    stress_form_consistency,
)
from fenesim.galerkin import Discretization


@pytest.fixture(scope="module")
def eq_disc():
    return Discretization(equilibrium_setup())


@pytest.fixture(scope="module")
def sd_disc():
    return Discretization(small_data_setup())


def _unit_pdf(disc, value=1.0):
    return disc.project_pdf(np.full((len(disc.points), len(disc.wq)), value))


def test_equilibrium_energy(eq_disc):
    disc = eq_disc
    rho = np.ones(len(disc.points))
    zeta = float(disc.laws.drag(rho)[0])
    t = energy_terms(disc, 0.0, np.zeros(disc.levels.m), _unit_pdf(disc), rho)
    assert t.entropy == pytest.approx(disc.laws.k * 4 * np.pi**2 * zeta, rel=1e-10)
    assert t.kinetic == 0.0
    assert abs(t.viscous_dissipation) + abs(t.x_dissipation) + abs(t.q_dissipation) <= 1e-12


def test_single_mode_kinetic_energy(eq_disc):
    disc = eq_disc
    rho0, a = 1.3, 0.2
    c = np.zeros(disc.levels.m)
    c[0] = a
    t = energy_terms(disc, 0.0, c, _unit_pdf(disc), np.full(len(disc.points), rho0))
    assert t.kinetic == pytest.approx(0.5 * rho0 * a**2, rel=1e-12)


def test_zero_pdf_entropy(eq_disc):
    disc = eq_disc
    rho = np.ones(len(disc.points))
    zeta = float(disc.laws.drag(rho)[0])
    t = energy_terms(disc, 0.0, np.zeros(disc.levels.m), np.zeros(disc.levels.n), rho)
    assert t.entropy == pytest.approx(disc.laws.k * 4 * np.pi**2 * zeta, rel=1e-10)


def test_invariants_pass_at_equilibrium(equilibrium_run):
    rows = invariant_suite(equilibrium_run, {"energy_residual": 1e-10})
    assert all(r.passed for r in rows), [(r.name, r.worst) for r in rows]


def test_density_excursion_is_located(equilibrium_run):
    tr = equilibrium_run
    rho = [r.copy() for r in tr.rho]
    rho[3][17] = 1.5
    bad = replace(tr, rho=rho)
    row = next(r for r in invariant_suite(bad) if r.name == "density_bounds")
    assert not row.passed
    assert row.worst == pytest.approx(0.5)
    assert row.location[0] == pytest.approx(tr.times[3])
    assert row.location[1] == pytest.approx(tuple(tr.disc.points[17]))


def test_small_data_energy_residual_is_small(long_run):
    rep = energy(long_run)
    assert np.max(rep.residual) <= 1e-5
    assert np.all(np.diff(rep.dissipated) >= 0)


def test_nikolskii_constant_series():
    t = np.linspace(0, 1, 11)
    assert nikolskii_norm(np.ones((11, 4)), t, 0.5) == 0.0


def test_nikolskii_linear_series():
    # for u(t) = t the norm is sup_h h^(1/2) (1 - h)^(1/2) = 1/2
    t = np.linspace(0, 1, 101)
    assert nikolskii_norm(t[:, None], t, 0.5) == pytest.approx(0.5, rel=0.02)


def test_nikolskii_refinement_stable():
    coarse = np.linspace(0, 1, 41)
    fine = np.linspace(0, 1, 81)
    f = lambda t: np.column_stack([np.sin(3 * t), t**2])
    a = nikolskii_norm(f(coarse), coarse, 0.25)
    b = nikolskii_norm(f(fine), fine, 0.25)
    assert abs(a - b) <= 0.05 * b


def test_nikolskii_input_errors():
    with pytest.raises(ValueError, match="at least 3"):
        nikolskii_norm(np.zeros((2, 3)), [0.0, 1.0], 0.5)
    with pytest.raises(ValueError, match="uniformly"):
        nikolskii_norm(np.zeros((3, 3)), [0.0, 0.1, 0.3], 0.5)


def test_stress_forms_agree_for_equilibrium(sd_disc):
    disc = sd_disc
    rho = np.ones(len(disc.points))
    out = stress_form_consistency(disc, _unit_pdf(disc), rho)
    assert out.max_deviation <= 1e-10
    assert np.max(np.abs(out.forms["kramers"])) <= 1e-10


def test_stress_vanishes_for_zero_pdf(sd_disc):
    disc = sd_disc
    out = stress_form_consistency(disc, np.zeros(disc.levels.n), np.ones(len(disc.points)))
    for tau in out.forms.values():
        assert np.max(np.abs(tau)) == 0.0


def test_stress_forms_agree_for_random_pdf(sd_disc):
    disc = sd_disc
    rng = np.random.default_rng(3)
    d = _unit_pdf(disc) + 0.05 * rng.standard_normal(disc.levels.n)
    rho = 1 + 0.1 * np.sin(disc.points[:, 0])
    out = stress_form_consistency(disc, d, rho)
    scale = max(np.max(np.abs(t)) for t in out.forms.values())
    assert out.max_deviation <= 1e-8 * max(scale, 1.0)


def test_energy_pairing_defect_small(dt_ladder):
    tr = dt_ladder[1e-2]
    disc = tr.disc
    i = len(tr) // 2
    defect = energy_pairing_defect(disc, tr.pdf[i], tr.rho[i], tr.velocity[i])
    assert defect <= 1e-8
