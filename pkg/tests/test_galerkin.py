from dataclasses import replace

import numpy as np
import pytest

from conftest import equilibrium_setup, small_data_setup
from fenesim.errors import CapacityError
from fenesim.galerkin import (
    Discretization,
    ScalarBasis,
    Torus,
    assemble_fp_system,
    assemble_velocity_system,
    build_velocity_basis,
    pdf_mass_matrix,
    polymer_number_density,
)
from fenesim.model import CoefficientLaw, MaterialLaws, RouseSystem


@pytest.fixture(scope="module")
def disc():
    return Discretization(small_data_setup())


def test_first_shell_orthonormal():
    torus = Torus(grid=16)
    basis = build_velocity_basis(4, torus)
    assert np.all(np.linalg.norm(basis.wavevectors, axis=1) == 1.0)
    gram = torus.weight * np.einsum("pia,pja->ij", basis.values, basis.values)
    assert np.max(np.abs(gram - np.eye(4))) <= 1e-14


def test_velocity_modes_divergence_free():
    basis = build_velocity_basis(40, Torus(grid=16))
    div = np.einsum("piaa->pi", basis.gradients)
    assert np.max(np.abs(div)) <= 1e-12


def test_single_mode_gradient():
    torus = Torus(grid=16)
    basis = build_velocity_basis(1, torus)
    k = basis.wavevectors[0]
    a = basis.amplitudes[0]
    assert np.allclose(a, np.array([-k[1], k[0]]) / np.linalg.norm(k) * np.sqrt(2 / torus.volume))
    phase = torus.points @ k
    trig_d = -np.sin(phase) if basis.kinds[0] == 0 else np.cos(phase)
    expected = trig_d[:, None, None] * a[None, :, None] * k[None, None, :]
    assert np.max(np.abs(basis.gradients[:, 0] - expected)) <= 1e-12


def test_velocity_basis_capacity():
    with pytest.raises(CapacityError):
        build_velocity_basis(1000, Torus(grid=8))


def test_scalar_basis_orthonormal_and_leveled():
    torus = Torus(grid=16)
    sb = ScalarBasis(torus)
    gram = torus.weight * sb.values.T @ sb.values
    assert np.max(np.abs(gram - np.eye(len(sb)))) <= 1e-13
    assert sb.levels[0] == 0 and np.all(np.diff(sb.levels) >= 0)


def test_pdf_basis_prefix_and_order(disc):
    pb = disc.pbasis
    assert pb.x_index[0] == 0 and pb.q_index[0] == 0
    total = disc.sbasis.levels[pb.x_index] + disc.cbasis.degrees[pb.q_index]
    assert np.all(np.diff(total) >= 0)
    small = Discretization(small_data_setup(), replace(disc.levels, n=22)).pbasis
    assert np.array_equal(small.x_index, pb.x_index[:22]) and np.array_equal(small.q_index, pb.q_index[:22])


def test_velocity_mass_for_constant_density(disc):
    P, m = len(disc.points), disc.vbasis.m
    vs = assemble_velocity_system(disc, np.full(P, 1.3), np.zeros(m), np.zeros(P), np.zeros((P, 2, 2)), np.zeros((P, 2)))
    assert np.max(np.abs(vs.mass - 1.3 * np.eye(m))) <= 1e-12
    assert np.max(np.abs(vs.A - vs.A.T)) <= 1e-12
    assert np.all(vs.B == 0.0)


def test_velocity_convection_is_skew_for_constant_density(disc):
    P, m = len(disc.points), disc.vbasis.m
    u = np.random.default_rng(0).standard_normal(m)
    zero = np.zeros((P, 2, 2))
    full = assemble_velocity_system(disc, np.ones(P), u, np.zeros(P), zero, np.zeros((P, 2)))
    rest = assemble_velocity_system(disc, np.ones(P), np.zeros(m), np.zeros(P), zero, np.zeros((P, 2)))
    conv = full.A - rest.A
    assert np.max(np.abs(conv + conv.T)) <= 1e-12


def test_velocity_system_rejects_nonfinite_input(disc):
    P, m = len(disc.points), disc.vbasis.m
    rho = np.ones(P)
    rho[17] = np.nan
    with pytest.raises(FloatingPointError, match="grid node 17"):
        assemble_velocity_system(disc, rho, np.zeros(m), np.zeros(P), np.zeros((P, 2, 2)), np.zeros((P, 2)))


def test_fp_system_without_flow_has_no_drift(disc):
    P = len(disc.points)
    xi = np.random.default_rng(1).standard_normal(disc.pbasis.n)
    fp = assemble_fp_system(disc, np.ones(P), np.zeros(disc.vbasis.m), xi)
    assert np.all(fp.R == 0.0)


def test_constant_mode_row_vanishes(disc):
    P = len(disc.points)
    rng = np.random.default_rng(2)
    u = 0.1 * rng.standard_normal(disc.vbasis.m)
    xi = rng.standard_normal(disc.pbasis.n)
    zeta = 1.0 + 0.2 * np.sin(disc.points[:, 0])
    fp = assemble_fp_system(disc, zeta, u, xi)
    assert np.max(np.abs(fp.L[0])) <= 1e-12
    assert abs(fp.R[0]) <= 1e-12


def test_conf_stiffness_equals_gradient_gram_for_identity_rouse():
    setup = small_data_setup()
    d = Discretization(replace(setup, rouse=RouseSystem(np.eye(1))))
    g = d.cbasis.gradients
    direct = np.einsum("a,aqjc,arjc->qr", d.quad.weights * d.approx(d.quad.nodes), g, g)
    assert np.max(np.abs(d.conf_stiffness - direct)) <= 1e-10
    default = Discretization(setup)
    assert np.max(np.abs(default.conf_stiffness - 2.0 * direct)) <= 1e-10


def test_pdf_mass_matrix_constant_drag(disc):
    N = pdf_mass_matrix(disc, np.full(len(disc.points), 0.8))
    assert np.max(np.abs(N - 0.8 * np.eye(disc.pbasis.n))) <= 1e-12


def test_polymer_number_density_cases():
    setup = small_data_setup(maxwellian="approximate")
    d = Discretization(setup)
    P, Q = len(d.points), len(d.quad)
    zeta = np.full(P, 0.7)
    dens, frac = polymer_number_density(d, zeta, np.ones((P, Q)))
    assert np.allclose(dens, 0.7 * np.sum(d.wMm), rtol=0, atol=1e-14)
    assert np.sum(d.wMm) > 1.0 and frac == 0.0
    dens, frac = polymer_number_density(d, zeta, np.zeros((P, Q)))
    assert np.all(dens == 0.0)
    dens, frac = polymer_number_density(d, zeta, -np.ones((P, Q)))
    assert np.all(dens == 0.0) and frac == 1.0


def test_projection_reproduces_basis_functions(disc):
    coeffs = np.random.default_rng(3).standard_normal(disc.pbasis.n)
    assert np.max(np.abs(disc.project_pdf(disc.pdf_values(coeffs)) - coeffs)) <= 1e-12


def test_equilibrium_stress_vanishes():
    d = Discretization(equilibrium_setup())
    coeffs = d.project_pdf(np.ones((len(d.points), len(d.quad))))
    tau = d.stress(np.ones(len(d.points)), d.pdf_values(coeffs))
    assert np.max(np.abs(tau)) <= 1e-12
