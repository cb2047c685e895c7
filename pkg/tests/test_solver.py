"""Galerkin assembly, linearized solves, and the Picard fixed point."""

import numpy as np
import pytest

from torusflow.basis import BasisSet
from torusflow.estimates import convergence_orders
from torusflow.fields import GridField
from torusflow.solver import (
    VacuumDegenerateError,
    assemble,
    build_state,
    ode_rhs,
    picard_solve,
    residual_diagnostics,
    solve_linearized,
)
from torusflow.transport import (
    VelocityHistory,
    bump_density,
    constant_density,
    lift_floor,
    vacuum_well_density,
)

RNG = np.random.default_rng(11)


def ones_density(M):
    return GridField(np.ones((M, M)))


def bump_grid(M):
    from torusflow.fields import grid_points

    pts = grid_points(M)
    return GridField(2.0 + np.sin(pts[..., 0]) * np.sin(pts[..., 1]))


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


def test_mass_matrix_identity_for_unit_density():
    basis = BasisSet(9)
    mats = assemble(ones_density(16), None, basis, 16)
    np.testing.assert_allclose(mats.a, np.eye(9), atol=1e-12)
    assert np.all(mats.b == 0.0)
    np.testing.assert_array_equal(mats.lam, basis.lambdas)


def test_mass_matrix_scales_with_constant_density():
    basis = BasisSet(4)
    mats = assemble(GridField(np.full((16, 16), 2.5)), None, basis, 16)
    np.testing.assert_allclose(mats.a, 2.5 * np.eye(4), atol=1e-12)


def test_mass_matrix_coercivity():
    basis = BasisSet(9)
    mats = assemble(bump_grid(32), None, basis, 32)
    assert mats.min_eig >= 1.0 - 1e-10  # density lower bound is 1
    np.testing.assert_allclose(mats.a, mats.a.T, atol=0)  # symmetrized


def test_advection_matrix_skew_for_unit_density():
    # With rho constant and v solenoidal, (v.grad w_j, w_i) is antisymmetric.
    basis = BasisSet(9)
    grid = basis.grid(32)
    v = grid.synthesize(RNG.standard_normal(9))
    mats = assemble(ones_density(32), v, basis, 32)
    np.testing.assert_allclose(mats.b + mats.b.T, np.zeros((9, 9)), atol=1e-12)


def test_assemble_rejects_zero_density():
    basis = BasisSet(4)
    with pytest.raises(VacuumDegenerateError):
        assemble(GridField(np.zeros((16, 16))), None, basis, 16)


def test_ode_rhs_stokes_and_zero():
    basis = BasisSet(9)
    mats = assemble(ones_density(16), None, basis, 16)
    for i in range(9):
        e = np.zeros(9)
        e[i] = 1.0
        np.testing.assert_allclose(ode_rhs(e, mats), -basis.lambdas[i] * e, atol=1e-12)
    assert np.all(ode_rhs(np.zeros(9), mats) == 0.0)


def test_ode_rhs_back_substitution():
    basis = BasisSet(9)
    grid = basis.grid(32)
    v = grid.synthesize(RNG.standard_normal(9))
    mats = assemble(bump_grid(32), v, basis, 32)
    f = RNG.standard_normal(9)
    fdot = ode_rhs(f, mats)
    resid = mats.a @ fdot + (mats.b @ f + mats.lam * f)
    assert np.linalg.norm(resid) <= 1e-10 * max(1.0, np.linalg.norm(f))


# ---------------------------------------------------------------------------
# linearized solves
# ---------------------------------------------------------------------------


def test_stokes_decay_order():
    basis = BasisSet(4)
    zero = VelocityHistory.constant(basis, np.zeros(4), 0.5)
    u0 = np.zeros(4)
    u0[0] = 0.7
    errors = []
    for dt in (0.05, 0.025, 0.0125):
        hist = solve_linearized(zero, constant_density(), u0, basis, 16, dt, 0.5, dt)
        exact = 0.7 * np.exp(-hist.times)
        errors.append(np.abs(hist.coeffs[:, 0] - exact).max())
    assert errors[-1] < 1e-8
    assert convergence_orders(errors).min() >= 3.9


def test_zero_data_stays_zero():
    basis = BasisSet(4)
    zero = VelocityHistory.constant(basis, np.zeros(4), 0.2)
    hist = solve_linearized(
        zero, bump_density(), np.zeros(4), basis, 16, 0.05, 0.2, 0.05
    )
    assert np.all(hist.coeffs == 0.0)
    assert np.all(hist.derivs == 0.0)


def test_nodal_derivatives_match_ode():
    basis = BasisSet(4)
    zero = VelocityHistory.constant(basis, np.zeros(4), 0.2)
    u0 = np.zeros(4)
    u0[0] = 1.0
    hist = solve_linearized(zero, constant_density(), u0, basis, 16, 0.05, 0.2, 0.05)
    # With identity mass matrix and no advection, fdot = -lam f at each node.
    np.testing.assert_allclose(
        hist.derivs, -basis.lambdas * hist.coeffs, atol=1e-12
    )


# ---------------------------------------------------------------------------
# Picard fixed point
# ---------------------------------------------------------------------------


def test_picard_single_mode_two_iterations():
    # A single mode does not advect itself, so the first linearized solve is
    # already the fixed point and the second pass certifies it.
    basis = BasisSet(4)
    u0 = np.zeros(4)
    u0[0] = 0.1
    hist, report = picard_solve(
        constant_density(), u0, basis, 16, 0.01, 0.1, 0.01, 1e-10, 30
    )
    assert report.converged
    assert report.iterations == 2
    assert report.deltas[-1] <= 1e-12


def test_picard_zero_data_one_iteration():
    basis = BasisSet(4)
    hist, report = picard_solve(
        bump_density(), np.zeros(4), basis, 16, 0.05, 0.1, 0.05, 1e-10, 30
    )
    assert report.iterations == 1
    assert np.all(hist.coeffs == 0.0)


def test_picard_zero_seed_matches_initial_seed():
    basis = BasisSet(8)
    u0 = np.zeros(8)
    u0[0], u0[2] = 0.3, 0.2
    kwargs = dict(tol=1e-12, max_iter=40)
    h1, _ = picard_solve(
        bump_density(), u0, basis, 32, 0.01, 0.05, 0.01, seed="initial", **kwargs
    )
    h2, _ = picard_solve(
        bump_density(), u0, basis, 32, 0.01, 0.05, 0.01, seed="zero", **kwargs
    )
    assert np.abs(h1.coeffs - h2.coeffs).max() <= 1e-10


def test_picard_contraction_improves_with_shorter_horizon():
    basis = BasisSet(8)
    u0 = np.zeros(8)
    u0[0], u0[2] = 0.4, 0.3

    def first_factor(T):
        _, report = picard_solve(
            bump_density(), u0, basis, 32, T / 10, T, T / 10, 1e-12, 40
        )
        return report.factors[0]

    assert first_factor(0.05) < first_factor(0.2)


def test_picard_rejects_unknown_seed_and_vacuum():
    basis = BasisSet(4)
    u0 = np.zeros(4)
    u0[0] = 0.1
    with pytest.raises(ValueError):
        picard_solve(
            constant_density(), u0, basis, 16, 0.05, 0.1, 0.05, 1e-10, 30, seed="bogus"
        )
    with pytest.raises(VacuumDegenerateError):
        picard_solve(vacuum_well_density(), u0, basis, 16, 0.05, 0.1, 0.05, 1e-10, 30)
    # A floored well is fine.
    picard_solve(
        lift_floor(vacuum_well_density(), 10), u0, basis, 16, 0.05, 0.1, 0.05, 1e-10, 30
    )


# ---------------------------------------------------------------------------
# residual diagnostics
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def converged_bump_run():
    basis = BasisSet(8)
    u0 = np.zeros(8)
    u0[0], u0[2] = 0.3, 0.2
    hist, report = picard_solve(
        bump_density(), u0, basis, 32, 0.005, 0.05, 0.005, 1e-11, 40
    )
    return basis, hist


def test_orthogonality_and_projection_residuals(converged_bump_run):
    basis, hist = converged_bump_run
    for t in hist.times[:: max(1, len(hist.times) // 5)]:
        state = build_state(bump_density(), hist, basis, 32, 0.005, t)
        resid = residual_diagnostics(state, basis, 32)
        assert resid.orthogonality_max <= 1e-8
        assert resid.projection_rel <= 1e-8


def test_residual_detects_wrong_derivative(converged_bump_run):
    basis, hist = converged_bump_run
    state = build_state(bump_density(), hist, basis, 32, 0.005, hist.times[3])
    state.fdot = state.fdot + 1e-3
    resid = residual_diagnostics(state, basis, 32)
    assert resid.orthogonality_max > 1e-6


def test_pressure_field_is_plausible(converged_bump_run):
    # The recovered pressure is the gradient part of lap u - rho u_dot; it
    # must be mean-zero and reproduce that field's divergence.
    basis, hist = converged_bump_run
    state = build_state(bump_density(), hist, basis, 32, 0.005, hist.times[-1])
    resid = residual_diagnostics(state, basis, 32)
    p = resid.pressure
    assert abs(p.values.mean()) < 1e-12
    assert p.values.shape == (32, 32)
