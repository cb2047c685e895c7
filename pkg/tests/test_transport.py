"""Characteristics transport tests against closed-form flows."""

import numpy as np
import pytest

from torusflow.basis import BasisSet
from torusflow.estimates import GAMMA, convergence_orders
from torusflow.fields import GridField, grid_points
from torusflow.transport import (
    DENSITY_CATALOG,
    ConstantVelocity,
    ShearVelocity,
    VelocityHistory,
    backtrack,
    bump_density,
    constant_density,
    density_at,
    density_time_derivative_norm,
    fd_gradient,
    grad_density_norm,
    lift_floor,
    shift_density,
    transport_growth_check,
    vacuum_well_density,
    w1gamma_norm,
)

RNG = np.random.default_rng(3)


# ---------------------------------------------------------------------------
# density sources
# ---------------------------------------------------------------------------


def test_density_catalog_values_and_bounds():
    pts = grid_points(32)
    const = constant_density()
    assert const.constant
    assert (const.lower, const.upper) == (1.0, 1.0)
    assert np.all(const.value(pts) == 1.0)

    bump = bump_density()
    assert (bump.lower, bump.upper) == (1.0, 3.0)
    v = bump.value(np.array([[np.pi / 2, np.pi / 2], [np.pi / 2, 3 * np.pi / 2]]))
    np.testing.assert_allclose(v, [3.0, 1.0], atol=1e-14)

    well = vacuum_well_density()
    assert well.lower == 0.0
    assert well.value(np.array([np.pi, np.pi])) == 0.0
    assert abs(well.value(np.array([0.0, 0.0])) - 1.5) < 1e-14
    assert set(DENSITY_CATALOG) == {"constant", "bump", "vacuum-well"}


def test_lift_floor_and_shift():
    bump = bump_density()
    lifted = lift_floor(bump, 10)
    assert lifted.floor_n == 10
    assert (lifted.lower, lifted.upper) == (1.1, 3.1)
    pts = grid_points(8)
    np.testing.assert_allclose(lifted.value(pts), bump.value(pts) + 0.1, atol=1e-15)
    with pytest.raises(ValueError):
        lift_floor(bump, 0)

    shifted = shift_density(bump, -0.25)
    assert (shifted.lower, shifted.upper) == (0.75, 2.75)


def test_floor_distance_in_sobolev_norm():
    # The floor changes the density by the constant 1/n, so the W^{1,gamma}
    # distance is (1/n) (4 pi^2)^{1/gamma}: values differ by 1/n, gradients
    # are identical.
    pts = grid_points(32)
    base = bump_density().value(pts)
    for n in (10, 100):
        lifted = lift_floor(bump_density(), n).value(pts)
        diff = GridField(lifted - base)
        dist = w1gamma_norm(diff, GAMMA)
        assert abs(dist - (1.0 / n) * (4.0 * np.pi**2) ** (1.0 / GAMMA)) < 1e-12


# ---------------------------------------------------------------------------
# backward characteristics
# ---------------------------------------------------------------------------


def test_backtrack_zero_time_and_zero_field():
    basis = BasisSet(4)
    zero = VelocityHistory.constant(basis, np.zeros(4), 1.0)
    pts = RNG.uniform(0, 2 * np.pi, (50, 2))
    np.testing.assert_array_equal(backtrack(zero, pts, 0.0, 0.1), pts)
    np.testing.assert_allclose(backtrack(zero, pts, 0.7, 0.1), pts, atol=1e-15)


def test_backtrack_constant_field_exact():
    field = ConstantVelocity([0.3, -0.2])
    pts = RNG.uniform(0, 2 * np.pi, (50, 2))
    feet = backtrack(field, pts, 0.5, 0.05)
    expected = pts - 0.5 * np.array([0.3, -0.2])
    np.testing.assert_allclose(feet, expected, atol=1e-14)


def test_backtrack_steady_shear_exact():
    # For v = (a sin y, 0) the y coordinate is constant along paths, so RK4
    # sees an autonomous constant slope and integrates it exactly.
    shear = ShearVelocity(amplitude=0.8, omega=0.0)
    pts = RNG.uniform(0, 2 * np.pi, (60, 2))
    feet = backtrack(shear, pts, 0.4, 0.05)
    np.testing.assert_allclose(feet, shear.feet(pts, 0.4), atol=1e-13)


def test_backtrack_modulated_shear_accuracy_and_order():
    shear = ShearVelocity(amplitude=0.5, omega=3.0)
    pts = RNG.uniform(0, 2 * np.pi, (60, 2))
    exact = shear.feet(pts, 0.3)
    err = np.abs(backtrack(shear, pts, 0.3, 1e-3) - exact).max()
    assert err < 1e-11

    errors = [
        np.abs(backtrack(shear, pts, 0.3, dtau) - exact).max()
        for dtau in (0.03, 0.015, 0.0075)
    ]
    orders = convergence_orders(errors)
    assert orders.min() >= 3.9


def test_backtrack_validation():
    shear = ShearVelocity(1.0)
    pts = np.zeros((3, 2))
    with pytest.raises(ValueError):
        backtrack(shear, pts, -0.1, 0.1)
    with pytest.raises(ValueError):
        backtrack(shear, pts, 0.1, 0.0)


# ---------------------------------------------------------------------------
# transported density
# ---------------------------------------------------------------------------


def test_density_translation_closed_form():
    # Uniform velocity (1,0) translates the bump: rho(x,y,t) = rho0(x-t, y).
    M, t = 48, 0.37
    rho = density_at(bump_density(), ConstantVelocity([1.0, 0.0]), M, t, 0.05)
    pts = grid_points(M)
    expected = 2.0 + np.sin(pts[..., 0] - t) * np.sin(pts[..., 1])
    np.testing.assert_allclose(rho.values, expected, atol=1e-13)


def test_density_constant_source_fast_path():
    rho = density_at(constant_density(), ShearVelocity(5.0), 16, 0.9, 0.1)
    assert np.all(rho.values == 1.0)


def test_max_principle_is_exact():
    # Samples are rho0 evaluated at feet, so the analytic bounds hold exactly.
    shear = ShearVelocity(amplitude=1.3, omega=2.0)
    for t in (0.1, 0.5, 1.0):
        rho = density_at(bump_density(), shear, 32, t, 0.02)
        assert rho.values.min() >= 1.0
        assert rho.values.max() <= 3.0


def test_mass_conserved_under_shear():
    shear = ShearVelocity(amplitude=0.5, omega=1.0)
    w = (2.0 * np.pi / 64) ** 2
    mass0 = w * density_at(bump_density(), shear, 64, 0.0, 0.01).values.sum()
    mass1 = w * density_at(bump_density(), shear, 64, 0.8, 0.01).values.sum()
    assert abs(mass1 - mass0) / mass0 < 1e-9


def test_fd_gradient_oracle_and_order():
    f0 = lambda pts: 2.0 + np.sin(pts[..., 0]) * np.sin(pts[..., 1])
    exact_norm = np.sqrt(2.0 * np.pi**2)
    errs = []
    for M in (64, 128):
        rho = GridField(f0(grid_points(M)))
        errs.append(abs(grad_density_norm(rho, GAMMA) - exact_norm))
    # The centered difference scales each component by sin(h)/h, so the
    # relative error is h^2/6 ~= 4e-4 at M=128.
    assert errs[1] < 5e-4 * exact_norm
    # Centered differences are second order: halving h quarters the error.
    assert 3.7 < errs[0] / errs[1] < 4.3


def test_w1gamma_norm_constant():
    rho = GridField(np.ones((32, 32)))
    assert abs(w1gamma_norm(rho, 2.0) - 2.0 * np.pi) < 1e-12


def test_density_time_derivative_oracle():
    # d_t rho = -u . grad rho; with u = (1,0) and the bump density at t=0,
    # d_t rho = -cos(x) sin(y) whose L2 norm is pi.
    val = density_time_derivative_norm(
        bump_density(), ConstantVelocity([1.0, 0.0]), 128, 0.0, 0.1, 2.0
    )
    assert abs(val - np.pi) < 1e-3 * np.pi


# ---------------------------------------------------------------------------
# growth bound
# ---------------------------------------------------------------------------


def shear_transport_series(a=0.7, omega=2.0, M=64, T=0.6, steps=13):
    shear = ShearVelocity(amplitude=a, omega=omega)
    pts = grid_points(M)
    source = bump_density()
    times = np.linspace(0.0, T, steps)
    w1 = []
    gradv_inf = []
    for t in times:
        rho = GridField(source.value(shear.feet(pts, t)))
        w1.append(w1gamma_norm(rho, GAMMA))
        # |grad v| = |a cos y cos(omega t)| peaks at |a cos(omega t)|.
        gradv_inf.append(abs(a * np.cos(omega * t)))
    return times, np.array(w1), np.array(gradv_inf)


def test_transport_growth_bound_on_shear():
    times, w1, gv = shear_transport_series()
    report = transport_growth_check(times, w1, gv, eps=1e-3)
    assert report.passed
    assert report.worst_margin >= 1.0 / (1.0 + 1e-3)


def test_transport_growth_catches_corruption():
    times, w1, gv = shear_transport_series()
    w1 = w1.copy()
    w1[5] *= np.exp(gv.max() * times[-1]) * 2.0  # clearly above any bound
    report = transport_growth_check(times, w1, gv, eps=1e-3)
    assert not report.passed
    assert report.worst_time == times[5]


def test_transport_growth_zero_velocity_margin_one():
    times = np.linspace(0.0, 1.0, 5)
    w1 = np.full(5, 2.0)
    report = transport_growth_check(times, w1, np.zeros(5))
    assert report.passed
    assert abs(report.worst_margin - 1.0) < 1e-15
