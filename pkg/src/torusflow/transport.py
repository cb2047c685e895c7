"""Density transport along characteristics.

The density is never discretized on its own: it is evaluated exactly as
rho(x, t) = rho0(Phi(0; x, t)), where Phi is the backward characteristic map
of the (solenoidal) advecting velocity.  Backtracking integrates
dPhi/dtau = v(Phi, tau) from tau = t down to tau = 0 with classical RK4; the
feet are reported without modular reduction, which is harmless because every
initial density is 2pi-periodic.  Exact evaluation keeps every density sample
inside [inf rho0, sup rho0] with no tolerance at all.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .basis import BasisSet
from .fields import GridField


@dataclass(frozen=True)
class DensitySource:
    """Initial density: analytic 2pi-periodic value and gradient functions.

    `lower` and `upper` are the exact range bounds over the torus.  `floor_n`
    records the additive lift 1/n if one was applied (None means no floor).
    `constant` marks sources whose value does not depend on position, which
    lets density evaluation skip the characteristic solve entirely.
    """

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    lower: float
    upper: float
    floor_n: int | None = None
    constant: bool = False


def constant_density(c: float = 1.0) -> DensitySource:
    def value(points):
        return np.full(np.asarray(points).shape[:-1], float(c))

    def grad(points):
        return np.zeros(np.asarray(points).shape[:-1] + (2,))

    return DensitySource("constant", value, grad, float(c), float(c), constant=True)


def bump_density() -> DensitySource:
    """Strictly positive analytic profile 2 + sin x sin y, range [1, 3]."""

    def value(points):
        p = np.asarray(points)
        return 2.0 + np.sin(p[..., 0]) * np.sin(p[..., 1])

    def grad(points):
        p = np.asarray(points)
        gx = np.cos(p[..., 0]) * np.sin(p[..., 1])
        gy = np.sin(p[..., 0]) * np.cos(p[..., 1])
        return np.stack([gx, gy], axis=-1)

    return DensitySource("bump", value, grad, 1.0, 3.0)


def vacuum_well_density() -> DensitySource:
    """Nonnegative profile vanishing on a neighborhood of (pi, pi).

    rho0 = c * max(0, q - 1/2)^2 with q = (1 - cos(x - pi))/2 +
    (1 - cos(y - pi))/2.  The square keeps the gradient continuous across the
    vacuum boundary; c = 2/3 normalizes the peak value (at the origin) to 1.5.
    """
    c = 2.0 / 3.0

    def _q(p):
        return 0.5 * (1.0 - np.cos(p[..., 0] - np.pi)) + 0.5 * (
            1.0 - np.cos(p[..., 1] - np.pi)
        )

    def value(points):
        p = np.asarray(points)
        return c * np.maximum(0.0, _q(p) - 0.5) ** 2

    def grad(points):
        p = np.asarray(points)
        pos = np.maximum(0.0, _q(p) - 0.5)
        gx = c * pos * np.sin(p[..., 0] - np.pi)
        gy = c * pos * np.sin(p[..., 1] - np.pi)
        return np.stack([gx, gy], axis=-1)

    return DensitySource("vacuum-well", value, grad, 0.0, 1.5)


DENSITY_CATALOG = {
    "constant": constant_density,
    "bump": bump_density,
    "vacuum-well": vacuum_well_density,
}


def shift_density(source: DensitySource, shift: float) -> DensitySource:
    """Additive constant shift.  Gradient and name are preserved."""
    base_value = source.value
    return replace(
        source,
        value=lambda points: base_value(points) + shift,
        lower=source.lower + shift,
        upper=source.upper + shift,
    )


def lift_floor(source: DensitySource, n: int) -> DensitySource:
    """Additive vacuum floor: rho0 + 1/n."""
    if n < 1:
        raise ValueError("floor parameter n must be a positive integer")
    return replace(shift_density(source, 1.0 / n), floor_n=int(n))


class VelocityHistory:
    """Time-sampled coefficient trajectory with cubic Hermite dense output.

    Stores the node times, coefficients, and coefficient time-derivatives
    produced by the integrator.  Between nodes both the coefficients and the
    induced velocity field are evaluated from the Hermite interpolant, which
    matches the integrator's own order of accuracy.
    """

    def __init__(self, basis: BasisSet, times, coeffs, derivs):
        self.basis = basis
        self.times = np.asarray(times, dtype=float)
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.derivs = np.asarray(derivs, dtype=float)
        if self.coeffs.shape != (len(self.times), basis.size):
            raise ValueError("coefficient array shape does not match times/basis")
        if self.derivs.shape != self.coeffs.shape:
            raise ValueError("derivative array shape does not match coefficients")
        if len(self.times) < 2 or np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing with >= 2 nodes")

    @classmethod
    def constant(cls, basis: BasisSet, coeffs: np.ndarray, T: float) -> "VelocityHistory":
        c = np.asarray(coeffs, dtype=float)
        return cls(basis, [0.0, float(T)], np.stack([c, c]), np.zeros((2, basis.size)))

    @property
    def t_final(self) -> float:
        return float(self.times[-1])

    def coeffs_at(self, t: float) -> np.ndarray:
        ts = self.times
        if t <= ts[0]:
            return self.coeffs[0].copy()
        if t >= ts[-1]:
            return self.coeffs[-1].copy()
        k = int(np.searchsorted(ts, t, side="right") - 1)
        h = ts[k + 1] - ts[k]
        s = (t - ts[k]) / h
        h00 = (1.0 + 2.0 * s) * (1.0 - s) ** 2
        h10 = s * (1.0 - s) ** 2
        h01 = s * s * (3.0 - 2.0 * s)
        h11 = s * s * (s - 1.0)
        return (
            h00 * self.coeffs[k]
            + h10 * h * self.derivs[k]
            + h01 * self.coeffs[k + 1]
            + h11 * h * self.derivs[k + 1]
        )

    def velocity_at(self, points: np.ndarray, t: float) -> np.ndarray:
        return self.basis.velocity_at(points, self.coeffs_at(t))

    def gradient_at(self, points: np.ndarray, t: float) -> np.ndarray:
        return self.basis.gradient_at(points, self.coeffs_at(t))


class ConstantVelocity:
    """Test field: spatially uniform steady velocity (not solenoidal-checked)."""

    def __init__(self, vector):
        self.vector = np.asarray(vector, dtype=float)

    def velocity_at(self, points: np.ndarray, t: float) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return np.broadcast_to(self.vector, pts.shape).copy()


class ShearVelocity:
    """Test field v = (a sin y cos(omega t), 0) with explicit characteristics.

    Backward feet: Phi(0; (x, y), t) = (x - a sin y * S(t), y) where
    S(t) = int_0^t cos(omega s) ds (= t for omega = 0).
    """

    def __init__(self, amplitude: float = 1.0, omega: float = 0.0):
        self.amplitude = float(amplitude)
        self.omega = float(omega)

    def velocity_at(self, points: np.ndarray, t: float) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        mod = np.cos(self.omega * t) if self.omega else 1.0
        u = np.zeros_like(pts)
        u[..., 0] = self.amplitude * np.sin(pts[..., 1]) * mod
        return u

    def feet(self, points: np.ndarray, t: float) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if self.omega:
            S = np.sin(self.omega * t) / self.omega
        else:
            S = t
        out = pts.copy()
        out[..., 0] -= self.amplitude * np.sin(pts[..., 1]) * S
        return out


def backtrack(history, points: np.ndarray, t: float, dtau: float) -> np.ndarray:
    """Feet of the backward characteristics through `points` at time `t`.

    Integrates dPhi/dtau = v(Phi, tau) from tau = t to tau = 0 with RK4 using
    at most `dtau` per step.  Results are raw coordinates (no mod 2pi).
    """
    pts = np.asarray(points, dtype=float).copy()
    if t == 0.0:
        return pts
    if t < 0.0 or dtau <= 0.0:
        raise ValueError("need t >= 0 and dtau > 0")
    steps = max(1, int(np.ceil(t / dtau - 1e-12)))
    h = t / steps
    tau = t
    for _ in range(steps):
        k1 = history.velocity_at(pts, tau)
        k2 = history.velocity_at(pts - 0.5 * h * k1, tau - 0.5 * h)
        k3 = history.velocity_at(pts - 0.5 * h * k2, tau - 0.5 * h)
        k4 = history.velocity_at(pts - h * k3, tau - h)
        pts -= (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        tau -= h
    return pts


def density_at(
    source: DensitySource, history, M: int, t: float, dtau: float
) -> GridField:
    """Density on the M x M grid at time t: rho0 evaluated at the feet."""
    pts = grid_points_cached(M)
    if source.constant:
        return GridField(source.value(pts))
    feet = backtrack(history, pts, t, dtau)
    return GridField(source.value(feet))


_GRID_CACHE: dict[int, np.ndarray] = {}


def grid_points_cached(M: int) -> np.ndarray:
    if M not in _GRID_CACHE:
        axis = 2.0 * np.pi * np.arange(M) / M
        X, Y = np.meshgrid(axis, axis, indexing="ij")
        _GRID_CACHE[M] = np.stack([X, Y], axis=-1)
    return _GRID_CACHE[M]


def fd_gradient(rho: GridField) -> np.ndarray:
    """Second-order centered periodic finite-difference gradient, (M, M, 2)."""
    v = rho.values
    h = 2.0 * np.pi / rho.M
    gx = (np.roll(v, -1, axis=0) - np.roll(v, 1, axis=0)) / (2.0 * h)
    gy = (np.roll(v, -1, axis=1) - np.roll(v, 1, axis=1)) / (2.0 * h)
    return np.stack([gx, gy], axis=-1)


def grad_density_norm(rho: GridField, gamma: float) -> float:
    """||grad rho||_{L^gamma} from the finite-difference gradient."""
    g = fd_gradient(rho)
    mag = np.sqrt((g * g).sum(axis=-1))
    w = rho.quadrature_weight()
    return float((w * (mag**gamma).sum()) ** (1.0 / gamma))


def w1gamma_norm(rho: GridField, gamma: float) -> float:
    """Sobolev norm (||rho||_gamma^gamma + ||grad rho||_gamma^gamma)^(1/gamma)."""
    w = rho.quadrature_weight()
    g = fd_gradient(rho)
    mag = np.sqrt((g * g).sum(axis=-1))
    total = w * (np.abs(rho.values) ** gamma).sum() + w * (mag**gamma).sum()
    return float(total ** (1.0 / gamma))


def density_time_derivative_norm(
    source: DensitySource, history, M: int, t: float, dtau: float, gamma: float
) -> float:
    """||d_t rho||_{L^gamma} via the transport identity d_t rho = -u . grad rho."""
    rho = density_at(source, history, M, t, dtau)
    grad = fd_gradient(rho)
    u = history.velocity_at(grid_points_cached(M), t)
    dt_rho = -(u * grad).sum(axis=-1)
    w = rho.quadrature_weight()
    return float((w * (np.abs(dt_rho) ** gamma).sum()) ** (1.0 / gamma))


@dataclass
class TransportGrowthReport:
    passed: bool
    worst_margin: float
    worst_time: float


def transport_growth_check(
    times, w1gamma, gradv_inf, w1gamma0: float | None = None, eps: float = 1e-2
) -> TransportGrowthReport:
    """Check ||rho(t)||_{W^{1,gamma}} <= exp(int_0^t ||grad v||_inf) ||rho0||.

    The exponent integral is trapezoid on the sample grid; `eps` is the
    multiplicative tolerance absorbing finite-difference gradient error.
    Margin is bound/actual, so exact equality (zero velocity) reports 1.
    """
    times = np.asarray(times, dtype=float)
    w1 = np.asarray(w1gamma, dtype=float)
    gv = np.asarray(gradv_inf, dtype=float)
    base = w1[0] if w1gamma0 is None else float(w1gamma0)
    exponents = np.concatenate(
        [[0.0], np.cumsum(0.5 * np.diff(times) * (gv[1:] + gv[:-1]))]
    )
    bounds = base * np.exp(exponents)
    with np.errstate(divide="ignore", invalid="ignore"):
        margins = np.where(w1 > 0, bounds / np.where(w1 > 0, w1, 1.0), np.inf)
    worst = int(np.argmin(margins))
    passed = bool(np.all(w1 <= bounds * (1.0 + eps)))
    return TransportGrowthReport(
        passed=passed,
        worst_margin=float(margins[worst]),
        worst_time=float(times[worst]),
    )
