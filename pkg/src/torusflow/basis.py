"""Divergence-free trigonometric eigenbasis on the 2D torus [0, 2pi)^2.

Each basis field has the form

    w(x) = (-k2, k1)/|k| * trig(k.x) / (sqrt(2)*pi),   trig in {cos, sin},

with integer wavevector k = (k1, k2) != 0 drawn from the canonical half-space
k1 > 0, or (k1 = 0 and k2 > 0).  Every such field is 2pi-periodic, solenoidal
(the direction is orthogonal to k), unit-norm in L2, and an eigenfield of the
Stokes operator with eigenvalue lam = |k|^2 and vanishing eigenpressure.

Modes are enumerated by increasing eigenvalue; ties are broken by k1
descending, then k2 ascending, cosine before sine, which makes the enumeration
deterministic and keeps k=(1,0) cosine the first mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# L2 normalization: integral of trig(k.x)^2 over the torus is 2*pi^2.
MODE_NORM = 1.0 / (np.sqrt(2.0) * np.pi)


@dataclass(frozen=True)
class BasisMode:
    """One divergence-free eigenmode: wavevector, parity, eigenvalue."""

    k: tuple[int, int]
    parity: str  # "cos" or "sin"
    lam: int
    eigenpressure: float = 0.0

    @property
    def direction(self) -> np.ndarray:
        """Unit vector (-k2, k1)/|k|, orthogonal to k."""
        k1, k2 = self.k
        norm = np.sqrt(float(k1 * k1 + k2 * k2))
        return np.array([-k2 / norm, k1 / norm])


def _canonical(k1: int, k2: int) -> bool:
    return k1 > 0 or (k1 == 0 and k2 > 0)


def enumerate_modes(count: int) -> list[BasisMode]:
    """First `count` modes ordered by (lam, -k1, k2, cos-before-sin)."""
    if count < 1:
        raise ValueError("mode count must be >= 1")
    radius = 2
    while True:
        candidates = []
        for k1 in range(0, radius + 1):
            for k2 in range(-radius, radius + 1):
                if not _canonical(k1, k2):
                    continue
                lam = k1 * k1 + k2 * k2
                if lam > radius * radius:
                    continue
                for pidx, parity in enumerate(("cos", "sin")):
                    candidates.append((lam, -k1, k2, pidx, parity, (k1, k2)))
        if len(candidates) >= count:
            candidates.sort(key=lambda c: c[:4])
            # All modes with lam <= radius^2 are present, so the prefix is
            # complete as long as the count stays within that shell.
            if candidates[count - 1][0] <= radius * radius:
                return [
                    BasisMode(k=k, parity=parity, lam=lam)
                    for lam, _, _, _, parity, k in candidates[:count]
                ]
        radius *= 2


def evaluate_mode(mode: BasisMode, points: np.ndarray) -> np.ndarray:
    """Sample one mode at points of shape (..., 2); returns (..., 2)."""
    points = np.asarray(points, dtype=float)
    phase = points[..., 0] * mode.k[0] + points[..., 1] * mode.k[1]
    trig = np.cos(phase) if mode.parity == "cos" else np.sin(phase)
    return trig[..., None] * (mode.direction * MODE_NORM)


def mode_divergence(mode: BasisMode, points: np.ndarray) -> np.ndarray:
    """Analytic divergence of a mode at the given points.

    div w = (d . k) * trig'(k.x) * MODE_NORM with d = (-k2, k1)/|k|, and the
    dot product d . k = (-k2*k1 + k1*k2)/|k| cancels exactly in floating
    point, so the returned samples are exactly zero.
    """
    points = np.asarray(points, dtype=float)
    k1, k2 = mode.k
    norm = np.sqrt(float(k1 * k1 + k2 * k2))
    ddotk = (-float(k2) * float(k1) + float(k1) * float(k2)) / norm
    phase = points[..., 0] * k1 + points[..., 1] * k2
    trig_d = -np.sin(phase) if mode.parity == "cos" else np.cos(phase)
    return ddotk * trig_d * MODE_NORM


class BasisGrid:
    """Cached samples of every basis mode on the uniform M x M grid.

    Grid nodes are x_ab = (2pi a/M, 2pi b/M), array index [a, b].  Holds the
    mode fields W with shape (N, M, M, 2), the mode gradients GW with shape
    (N, M, M, 2, 2) indexed [mode, a, b, component, derivative], and the
    trapezoid quadrature weight h^2 = (2pi/M)^2 (exact for trigonometric
    polynomials below the Nyquist limit).
    """

    def __init__(self, basis: "BasisSet", M: int):
        if M < 2 * basis.kmax + 1:
            raise ValueError(
                f"grid M={M} is below the alias-free minimum "
                f"{2 * basis.kmax + 1} for this basis"
            )
        self.M = int(M)
        self.weight = (2.0 * np.pi / M) ** 2
        axis = 2.0 * np.pi * np.arange(M) / M
        X, Y = np.meshgrid(axis, axis, indexing="ij")
        self.points = np.stack([X, Y], axis=-1)

        N = basis.size
        self.W = np.empty((N, M, M, 2))
        self.GW = np.empty((N, M, M, 2, 2))
        for n, mode in enumerate(basis.modes):
            k1, k2 = mode.k
            phase = k1 * X + k2 * Y
            if mode.parity == "cos":
                trig, trig_d = np.cos(phase), -np.sin(phase)
            else:
                trig, trig_d = np.sin(phase), np.cos(phase)
            d = mode.direction * MODE_NORM
            self.W[n] = trig[..., None] * d
            # grad component [i, alpha] = d_i * k_alpha * trig'
            kvec = np.array([float(k1), float(k2)])
            self.GW[n] = trig_d[..., None, None] * np.einsum("i,a->ia", d, kvec)
        self._Wflat = self.W.reshape(N, -1)
        self._N = N

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        """Velocity samples (M, M, 2) for the given coefficient vector."""
        return np.tensordot(coeffs, self.W, axes=(0, 0))

    def synthesize_gradient(self, coeffs: np.ndarray) -> np.ndarray:
        """Gradient samples (M, M, 2, 2), index [a, b, i, alpha]."""
        return np.tensordot(coeffs, self.GW, axes=(0, 0))

    def project(self, values: np.ndarray) -> np.ndarray:
        """Quadrature inner products (values, w_n) for all modes."""
        return self.weight * (self._Wflat @ values.reshape(-1))

    def quadrature(self, values: np.ndarray) -> float:
        """Trapezoid integral of scalar samples over the torus."""
        return float(self.weight * values.sum())


class BasisSet:
    """Immutable collection of the first N basis modes.

    Safe to share between runs: all mutable state is the per-M grid cache,
    which only ever grows and whose entries are themselves immutable.
    """

    def __init__(self, count: int):
        self.modes = enumerate_modes(count)
        self.size = count
        self.lambdas = np.array([m.lam for m in self.modes], dtype=float)
        self.kvecs = np.array([m.k for m in self.modes], dtype=float)
        self.dirs = np.array([m.direction for m in self.modes])
        self.is_cos = np.array([m.parity == "cos" for m in self.modes])
        self.kmax = int(np.abs(self.kvecs).max())
        self._cos_idx = np.nonzero(self.is_cos)[0]
        self._sin_idx = np.nonzero(~self.is_cos)[0]
        self._grids: dict[int, BasisGrid] = {}

    def grid(self, M: int) -> BasisGrid:
        if M not in self._grids:
            self._grids[M] = BasisGrid(self, M)
        return self._grids[M]

    def _trig_table(self, points: np.ndarray) -> np.ndarray:
        """trig(k_n . x) for all modes at flat points (P, 2) -> (P, N)."""
        phases = points @ self.kvecs.T
        table = np.empty_like(phases)
        table[:, self._cos_idx] = np.cos(phases[:, self._cos_idx])
        table[:, self._sin_idx] = np.sin(phases[:, self._sin_idx])
        return table

    def _trig_deriv_table(self, points: np.ndarray) -> np.ndarray:
        phases = points @ self.kvecs.T
        table = np.empty_like(phases)
        table[:, self._cos_idx] = -np.sin(phases[:, self._cos_idx])
        table[:, self._sin_idx] = np.cos(phases[:, self._sin_idx])
        return table

    def velocity_at(self, points: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
        """Velocity samples at arbitrary points (..., 2) -> (..., 2)."""
        pts = np.asarray(points, dtype=float)
        flat = pts.reshape(-1, 2)
        table = self._trig_table(flat)
        u = (table * coeffs) @ (self.dirs * MODE_NORM)
        return u.reshape(pts.shape)

    def gradient_at(self, points: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
        """Velocity gradient at arbitrary points (..., 2) -> (..., 2, 2)."""
        pts = np.asarray(points, dtype=float)
        flat = pts.reshape(-1, 2)
        table = self._trig_deriv_table(flat) * coeffs
        grad = np.einsum("pn,ni,na->pia", table, self.dirs * MODE_NORM, self.kvecs)
        return grad.reshape(pts.shape[:-1] + (2, 2))


def project_velocity(u0, basis: BasisSet, M: int) -> np.ndarray:
    """L2 projection of a velocity field onto the span of the basis.

    `u0` is either a callable mapping points (..., 2) to samples (..., 2) or a
    precomputed sample array of shape (M, M, 2).  Returns the coefficient
    vector.  M must satisfy M >= 2*kmax + 1 or the quadrature aliases.
    """
    grid = basis.grid(M)
    if callable(u0):
        values = np.asarray(u0(grid.points), dtype=float)
    else:
        values = np.asarray(u0, dtype=float)
    if values.shape != (M, M, 2):
        raise ValueError(f"expected samples of shape {(M, M, 2)}, got {values.shape}")
    return grid.project(values)
