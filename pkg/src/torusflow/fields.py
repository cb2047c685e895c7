"""Grid sampling, norms, snapshots, and pressure recovery.

Velocities live in the span of a BasisSet as coefficient vectors; scalar and
vector fields sampled on the uniform M x M grid are carried as GridField
objects.  Grid node [a, b] sits at x = (2pi a/M, 2pi b/M) and indexing is
periodic (index mod M).  All integrals over the torus use the trapezoid rule
with weight (2pi/M)^2, which is exact for trigonometric polynomials whose
wavenumbers stay below the grid Nyquist limit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisSet


@dataclass
class SpectralVelocity:
    """Velocity in basis coordinates: u = sum_n coeffs[n] * w_n."""

    basis: BasisSet
    coeffs: np.ndarray

    def l2(self) -> float:
        # Parseval: the coefficient norm is the L2 norm.
        return float(np.linalg.norm(self.coeffs))


@dataclass
class GridField:
    """Samples on the uniform grid: shape (M, M) scalar or (M, M, 2) vector."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim not in (2, 3):
            raise ValueError("GridField expects (M, M) or (M, M, 2) samples")
        if self.values.shape[0] != self.values.shape[1]:
            raise ValueError("GridField grid must be square")
        if self.values.ndim == 3 and self.values.shape[2] != 2:
            raise ValueError("vector GridField needs exactly 2 components")

    @property
    def M(self) -> int:
        return self.values.shape[0]

    @property
    def components(self) -> int:
        return 1 if self.values.ndim == 2 else 2

    def quadrature_weight(self) -> float:
        return (2.0 * np.pi / self.M) ** 2


def grid_points(M: int) -> np.ndarray:
    axis = 2.0 * np.pi * np.arange(M) / M
    X, Y = np.meshgrid(axis, axis, indexing="ij")
    return np.stack([X, Y], axis=-1)


def integrate(field: GridField) -> float:
    """Trapezoid integral over the torus (componentwise sum for vectors)."""
    return float(field.quadrature_weight() * field.values.sum())


def lp_norm(field: GridField, p: float) -> float:
    """L^p norm; vector fields use the pointwise Euclidean magnitude."""
    v = field.values
    mag = np.abs(v) if v.ndim == 2 else np.sqrt((v * v).sum(axis=-1))
    return float((field.quadrature_weight() * (mag**p).sum()) ** (1.0 / p))


@dataclass
class NormReport:
    l2: float
    h1dot: float
    h2dot: float
    linf: float
    grad_linf: float
    l6: float


def synthesize(u: SpectralVelocity, M: int) -> GridField:
    """Sample the velocity on the M x M grid by direct mode summation."""
    return GridField(u.basis.grid(M).synthesize(u.coeffs))


def gradient_grid(u: SpectralVelocity, M: int) -> np.ndarray:
    """Analytic velocity gradient on the grid, shape (M, M, 2, 2).

    Entry [a, b, i, alpha] is the derivative of component i along axis alpha.
    """
    return u.basis.grid(M).synthesize_gradient(u.coeffs)


def norms(u: SpectralVelocity, M: int) -> NormReport:
    """L2/H1/H2 seminorms (spectral, exact) plus grid sup-norms and L6.

    The eigenbasis diagonalizes the Laplacian, so ||grad u||_2^2 = sum lam f^2
    and ||grad^2 u||_2^2 = sum lam^2 f^2 hold exactly in coefficients.
    """
    f = u.coeffs
    lam = u.basis.lambdas
    ugrid = synthesize(u, M)
    grad = gradient_grid(u, M)
    mag = np.sqrt((ugrid.values ** 2).sum(axis=-1))
    gmag = np.sqrt((grad**2).sum(axis=(-2, -1)))  # Frobenius magnitude
    return NormReport(
        l2=float(np.linalg.norm(f)),
        h1dot=float(np.sqrt((lam * f * f).sum())),
        h2dot=float(np.sqrt((lam * lam * f * f).sum())),
        linf=float(mag.max()),
        grad_linf=float(gmag.max()),
        l6=lp_norm(ugrid, 6.0),
    )


def _wavenumbers(M: int) -> np.ndarray:
    return np.fft.fftfreq(M, d=1.0 / M)


def leray_pressure(residual: GridField, mean_tol: float = 1e-8) -> GridField:
    """Pressure part of a Helmholtz decomposition: solve lap p = div g.

    The input must be a vector field with (numerically) zero mean per
    component; a nonzero mean admits no gradient representation and is
    rejected.  The solve runs in trigonometric space with the zero-mean gauge
    for p.  Nyquist rows are dropped for even M, which only matters for
    content at exactly the grid limit.
    """
    if residual.components != 2:
        raise ValueError("leray_pressure expects a vector field")
    M = residual.M
    scale = max(1.0, float(np.abs(residual.values).max()))
    means = residual.values.mean(axis=(0, 1))
    if np.abs(means).max() > mean_tol * scale:
        raise ValueError(
            f"input mean {means} is not zero; no gradient field matches it"
        )
    kx = _wavenumbers(M)[:, None]
    ky = _wavenumbers(M)[None, :]
    gx = np.fft.fft2(residual.values[..., 0])
    gy = np.fft.fft2(residual.values[..., 1])
    div_hat = 1j * (kx * gx + ky * gy)
    lap = -(kx * kx + ky * ky)
    lap[0, 0] = 1.0
    p_hat = div_hat / lap
    p_hat[0, 0] = 0.0
    if M % 2 == 0:
        p_hat[M // 2, :] = 0.0
        p_hat[:, M // 2] = 0.0
    return GridField(np.real(np.fft.ifft2(p_hat)))


def spectral_gradient(scalar: GridField) -> GridField:
    """Gradient of a scalar grid field computed in trigonometric space."""
    if scalar.components != 1:
        raise ValueError("spectral_gradient expects a scalar field")
    M = scalar.M
    kx = _wavenumbers(M)[:, None]
    ky = _wavenumbers(M)[None, :]
    f_hat = np.fft.fft2(scalar.values)
    if M % 2 == 0:
        f_hat[M // 2, :] = 0.0
        f_hat[:, M // 2] = 0.0
    gx = np.real(np.fft.ifft2(1j * kx * f_hat))
    gy = np.real(np.fft.ifft2(1j * ky * f_hat))
    return GridField(np.stack([gx, gy], axis=-1))


def gagliardo_nirenberg_ratio(u: SpectralVelocity, M: int) -> float:
    """Ratio ||u||_inf^2 / (||grad u||_2 ||grad^2 u||_2), zero field -> 0."""
    rep = norms(u, M)
    denom = rep.h1dot * rep.h2dot
    if denom == 0.0:
        return 0.0
    return rep.linf**2 / denom


def save_snapshot(field: GridField, path) -> None:
    """Write the snapshot format: header `M=<int> components=<1|2>`, then
    M^2 space-separated rows in (a, b) order with a varying fastest."""
    v = field.values
    M = field.M
    comps = field.components
    with open(path, "w") as fh:
        fh.write(f"M={M} components={comps}\n")
        for b in range(M):
            for a in range(M):
                if comps == 1:
                    fh.write(f"{float(v[a, b])!r}\n")
                else:
                    fh.write(f"{float(v[a, b, 0])!r} {float(v[a, b, 1])!r}\n")


def load_snapshot(path) -> GridField:
    with open(path) as fh:
        header = fh.readline().split()
        meta = dict(part.split("=") for part in header)
        M, comps = int(meta["M"]), int(meta["components"])
        shape = (M, M) if comps == 1 else (M, M, 2)
        values = np.empty(shape)
        for b in range(M):
            for a in range(M):
                row = fh.readline().split()
                if len(row) != comps:
                    raise ValueError(f"snapshot row has {len(row)} values, expected {comps}")
                if comps == 1:
                    values[a, b] = float(row[0])
                else:
                    values[a, b, 0] = float(row[0])
                    values[a, b, 1] = float(row[1])
    return GridField(values)
