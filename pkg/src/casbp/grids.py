"""Uniform 2-D grids, sampled fields, and finite-difference stencils.

Conventions used everywhere downstream:

* node (i, j) sits at (x1_min + i*dx, x2_min + j*dy);
* field values are stored as an (nx, ny) float array, row-major with i as
  the outer index;
* two boundary treatments are exposed: "one-sided" (first-order one-sided
  differences on the walls, the default for gradient/divergence) and
  "neumann" (mirror ghost nodes, used by the PDE steppers).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Array = np.ndarray

BOUNDARY_MODES = ("one-sided", "neumann")


@dataclass(frozen=True)
class Grid2D:
    x1_min: float
    x1_max: float
    x2_min: float
    x2_max: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"grid needs at least 3 points per axis, got {self.nx}x{self.ny}")
        if not (self.x1_max > self.x1_min and self.x2_max > self.x2_min):
            raise ValueError("grid bounds must satisfy x1_min < x1_max and x2_min < x2_max")

    @property
    def dx(self) -> float:
        return (self.x1_max - self.x1_min) / (self.nx - 1)

    @property
    def dy(self) -> float:
        return (self.x2_max - self.x2_min) / (self.ny - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    def x1(self) -> Array:
        return np.linspace(self.x1_min, self.x1_max, self.nx)

    def x2(self) -> Array:
        return np.linspace(self.x2_min, self.x2_max, self.ny)

    def mesh(self) -> tuple[Array, Array]:
        """Coordinate matrices X1[i, j], X2[i, j] matching field storage."""
        return np.meshgrid(self.x1(), self.x2(), indexing="ij")


@dataclass(frozen=True)
class ScalarField:
    grid: Grid2D
    values: Array

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if v.shape != self.grid.shape:
            raise ValueError(f"field shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            bad = tuple(int(k) for k in np.argwhere(~np.isfinite(v))[0])
            raise ValueError(f"field contains a non-finite entry at node {bad}")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid2D, fn) -> "ScalarField":
        x1, x2 = grid.mesh()
        return cls(grid, np.broadcast_to(np.asarray(fn(x1, x2), dtype=np.float64), grid.shape).copy())

    @classmethod
    def constant(cls, grid: Grid2D, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))


@dataclass(frozen=True)
class VectorField2:
    grid: Grid2D
    v1: Array
    v2: Array

    def __post_init__(self):
        for name in ("v1", "v2"):
            v = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=np.float64))
            if v.shape != self.grid.shape:
                raise ValueError(f"component {name} shape {v.shape} does not match grid {self.grid.shape}")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"component {name} contains non-finite entries")
            object.__setattr__(self, name, v)


def _check_boundary(boundary: str):
    if boundary not in BOUNDARY_MODES:
        raise ValueError(f"boundary must be one of {BOUNDARY_MODES}, got {boundary!r}")


def _grad_axis0(v: Array, dx: float, boundary: str) -> Array:
    g = np.empty_like(v)
    g[1:-1, :] = (v[2:, :] - v[:-2, :]) / (2.0 * dx)
    if boundary == "one-sided":
        g[0, :] = (v[1, :] - v[0, :]) / dx
        g[-1, :] = (v[-1, :] - v[-2, :]) / dx
    else:  # mirror ghost: zero normal derivative at the wall
        g[0, :] = 0.0
        g[-1, :] = 0.0
    return g


def _grad_axis1(v: Array, dy: float, boundary: str) -> Array:
    g = np.empty_like(v)
    g[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2.0 * dy)
    if boundary == "one-sided":
        g[:, 0] = (v[:, 1] - v[:, 0]) / dy
        g[:, -1] = (v[:, -1] - v[:, -2]) / dy
    else:
        g[:, 0] = 0.0
        g[:, -1] = 0.0
    return g


def gradient(f: ScalarField, boundary: str = "one-sided") -> VectorField2:
    """Central differences at interior nodes, boundary per `boundary`."""
    _check_boundary(boundary)
    g = f.grid
    return VectorField2(g, _grad_axis0(f.values, g.dx, boundary), _grad_axis1(f.values, g.dy, boundary))


def divergence(v: VectorField2, boundary: str = "one-sided") -> ScalarField:
    _check_boundary(boundary)
    g = v.grid
    return ScalarField(g, _grad_axis0(v.v1, g.dx, boundary) + _grad_axis1(v.v2, g.dy, boundary))


def _reflect_pad(v: Array) -> Array:
    """One ghost layer with mirror values: ghost[-1] = v[1] etc."""
    return np.pad(v, 1, mode="reflect")


def laplacian_weighted(f: ScalarField, sigma: Array, boundary: str = "neumann") -> ScalarField:
    """Weighted Laplacian sum_ij d2(sigma_ij * f)/dxi dxj for constant sigma.

    Standard 5-point second differences on each axis plus the centered
    cross stencil; walls use mirror ghost values ("neumann") or one-sided
    second differences.
    """
    _check_boundary(boundary)
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.shape != (2, 2):
        raise ValueError(f"sigma must be 2x2, got {sigma.shape}")
    if not np.allclose(sigma, sigma.T, rtol=0.0, atol=1e-12):
        raise ValueError("sigma must be symmetric")
    g = f.grid
    dx, dy = g.dx, g.dy
    v = f.values
    if boundary == "neumann":
        p = _reflect_pad(v)
        fxx = (p[2:, 1:-1] - 2.0 * v + p[:-2, 1:-1]) / dx**2
        fyy = (p[1:-1, 2:] - 2.0 * v + p[1:-1, :-2]) / dy**2
        fxy = (p[2:, 2:] - p[2:, :-2] - p[:-2, 2:] + p[:-2, :-2]) / (4.0 * dx * dy)
    else:
        fxx = np.empty_like(v)
        fxx[1:-1, :] = (v[2:, :] - 2.0 * v[1:-1, :] + v[:-2, :]) / dx**2
        fxx[0, :] = (v[2, :] - 2.0 * v[1, :] + v[0, :]) / dx**2
        fxx[-1, :] = (v[-1, :] - 2.0 * v[-2, :] + v[-3, :]) / dx**2
        fyy = np.empty_like(v)
        fyy[:, 1:-1] = (v[:, 2:] - 2.0 * v[:, 1:-1] + v[:, :-2]) / dy**2
        fyy[:, 0] = (v[:, 2] - 2.0 * v[:, 1] + v[:, 0]) / dy**2
        fyy[:, -1] = (v[:, -1] - 2.0 * v[:, -2] + v[:, -3]) / dy**2
        gx = _grad_axis0(v, dx, "one-sided")
        fxy = _grad_axis1(gx, dy, "one-sided")
    return ScalarField(g, sigma[0, 0] * fxx + 2.0 * sigma[0, 1] * fxy + sigma[1, 1] * fyy)


def trapezoid_weights(grid: Grid2D) -> tuple[Array, Array]:
    w1 = np.full(grid.nx, grid.dx)
    w1[0] *= 0.5
    w1[-1] *= 0.5
    w2 = np.full(grid.ny, grid.dy)
    w2[0] *= 0.5
    w2[-1] *= 0.5
    return w1, w2


def integrate(f: ScalarField) -> float:
    """Tensor-product trapezoid quadrature over the rectangle."""
    w1, w2 = trapezoid_weights(f.grid)
    return float(np.einsum("i,ij,j->", w1, f.values, w2))


def integrate_values(values: Array, grid: Grid2D) -> float:
    w1, w2 = trapezoid_weights(grid)
    return float(np.einsum("i,ij,j->", w1, values, w2))


def bilinear_sample(f: ScalarField, x) -> float:
    """Bilinear interpolation at one point; clamps points at most one cell
    outside the domain, rejects anything farther."""
    pts = np.asarray(x, dtype=np.float64).reshape(1, 2)
    return float(bilinear_sample_many(f, pts)[0])


def bilinear_sample_many(f: ScalarField, pts: Array) -> Array:
    g = f.grid
    pts = np.asarray(pts, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("pts must have shape (n, 2)")
    x1, x2 = pts[:, 0], pts[:, 1]
    if np.any(x1 < g.x1_min - g.dx) or np.any(x1 > g.x1_max + g.dx) or \
       np.any(x2 < g.x2_min - g.dy) or np.any(x2 > g.x2_max + g.dy):
        k = int(np.argmax((x1 < g.x1_min - g.dx) | (x1 > g.x1_max + g.dx)
                          | (x2 < g.x2_min - g.dy) | (x2 > g.x2_max + g.dy)))
        raise ValueError(f"point {tuple(pts[k])} lies more than one cell outside the domain")
    u = np.clip((x1 - g.x1_min) / g.dx, 0.0, g.nx - 1.0)
    v = np.clip((x2 - g.x2_min) / g.dy, 0.0, g.ny - 1.0)
    i0 = np.minimum(u.astype(np.int64), g.nx - 2)
    j0 = np.minimum(v.astype(np.int64), g.ny - 2)
    s = u - i0
    t = v - j0
    vals = f.values
    return ((1.0 - s) * (1.0 - t) * vals[i0, j0]
            + s * (1.0 - t) * vals[i0 + 1, j0]
            + (1.0 - s) * t * vals[i0, j0 + 1]
            + s * t * vals[i0 + 1, j0 + 1])
