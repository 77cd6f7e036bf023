"""Shared builders for the test suite: problem specs sized for fast runs,
smooth random positive fields, and endpoint mixtures."""

from __future__ import annotations

import numpy as np

from casbp import Grid2D, ProblemSpec, ScalarField, gaussian_mixture, parse


def square_grid(n: int, half_width: float = 1.0) -> Grid2D:
    return Grid2D(-half_width, half_width, -half_width, half_width, n, n)


def make_spec(nx: int = 21, *, f1: str = "x2", f2: str = "-x1^3 - x2",
              q: str = "0.5*(x1^2 + 2*x2^2)", g=((0.0,), (1.0,)),
              sigma=((1.0, 0.0), (0.0, 1.0)), R=None, lam: float = 1.0,
              t0: float = 0.0, t1: float = 0.2, dt: float | None = None,
              stride: int = 5, half_width: float = 1.0) -> ProblemSpec:
    """A small cubic-spring instance by default; dt defaults to half the
    CFL bound of the chosen grid."""
    grid = square_grid(nx, half_width)
    g = np.asarray(g, dtype=float)
    if R is None:
        R = np.eye(g.shape[1])
    spec = ProblemSpec(
        f1=parse(f1), f2=parse(f2), g=g, sigma=np.asarray(sigma, dtype=float),
        q=parse(q), R=np.asarray(R, dtype=float), lam=lam,
        t0=t0, t1=t1, dt=dt if dt is not None else 1.0, grid=grid, buffer_stride=stride)
    if dt is None:
        bound = spec.cfl_bound()
        n_steps = max(1, int(np.ceil((t1 - t0) / (0.5 * bound))))
        spec = ProblemSpec(
            f1=spec.f1, f2=spec.f2, g=spec.g, sigma=spec.sigma, q=spec.q, R=spec.R,
            lam=lam, t0=t0, t1=t1, dt=(t1 - t0) / n_steps, grid=grid, buffer_stride=stride)
    return spec


def matched_spec(nx: int = 21, **kw) -> ProblemSpec:
    """Channel-matched variant: g = sigma = I, R = I, lambda = 1, so the
    mismatch weight is exactly zero."""
    kw.setdefault("g", np.eye(2))
    kw.setdefault("sigma", np.eye(2))
    return make_spec(nx, **kw)


def smooth_positive_field(grid: Grid2D, rng: np.random.Generator,
                          amplitude: float = 0.5) -> ScalarField:
    """exp of a band-limited random surface; stays well clear of the
    positivity floor so it exercises the smooth regime."""
    x1, x2 = grid.mesh()
    s = np.zeros(grid.shape)
    for _ in range(3):
        a, b = rng.uniform(0.5, 2.5, size=2)
        p, r = rng.uniform(0, 2 * np.pi, size=2)
        s += rng.uniform(-amplitude, amplitude) * np.sin(a * np.pi * x1 + p) * np.sin(b * np.pi * x2 + r)
    return ScalarField(grid, np.exp(s))


def gaussian_field(grid: Grid2D, mean, var: float) -> ScalarField:
    x1, x2 = grid.mesh()
    v = np.exp(-((x1 - mean[0]) ** 2 + (x2 - mean[1]) ** 2) / (2.0 * var))
    return ScalarField(grid, v / (2.0 * np.pi * var))


def pair_a_mixtures():
    """First endpoint pair of the production example."""
    rho0 = gaussian_mixture([(1.0, (0.25, -0.25), np.eye(2) / 20.0)])
    rho1 = gaussian_mixture([
        (0.5, (-0.4, 0.4), np.eye(2) / 40.0),
        (0.5, (-0.25, -0.25), np.eye(2) / 20.0),
    ])
    return rho0, rho1


def pair_b_mixtures():
    """Second endpoint pair: 4-component start, 3-component target."""
    means = [(-0.25, -0.25), (-0.25, 0.25), (0.25, -0.25), (0.25, 0.25)]
    rho0 = gaussian_mixture([(0.25, m, np.eye(2) / 80.0) for m in means])
    rho1 = gaussian_mixture([
        (1.0 / 3.0, (0.0, 0.4), np.eye(2) / 40.0),
        (1.0 / 3.0, (-0.3, -0.3), np.eye(2) / 40.0),
        (1.0 / 3.0, (0.3, -0.3), np.eye(2) / 40.0),
    ])
    return rho0, rho1
