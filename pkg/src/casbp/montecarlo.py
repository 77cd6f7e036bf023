"""Independent check of a computed policy: simulate the controlled SDE and
measure distributional agreement with the target density.

Particles use counter-based Philox streams keyed by (seed, particle index),
so results are bitwise reproducible regardless of chunking or parallelism.
The feedback control is read from the policy snapshots by zero-order hold
in time and bilinear interpolation in space; particles that step outside
the domain are clamped to the wall (the Neumann idealization) and counted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .densities import GaussianMixture, sample, substream
from .grids import ScalarField, bilinear_sample_many
from .problem import ProblemSpec

Array = np.ndarray

DEFAULT_BINS = 50
DT_MC_FACTOR = 10.0


@dataclass
class EnsembleResult:
    n_particles: int
    seed: int
    terminal_points: Array      # (n, 2), all inside the closed domain
    escaped: int                # particles clamped at a wall at least once
    tv_to_target: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.terminal_points)):
            raise ValueError("terminal points must be finite")
        if not np.isfinite(self.tv_to_target):
            raise ValueError("tv_to_target must be finite")


def simulate_policy(spec: ProblemSpec, rho0: GaussianMixture,
                    policy_times: Array, policy_fields: list[list[ScalarField]],
                    n_particles: int, seed: int, *, dt_mc: float | None = None,
                    target: ScalarField | None = None, bins: int = DEFAULT_BINS,
                    chunk: int = 5000) -> EnsembleResult:
    """Euler-Maruyama ensemble under an explicit snapshot policy."""
    if n_particles < 1:
        raise ValueError("n_particles must be at least 1")
    grid = spec.grid
    horizon = spec.horizon
    if dt_mc is None:
        dt_mc = DT_MC_FACTOR * spec.dt_effective
    n_mc = max(1, int(round(horizon / dt_mc)))
    dt = horizon / n_mc
    sqrt_dt = np.sqrt(dt)

    policy_times = np.asarray(policy_times, dtype=np.float64)
    m = spec.m
    p_noise = spec.sigma.shape[1]
    g_mat = spec.g
    sigma = spec.sigma
    lo = np.array([grid.x1_min, grid.x2_min])
    hi = np.array([grid.x1_max, grid.x2_max])
    time_eps = 1e-9 * max(horizon, 1.0)

    terminal = np.empty((n_particles, 2))
    escaped_total = 0

    for start in range(0, n_particles, chunk):
        stop = min(start + chunk, n_particles)
        c = stop - start
        gens = [substream(seed, i) for i in range(start, stop)]
        x = np.array([sample(rho0, grid, g) for g in gens])
        noise = np.empty((c, n_mc, p_noise))
        for k, g in enumerate(gens):
            noise[k] = g.standard_normal((n_mc, p_noise))
        ever_clamped = np.zeros(c, dtype=bool)

        for j in range(n_mc):
            t = spec.t0 + j * dt
            pi = int(np.searchsorted(policy_times, t + time_eps, side="right") - 1)
            pi = max(pi, 0)
            u = np.empty((c, m))
            for comp in range(m):
                u[:, comp] = bilinear_sample_many(policy_fields[pi][comp], x)
            drift = np.empty_like(x)
            drift[:, 0] = spec.f1.eval(t, x[:, 0], x[:, 1])
            drift[:, 1] = spec.f2.eval(t, x[:, 0], x[:, 1])
            with np.errstate(over="ignore", invalid="ignore"):
                x = x + (drift + u @ g_mat.T) * dt + sqrt_dt * (noise[:, j, :] @ sigma.T)
            if not np.all(np.isfinite(x)):
                bad = int(np.argwhere(~np.isfinite(x))[0][0])
                raise RuntimeError(f"non-finite state for particle {start + bad} at step {j + 1}")
            outside = (x[:, 0] < lo[0]) | (x[:, 0] > hi[0]) | (x[:, 1] < lo[1]) | (x[:, 1] > hi[1])
            if np.any(outside):
                ever_clamped |= outside
                np.clip(x, lo, hi, out=x)

        terminal[start:stop] = x
        escaped_total += int(np.count_nonzero(ever_clamped))

    tv = float("nan")
    if target is not None:
        tv = tv_distance(terminal, target, bins)
    return EnsembleResult(
        n_particles=n_particles, seed=seed, terminal_points=terminal,
        escaped=escaped_total,
        tv_to_target=tv if target is not None else 0.0,
    )


def simulate(solution, spec: ProblemSpec, rho0: GaussianMixture,
             n_particles: int, seed: int, *, dt_mc: float | None = None,
             target: ScalarField | None = None, bins: int = DEFAULT_BINS,
             chunk: int = 5000) -> EnsembleResult:
    """Simulate the controlled SDE under a Solution's recovered policy."""
    if target is None:
        target = solution.rho_opt[-1]
    return simulate_policy(spec, rho0, solution.snapshot_times, solution.u_opt,
                           n_particles, seed, dt_mc=dt_mc, target=target,
                           bins=bins, chunk=chunk)


def tv_distance(points: Array, target: ScalarField, bins: int) -> float:
    """Total variation between a point cloud and a density on the grid.

    Both are reduced to a bins x bins uniform partition of the domain: the
    points by counting, the density by node-averaging per cell (times the
    cell area) and renormalizing.
    """
    if bins < 2:
        raise ValueError("bins must be at least 2")
    grid = target.grid
    pts = np.asarray(points, dtype=np.float64)
    counts, _, _ = np.histogram2d(
        pts[:, 0], pts[:, 1], bins=bins,
        range=[[grid.x1_min, grid.x1_max], [grid.x2_min, grid.x2_max]])
    p_hat = counts / max(len(pts), 1)

    cw1 = (grid.x1_max - grid.x1_min) / bins
    cw2 = (grid.x2_max - grid.x2_min) / bins
    i_cell = np.minimum(((grid.x1() - grid.x1_min) / cw1).astype(np.int64), bins - 1)
    j_cell = np.minimum(((grid.x2() - grid.x2_min) / cw2).astype(np.int64), bins - 1)
    sums = np.zeros((bins, bins))
    cnts = np.zeros((bins, bins))
    flat = i_cell[:, None] * bins + j_cell[None, :]
    np.add.at(sums.ravel(), flat.ravel(), target.values.ravel())
    np.add.at(cnts.ravel(), flat.ravel(), 1.0)
    p_cell = np.where(cnts > 0, sums / np.maximum(cnts, 1.0), 0.0) * (cw1 * cw2)
    total = p_cell.sum()
    if total <= 0:
        raise ValueError("target density has no mass on the domain")
    p_cell /= total
    return float(0.5 * np.abs(p_hat - p_cell).sum())
