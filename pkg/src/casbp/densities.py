"""Gaussian-mixture endpoint densities: grid discretization and sampling.

Densities are renormalized over the rectangular domain, so discretization
divides by the trapezoid integral and sampling rejects draws that land
outside the box.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import Grid2D, ScalarField, integrate_values

Array = np.ndarray

_MAX_CONSECUTIVE_REJECTS = 10_000


@dataclass(frozen=True)
class MixtureComponent:
    weight: float
    mean: Array       # (2,)
    cov: Array        # (2, 2) symmetric positive definite

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64).reshape(2))
        cov = np.asarray(self.cov, dtype=np.float64).reshape(2, 2)
        object.__setattr__(self, "cov", cov)
        if self.weight <= 0:
            raise ValueError(f"component weight must be positive, got {self.weight}")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        if np.any(np.linalg.eigvalsh(cov) <= 0):
            raise ValueError("covariance must have positive eigenvalues")

    @property
    def chol(self) -> Array:
        return np.linalg.cholesky(self.cov)


@dataclass(frozen=True)
class GaussianMixture:
    components: tuple[MixtureComponent, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("mixture needs at least one component")
        object.__setattr__(self, "components", comps)
        total = sum(c.weight for c in comps)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"mixture weights must sum to 1 within 1e-12, got {total!r}")

    @property
    def weights(self) -> Array:
        return np.array([c.weight for c in self.components])

    def pdf(self, x1, x2) -> Array:
        """Unrestricted mixture density at (x1, x2); broadcasts over arrays."""
        x1 = np.asarray(x1, dtype=np.float64)
        x2 = np.asarray(x2, dtype=np.float64)
        out = np.zeros(np.broadcast(x1, x2).shape)
        for c in self.components:
            inv = np.linalg.inv(c.cov)
            det = np.linalg.det(c.cov)
            d1 = x1 - c.mean[0]
            d2 = x2 - c.mean[1]
            quad = inv[0, 0] * d1 * d1 + 2.0 * inv[0, 1] * d1 * d2 + inv[1, 1] * d2 * d2
            out = out + c.weight / (2.0 * np.pi * np.sqrt(det)) * np.exp(-0.5 * quad)
        return out


def gaussian_mixture(components) -> GaussianMixture:
    """Build a mixture from (weight, mean, cov) triples."""
    return GaussianMixture(tuple(MixtureComponent(w, m, c) for w, m, c in components))


def discretize_normalized(mixture: GaussianMixture, grid: Grid2D) -> ScalarField:
    """Mixture density at every node, renormalized to unit trapezoid mass."""
    x1, x2 = grid.mesh()
    values = mixture.pdf(x1, x2)
    mass = integrate_values(values, grid)
    if mass < 1e-12:
        raise ValueError(f"mixture mass over the domain is {mass:g}; essentially all mass lies outside")
    return ScalarField(grid, values / mass)


def _inside(point: Array, grid: Grid2D) -> bool:
    return (grid.x1_min <= point[0] <= grid.x1_max) and (grid.x2_min <= point[1] <= grid.x2_max)


def sample(mixture: GaussianMixture, grid: Grid2D, rng: np.random.Generator) -> Array:
    """One draw from the domain-renormalized mixture (rejection sampling)."""
    weights = mixture.weights
    rejects = 0
    while True:
        k = rng.choice(len(weights), p=weights)
        c = mixture.components[k]
        point = c.mean + c.chol @ rng.standard_normal(2)
        if _inside(point, grid):
            return point
        rejects += 1
        if rejects >= _MAX_CONSECUTIVE_REJECTS:
            raise RuntimeError(
                f"{_MAX_CONSECUTIVE_REJECTS} consecutive rejections; mixture mass is concentrated outside the domain")


def sample_many(mixture: GaussianMixture, grid: Grid2D, rng: np.random.Generator, n: int) -> Array:
    """Vectorized batch of domain-renormalized draws, shape (n, 2).

    Consumes the generator in refill rounds, so the sequence differs from n
    scalar `sample` calls; determinism per generator state still holds.
    """
    weights = mixture.weights
    chols = [c.chol for c in mixture.components]
    means = [c.mean for c in mixture.components]
    out = np.empty((n, 2))
    filled = 0
    rounds = 0
    while filled < n:
        want = n - filled
        ks = rng.choice(len(weights), size=want, p=weights)
        z = rng.standard_normal((want, 2))
        pts = np.empty((want, 2))
        for k in range(len(weights)):
            mask = ks == k
            if np.any(mask):
                pts[mask] = means[k] + z[mask] @ chols[k].T
        ok = ((pts[:, 0] >= grid.x1_min) & (pts[:, 0] <= grid.x1_max)
              & (pts[:, 1] >= grid.x2_min) & (pts[:, 1] <= grid.x2_max))
        kept = pts[ok]
        out[filled:filled + len(kept)] = kept
        filled += len(kept)
        rounds += 1
        if rounds > 1 and len(kept) == 0 and rounds * max(want, 1) > _MAX_CONSECUTIVE_REJECTS:
            raise RuntimeError("rejection sampling stalled; mixture mass is concentrated outside the domain")
    return out


def substream(seed: int, index: int) -> np.random.Generator:
    """Documented seed-splitting: counter-based Philox stream keyed by
    (seed, index), so parallel consumers stay deterministic."""
    key = np.array([np.uint64(index), np.uint64(seed & 0xFFFFFFFFFFFFFFFF)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
