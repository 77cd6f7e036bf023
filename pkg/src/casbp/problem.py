"""Problem instance: dynamics, costs, channels, horizon, and validation.

The input map g, noise map sigma, and control weight R are constant
matrices; drift components and the state cost are expressions in (t, x1,
x2). Construction only checks shapes so that degenerate test instances can
be built; everything the explicit scheme needs (CFL bound, positive
diffusion diagonal, nonnegative running cost, the lambda convention) is
enforced by `validate`, and the solver refuses to run on a hard failure.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .exprs import Expr, evaluate_on_grid
from .grids import Grid2D

Array = np.ndarray

CFL_SAFETY = 0.9


@dataclass(frozen=True)
class ProblemSpec:
    f1: Expr
    f2: Expr
    g: Array               # (2, m) input map
    sigma: Array           # (2, p) noise map
    q: Expr                # state cost, >= 0 on the domain
    R: Array               # (m, m) control weight, symmetric positive definite
    lam: float
    t0: float
    t1: float
    dt: float
    grid: Grid2D
    buffer_stride: int = 10

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.g, dtype=np.float64))
        if g.shape[0] != 2:
            raise ValueError(f"g must have 2 rows, got shape {g.shape}")
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=np.float64))
        if sigma.shape[0] != 2:
            raise ValueError(f"sigma must have 2 rows, got shape {sigma.shape}")
        m = g.shape[1]
        R = np.atleast_2d(np.asarray(self.R, dtype=np.float64))
        if R.shape != (m, m):
            raise ValueError(f"R must be {m}x{m} to match g, got {R.shape}")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "R", R)

    @cached_property
    def Sigma(self) -> Array:
        """Diffusion tensor sigma @ sigma.T."""
        return self.sigma @ self.sigma.T

    @property
    def m(self) -> int:
        return self.g.shape[1]

    @property
    def horizon(self) -> float:
        return self.t1 - self.t0

    @cached_property
    def n_steps(self) -> int:
        return max(1, int(round(self.horizon / self.dt)))

    @cached_property
    def dt_effective(self) -> float:
        """Step adjusted so n_steps * dt covers the horizon exactly."""
        return self.horizon / self.n_steps

    def mismatch_matrix(self) -> Array:
        """Channel-mismatch weight lam * g R^-1 g^T - Sigma."""
        try:
            c = np.linalg.cholesky(self.R)
        except np.linalg.LinAlgError:
            raise ValueError("R is not positive definite") from None
        half = np.linalg.solve(c, self.g.T)          # c^-1 g^T
        return self.lam * (half.T @ half) - self.Sigma

    @cached_property
    def control_recovery_matrix(self) -> Array:
        """lam * R^-1 g^T, the (m, 2) weight applied to grad log phi."""
        return self.lam * np.linalg.solve(self.R, self.g.T)

    def cfl_bound(self) -> float:
        s = self.Sigma
        denom = abs(s[0, 0]) + abs(s[1, 1]) + abs(s[0, 1])
        if denom == 0.0:
            return np.inf
        return CFL_SAFETY * min(self.grid.dx**2, self.grid.dy**2) / denom

    def validate(self) -> "ValidationReport":
        failures: list[str] = []
        if not np.isfinite(self.lam) or self.lam <= 0:
            failures.append(f"lambda must be positive, got {self.lam}")
        if not self.t0 < self.t1:
            failures.append(f"time horizon is empty: t0={self.t0}, t1={self.t1}")
        if not (np.isfinite(self.dt) and self.dt > 0):
            failures.append(f"dt must be positive, got {self.dt}")
        if self.buffer_stride < 1:
            failures.append(f"buffer_stride must be a positive integer, got {self.buffer_stride}")

        sig = self.Sigma
        if sig[0, 0] <= 0 or sig[1, 1] <= 0:
            failures.append("Sigma needs strictly positive diagonal entries for the explicit scheme")

        try:
            w = self.mismatch_matrix()
            mismatch_norm = float(np.max(np.abs(w).sum(axis=1)))
            w_psd = bool(np.all(np.linalg.eigvalsh(w) >= -1e-12))
            mismatched = mismatch_norm > 1e-12
        except ValueError as exc:
            failures.append(str(exc))
            w = None
            mismatch_norm = float("nan")
            w_psd = False
            mismatched = False
        if mismatched and abs(self.lam - 1.0) > 1e-12:
            failures.append(
                f"lambda={self.lam} with mismatched channels; lambda must be 1 unless lam*g*R^-1*g^T equals Sigma")

        bound = self.cfl_bound()
        cfl_ok = self.dt <= bound
        if not cfl_ok:
            failures.append(f"CFL violation: dt={self.dt:g} exceeds the admissible bound {bound:g}")

        q_min = np.inf
        q_ok = True
        try:
            for t in (self.t0, 0.5 * (self.t0 + self.t1), self.t1):
                q_min = min(q_min, float(evaluate_on_grid(self.q, t, self.grid).min()))
            q_ok = q_min >= 0.0
            if not q_ok:
                failures.append(f"state cost must be nonnegative on the grid; sampled minimum {q_min:g}")
        except Exception as exc:
            q_ok = False
            q_min = float("nan")
            failures.append(f"state cost evaluation failed: {exc}")

        return ValidationReport(
            cfl_ok=cfl_ok,
            cfl_bound=float(bound),
            dt=float(self.dt),
            mismatch_norm=mismatch_norm,
            w_psd=w_psd,
            q_nonnegative=q_ok,
            q_min_sampled=q_min,
            failures=failures,
        )

    def with_stride(self, stride: int) -> "ProblemSpec":
        return replace(self, buffer_stride=int(stride))


@dataclass(frozen=True)
class ValidationReport:
    cfl_ok: bool
    cfl_bound: float
    dt: float
    mismatch_norm: float
    w_psd: bool
    q_nonnegative: bool
    q_min_sampled: float
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def format(self) -> str:
        lines = [
            f"CFL: {'pass' if self.cfl_ok else 'FAIL'} (dt={self.dt:g}, admissible bound {self.cfl_bound:g})",
            f"mismatch |W|_inf: {self.mismatch_norm:g}",
            f"W positive semidefinite: {self.w_psd}",
            f"state cost nonnegative: {self.q_nonnegative} (sampled min {self.q_min_sampled:g})",
        ]
        if self.failures:
            lines.append("hard failures:")
            lines.extend(f"  - {f}" for f in self.failures)
        else:
            lines.append("hard failures: none")
        return "\n".join(lines)
