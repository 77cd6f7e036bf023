"""Outer Sinkhorn-with-memory loop, boundary divisions, and recovery.

One epoch is: backward solve from the current terminal factor (buffering
the trajectory), divide the initial density by the result, forward solve
against the buffer, divide the terminal density by the result. The change
of both boundary factors between consecutive epochs, measured in the
Hilbert projective metric, is the convergence criterion; it is recorded
from the second epoch onward, once both "old" fields come from complete
epochs. The recursion structurally starts from the terminal-side factor;
there is no initial-side entry point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BlowUpError, DegenerateFieldError, ValidationError
from .exprs import evaluate_on_grid
from .grids import ScalarField, _grad_axis0, _grad_axis1
from .hilbert import hilbert_distance
from .grids import trapezoid_weights
from .kernels import (FLOOR_FRACTION_LIMIT, MARCH_FLOOR_REL, TrajectoryBuffer,
                      _coupling_arrays, _march_floor, backward_solve, forward_solve_with_memory)
from .problem import ProblemSpec

Array = np.ndarray

DEFAULT_TOL = 1e-2
DEFAULT_MAXITER = 200
CONTINUATION_RAMP = (0.0, 0.25, 0.5, 0.75, 1.0)


def divide(rho: ScalarField, phi: ScalarField, label: str = "divisor") -> ScalarField:
    """Node-wise rho / max(phi, floor) with a relative positivity floor.

    The floor matches the one used by the PDE marches: the factor fields
    legitimately span many tens of orders of magnitude between their wall
    layers and their bulk, so a tighter relative floor would brand healthy
    divisors degenerate. The >1% trip wire still catches fields that have
    genuinely collapsed."""
    if rho.grid != phi.grid:
        raise ValueError("fields live on different grids")
    if float(rho.values.min()) < 0.0:
        raise ValueError("numerator must be nonnegative")
    m = float(phi.values.max())
    if not np.isfinite(m) or m <= 0.0:
        raise DegenerateFieldError(label, f"maximum {m!r} unusable as divisor")
    floor = _march_floor(m)
    n_below = int(np.count_nonzero(phi.values < floor))
    if n_below > FLOOR_FRACTION_LIMIT * phi.values.size:
        raise DegenerateFieldError(
            label, f"positivity floor active on {n_below}/{phi.values.size} nodes (> 1%)")
    return ScalarField(rho.grid, rho.values / np.maximum(phi.values, floor))


def _control_fields(phi_values: Array, spec: ProblemSpec) -> list[ScalarField]:
    """Control recovery lam R^-1 g^T grad(log phi) as m scalar fields."""
    g = spec.grid
    m = float(phi_values.max())
    logv = np.log(np.maximum(phi_values, _march_floor(m)))
    gx = _grad_axis0(logv, g.dx, "one-sided")
    gy = _grad_axis1(logv, g.dy, "one-sided")
    rec = spec.control_recovery_matrix  # (m, 2)
    return [ScalarField(g, rec[k, 0] * gx + rec[k, 1] * gy) for k in range(spec.m)]


def reaction_diagnostic(phi_t: ScalarField, t: float, spec: ProblemSpec,
                        scale: float = 1.0) -> ScalarField:
    """The nonexpansiveness diagnostic q_phi + q/lambda at time t."""
    g = phi_t.grid
    w = scale * spec.mismatch_matrix()
    _, _, qp = _coupling_arrays(phi_t.values, w, g.dx, g.dy, "phi")
    return ScalarField(g, qp + evaluate_on_grid(spec.q, t, g) / spec.lam)


@dataclass
class Solution:
    """Converged (or stalled) factor trajectories and recovered quantities."""

    spec: ProblemSpec
    converged: bool
    iterations: int
    trace: list[tuple[int, float]]
    snapshot_times: Array
    phi_snapshots: list[ScalarField]
    phi_hat_snapshots: list[ScalarField]
    rho_opt: list[ScalarField]
    u_opt: list[list[ScalarField]]
    reaction: list[ScalarField]
    phi1_final: ScalarField
    coupling_scale: float = 1.0

    @property
    def n_snapshots(self) -> int:
        return len(self.snapshot_times)

    @property
    def final_err(self) -> float:
        return self.trace[-1][1] if self.trace else float("inf")


def _recover(spec: ProblemSpec, buffer: TrajectoryBuffer,
             hat_snaps: list[Array], scale: float):
    grid = spec.grid
    times = buffer.times
    phi_fields = [ScalarField(grid, v) for v in buffer.snapshots]
    hat_fields = [ScalarField(grid, v) for v in hat_snaps]
    rho = [ScalarField(grid, h.values * p.values) for h, p in zip(hat_fields, phi_fields)]
    u = [_control_fields(p.values, spec) for p in phi_fields]
    reaction = [reaction_diagnostic(p, float(t), spec, scale) for p, t in zip(phi_fields, times)]
    return phi_fields, hat_fields, rho, u, reaction


def run(spec: ProblemSpec, rho0: ScalarField, rho1: ScalarField,
        phi_init: ScalarField | None = None, tol: float = DEFAULT_TOL,
        maxiter: int = DEFAULT_MAXITER, coupling_scale: float = 1.0) -> Solution:
    """Iterate the memory recursion until the boundary factors settle.

    Non-convergence is reported through the returned Solution, not raised;
    kernel blow-up/degeneracy errors are re-raised annotated with the
    iteration index.
    """
    report = spec.validate()
    if not report.ok:
        raise ValidationError(report)
    grid = spec.grid
    for name, f in (("rho0", rho0), ("rho1", rho1)):
        if f.grid != grid:
            raise ValueError(f"{name} grid does not match the problem grid")
    if phi_init is None:
        phi_init = ScalarField.constant(grid, 1.0)
    if phi_init.grid != grid:
        raise ValueError("phi_init grid does not match the problem grid")
    if float(phi_init.values.min()) <= 0.0:
        raise ValueError("phi_init must be strictly positive")
    if maxiter < 1:
        raise ValueError("maxiter must be at least 1")

    _w1, _w2 = trapezoid_weights(grid)
    phi1 = phi_init
    phi_hat0_old: ScalarField | None = None
    phi1_old: ScalarField | None = None
    trace: list[tuple[int, float]] = []
    converged = False
    buffer = None
    hat_snaps: list[Array] = []

    iteration = 0
    while iteration < maxiter and not converged:
        iteration += 1
        try:
            # rescale by an exact power of two (projective freedom) chosen
            # from the rho1-weighted geometric mean: the bulk of the factor
            # stays near unit scale even when transient spikes carry the
            # maximum far away, so repeated passes cannot drift into
            # overflow/underflow; a power of two changes no mantissa
            logv = np.log(np.maximum(phi1.values, _march_floor(float(phi1.values.max()))))
            c = 2.0 ** np.round(np.einsum("i,ij,j->", _w1, rho1.values * logv, _w2) / np.log(2.0))
            if np.isfinite(c) and c != 1.0 and c != 0.0:
                phi1 = ScalarField(grid, phi1.values / c)
            phi0, buffer = backward_solve(phi1, spec, coupling_scale)
            phi_hat0 = divide(rho0, phi0, label="phi0")
            phi_hat1, hat_snaps = forward_solve_with_memory(phi_hat0, buffer, spec, coupling_scale)
            phi1_new = divide(rho1, phi_hat1, label="phi_hat1")
        except (BlowUpError, DegenerateFieldError) as exc:
            exc.iteration = iteration
            exc.args = (f"iteration {iteration}: {exc.args[0]}",)
            raise
        if iteration >= 2:
            err = max(
                hilbert_distance(phi_hat0, phi_hat0_old, labels=("phi_hat0", "phi_hat0_old")),
                hilbert_distance(phi1_new, phi1_old, labels=("phi1", "phi1_old")),
            )
            trace.append((iteration, err))
            if err <= tol:
                converged = True
        phi_hat0_old = phi_hat0
        phi1_old = phi1_new
        phi1 = phi1_new

    phi_f, hat_f, rho, u, reaction = _recover(spec, buffer, hat_snaps, coupling_scale)
    return Solution(
        spec=spec,
        converged=converged,
        iterations=iteration,
        trace=trace,
        snapshot_times=buffer.times,
        phi_snapshots=phi_f,
        phi_hat_snapshots=hat_f,
        rho_opt=rho,
        u_opt=u,
        reaction=reaction,
        phi1_final=phi1,
        coupling_scale=coupling_scale,
    )


def run_with_continuation(spec: ProblemSpec, rho0: ScalarField, rho1: ScalarField,
                          tol: float = DEFAULT_TOL, maxiter: int = DEFAULT_MAXITER,
                          ramp=CONTINUATION_RAMP) -> Solution:
    """Homotopy over the channel mismatch: solve a sequence of problems with
    the coupling weight scaled by the ramp factors, warm-starting each from
    the previous converged terminal factor. The last factor must be 1."""
    if not ramp or abs(ramp[-1] - 1.0) > 0:
        raise ValueError("continuation ramp must end at 1.0")
    phi_init: ScalarField | None = None
    sol: Solution | None = None
    for beta in ramp:
        sol = run(spec, rho0, rho1, phi_init=phi_init, tol=tol,
                  maxiter=maxiter, coupling_scale=float(beta))
        phi_init = sol.phi1_final
    return sol
