"""Explicit FTCS integrators for the two transformed factor PDEs.

The backward pass marches the nonlinear factor equation from t1 down to t0,
recomputing its own coupling terms from the current factor at every step,
and records a strided trajectory buffer. The forward pass marches the
factor-density equation from t0 up to t1, reading the coupling terms from
that buffer by zero-order hold, so for a fixed buffer it is a linear
reaction-advection-diffusion solve.

Both passes floor the field at 1e-14 of its running maximum after every
step (log phi must stay finite; the relative floor respects projective
scaling) and guard against blow-up relative to the initial maximum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._stencils import backward_step, forward_step
from .errors import BlowUpError, DegenerateFieldError
from .exprs import evaluate_on_grid
from .grids import ScalarField, VectorField2, _grad_axis0, _grad_axis1
from .problem import ProblemSpec

Array = np.ndarray

# Within-pass growth guard. The factor fields legitimately build
# exp(int q_phi)-scale envelopes of tens of e-folds per pass at the domain
# corners, so the guard sits far above them while still catching genuine
# runaway long before double-precision overflow.
BLOWUP_RATIO = 1e150
ABS_CEILING = 1e250
FLOOR_FRACTION_LIMIT = 0.01

# Positivity floor for the marches and the coupling log, relative to the
# running field maximum. The factor fields carry physical exp(+-int q_phi)
# envelopes spanning tens of orders of magnitude at the domain corners, so
# the floor must sit far below them: clamping genuine tails builds
# log-gradient cliffs whose q_phi feeds an explosive reaction. 1e-250 still
# keeps log() finite and catches true underflow/blow-down.
MARCH_FLOOR_REL = 1e-250

# Hard floor below which no field value may fall: keeps log() finite even
# when a transient spike carries the running maximum far above the bulk.
ABS_FLOOR = 1e-300


def _march_floor(m: float) -> float:
    return max(MARCH_FLOOR_REL * m, ABS_FLOOR)

# Soft limiter on each component of grad(log phi) in the coupling terms,
# in units of 1/h: exact identity below KNEE_CELLS, smooth saturation at
# CAP_CELLS. Neighbor ratios above e^1 per cell are barely resolved by the
# mesh, and the induced advection f_phi would break the cell-Peclet
# stability limit of the central scheme above ~2/h; the limiter is
# inactive wherever the factors are resolved and vanishes under
# refinement.
GRAD_KNEE_CELLS = 0.7
GRAD_CAP_CELLS = 1.0


def _soft_limit_arrays(g: Array, knee: float, cap: float) -> Array:
    a = np.abs(g)
    over = a > knee
    if not np.any(over):
        return g
    lim = knee + (cap - knee) * np.tanh((a[over] - knee) / (cap - knee))
    g[over] = np.sign(g[over]) * lim
    return g


@dataclass
class TrajectoryBuffer:
    """Strided time history of the backward factor over [t0, t1].

    `times` ascend from t0 to t1; `snapshots[k]` is the factor at
    `times[k]`; `forward_steps[k]` is the forward step index whose time
    equals `times[k]` exactly (integer bookkeeping, no float comparisons).
    """

    spec: ProblemSpec
    stride: int
    n_steps: int
    dt: float
    times: Array
    forward_steps: Array
    snapshots: list[Array]

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    def zoh_index(self, forward_step: int) -> int:
        """Index of the latest snapshot with time <= the step's time."""
        return int(np.searchsorted(self.forward_steps, forward_step, side="right") - 1)


def _coupling_arrays(values: Array, w: Array, dx: float, dy: float,
                     label: str, step=None, time=None):
    """f_phi and q_phi on the grid from a positive factor field."""
    m = float(values.max())
    if not np.isfinite(m) or m <= 0.0:
        raise DegenerateFieldError(label, f"maximum {m!r} unusable for log", step=step, time=time)
    floor = _march_floor(m)
    n_below = int(np.count_nonzero(values < floor))
    if n_below > FLOOR_FRACTION_LIMIT * values.size:
        raise DegenerateFieldError(
            label, f"positivity floor active on {n_below}/{values.size} nodes (> 1%)",
            step=step, time=time)
    logv = np.log(np.maximum(values, floor))
    gx = _soft_limit_arrays(_grad_axis0(logv, dx, "neumann"), GRAD_KNEE_CELLS / dx, GRAD_CAP_CELLS / dx)
    gy = _soft_limit_arrays(_grad_axis1(logv, dy, "neumann"), GRAD_KNEE_CELLS / dy, GRAD_CAP_CELLS / dy)
    fpx = w[0, 0] * gx + w[0, 1] * gy
    fpy = w[0, 1] * gx + w[1, 1] * gy
    qp = 0.5 * (gx * fpx + gy * fpy)
    return fpx, fpy, qp


def coupling_terms(phi: ScalarField, spec: ProblemSpec, scale: float = 1.0):
    """Pointwise W grad(log phi) and 0.5 grad(log phi)^T W grad(log phi).

    The gradient uses the mirror-ghost boundary rule of the PDE marches
    (zero normal log-slope at walls) and is clamped componentwise at the
    mesh-representability bound GRAD_CAP_CELLS / h."""
    w = scale * spec.mismatch_matrix()
    g = phi.grid
    fpx, fpy, qp = _coupling_arrays(phi.values, w, g.dx, g.dy, "phi")
    return VectorField2(g, fpx, fpy), ScalarField(g, qp)


def _drift_cost_arrays(spec: ProblemSpec, t: float):
    g = spec.grid
    f1 = evaluate_on_grid(spec.f1, t, g)
    f2 = evaluate_on_grid(spec.f2, t, g)
    qlam = evaluate_on_grid(spec.q, t, g) / spec.lam
    return f1, f2, qlam


def _autonomous(spec: ProblemSpec) -> bool:
    return not (spec.f1.uses_t or spec.f2.uses_t or spec.q.uses_t)


def _check_initial(values: Array, label: str):
    mn = float(values.min())
    if mn <= 0.0:
        node = tuple(int(k) for k in np.unravel_index(int(np.argmin(values)), values.shape))
        raise DegenerateFieldError(label, f"initial field not strictly positive (min {mn:g})", node=node)
    return float(values.max())


def _guard_and_floor(out: Array, init_max: float, which: str, step: int, t: float) -> float:
    m = float(out.max())
    if not np.isfinite(m):
        raise BlowUpError(which, step, t, "non-finite value")
    if m > BLOWUP_RATIO * init_max or m > ABS_CEILING:
        raise BlowUpError(which, step, t,
                          f"max {m:g} exceeds the growth guard ({BLOWUP_RATIO:g} x initial max {init_max:g})")
    if m <= 0.0:
        raise DegenerateFieldError(which, f"field maximum {m:g} not positive", step=step, time=t)
    np.maximum(out, _march_floor(m), out=out)
    return m


def backward_solve(phi1: ScalarField, spec: ProblemSpec, scale: float = 1.0):
    """March the backward factor PDE from t1 to t0, buffering the history.

    Returns (phi at t0, TrajectoryBuffer). The buffer stores a snapshot
    every `spec.buffer_stride` steps plus both endpoints.
    """
    g = spec.grid
    if phi1.grid != g:
        raise ValueError("phi1 grid does not match the problem grid")
    n = spec.n_steps
    dt = spec.dt_effective
    stride = int(spec.buffer_stride)
    w = scale * spec.mismatch_matrix()
    matched = bool(np.all(w == 0.0))
    s = spec.Sigma
    dx, dy = g.dx, g.dy

    phi = phi1.values.copy()
    out = np.empty_like(phi)
    logphi = np.zeros_like(phi)
    scratch = np.empty_like(phi)

    init_max = _check_initial(phi, "phi1")
    cur_max = init_max

    autonomous = _autonomous(spec)
    if autonomous:
        f1, f2, qlam = _drift_cost_arrays(spec, spec.t1)

    rev_times = []
    rev_snaps = []
    rev_steps = []

    def record(k: int, t: float, values: Array):
        rev_times.append(t)
        rev_steps.append(n - k)
        rev_snaps.append(values.copy())

    record(0, spec.t1, phi)
    for k in range(n):
        t = spec.t1 - k * dt
        if not autonomous:
            f1, f2, qlam = _drift_cost_arrays(spec, t)
        if not matched:
            np.maximum(phi, _march_floor(cur_max), out=scratch)
            np.log(scratch, out=logphi)
        backward_step(phi, logphi, f1, f2, qlam,
                      w[0, 0], w[0, 1], w[1, 1],
                      s[0, 0], s[0, 1], s[1, 1], dx, dy, dt,
                      GRAD_KNEE_CELLS / dx, GRAD_CAP_CELLS / dx,
                      GRAD_KNEE_CELLS / dy, GRAD_CAP_CELLS / dy, out)
        cur_max = _guard_and_floor(out, init_max, "backward", k + 1, t - dt)
        phi, out = out, phi
        kk = k + 1
        if kk == n or kk % stride == 0:
            record(kk, spec.t0 + (n - kk) * dt, phi)

    times = np.array(rev_times[::-1])
    buffer = TrajectoryBuffer(
        spec=spec, stride=stride, n_steps=n, dt=dt,
        times=times,
        forward_steps=np.array(rev_steps[::-1], dtype=np.int64),
        snapshots=rev_snaps[::-1],
    )
    return ScalarField(g, phi.copy()), buffer


def forward_solve_with_memory(phi_hat0: ScalarField, buffer: TrajectoryBuffer,
                              spec: ProblemSpec, scale: float = 1.0):
    """March the forward factor PDE from t0 to t1 against the buffer.

    The coupling terms are rebuilt from the buffer by zero-order hold
    (latest snapshot with time <= t), so they change only at snapshot
    boundaries. Returns (phi_hat at t1, snapshots) with one snapshot per
    buffer time.
    """
    g = spec.grid
    if phi_hat0.grid != g:
        raise ValueError("phi_hat0 grid does not match the problem grid")
    if buffer.n_steps != spec.n_steps or abs(buffer.dt - spec.dt_effective) > 1e-15 * max(1.0, spec.dt):
        raise ValueError("buffer time grid does not match the problem spec")
    n = spec.n_steps
    dt = spec.dt_effective
    w = scale * spec.mismatch_matrix()
    matched = bool(np.all(w == 0.0))
    s = spec.Sigma
    dx, dy = g.dx, g.dy

    ph = phi_hat0.values.copy()
    out = np.empty_like(ph)
    init_max = _check_initial(ph, "phi_hat0")

    autonomous = _autonomous(spec)
    if autonomous:
        f1, f2, qlam = _drift_cost_arrays(spec, spec.t0)

    zero = np.zeros_like(ph)
    fpx, fpy, qp = zero, zero, zero
    v1 = np.empty_like(ph)
    v2 = np.empty_like(ph)
    react = np.empty_like(ph)
    divv = np.empty_like(ph)

    def rebuild_coefficients():
        np.add(f1, fpx, out=v1)
        np.add(f2, fpy, out=v2)
        np.add(qlam, qp, out=react)
        np.add(_grad_axis0(v1, dx, "one-sided"), _grad_axis1(v2, dy, "one-sided"), out=divv)

    fsteps = buffer.forward_steps
    snaps_out: list[Array] = []
    p = -1
    next_record = 0

    for j in range(n + 1):
        if next_record < len(fsteps) and fsteps[next_record] == j:
            snaps_out.append(ph.copy())
            next_record += 1
        if j == n:
            break
        t = spec.t0 + j * dt
        p_new = buffer.zoh_index(j)
        if p_new != p:
            p = p_new
            if not matched:
                fpx, fpy, qp = _coupling_arrays(
                    buffer.snapshots[p], w, dx, dy, "buffer phi",
                    step=j, time=t)
            if autonomous:
                rebuild_coefficients()
        if not autonomous:
            f1, f2, qlam = _drift_cost_arrays(spec, t)
            rebuild_coefficients()
        forward_step(ph, v1, v2, divv, react, s[0, 0], s[0, 1], s[1, 1], dx, dy, dt, out)
        _guard_and_floor(out, init_max, "forward", j + 1, t + dt)
        ph, out = out, ph

    return ScalarField(g, ph.copy()), snaps_out
