"""Configuration documents and the on-disk solution-directory contract.

A solve produces a directory containing:

* ``convergence.csv`` -- header ``iter,err_hilbert`` plus the full trace;
* one CSV per (quantity, time): a single ``#``-prefixed header line with
  the time, grid metadata and quantity name, then ny rows of nx
  comma-separated values printed with 17 significant digits so doubles
  round-trip bitwise (row j holds values[:, j]);
* ``manifest.json`` -- every emitted file with its exact snapshot time.

The verify/diagnose commands append reports and derived snapshots to the
same directory; they never modify solver outputs.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .densities import GaussianMixture, MixtureComponent
from .errors import ConfigError
from .exprs import parse
from .grids import Grid2D, ScalarField
from .problem import ProblemSpec

Array = np.ndarray

MANIFEST_NAME = "manifest.json"
CONVERGENCE_NAME = "convergence.csv"
VERIFICATION_NAME = "verification.json"
VALIDATION_NAME = "validation.txt"

DEFAULTS = {
    "tol": 1e-2,
    "maxiter": 200,
    "buffer_stride": 10,
    "phi_init": "ones",
    "continuation": False,
    "n_particles": 100_000,
    "seed": 0,
    "bins": 50,
    "snapshots": 5,
}


@dataclass
class Config:
    spec: ProblemSpec
    rho0: GaussianMixture
    rho1: GaussianMixture
    tol: float
    maxiter: int
    phi_init: str
    continuation: bool
    n_particles: int
    seed: int
    bins: int
    out_dir: str | None
    n_snapshots: int
    raw: dict


def _section(doc: dict, name: str, required: bool = True) -> dict:
    if name not in doc:
        if required:
            raise ConfigError(f"missing section '{name}'")
        return {}
    if not isinstance(doc[name], dict):
        raise ConfigError(f"section '{name}' must be an object")
    return doc[name]


def _field(sec: dict, path: str, key: str, kind, default=None, required=False):
    if key not in sec:
        if required:
            raise ConfigError(f"missing field '{path}.{key}'")
        return default
    val = sec[key]
    try:
        if kind is float:
            if isinstance(val, bool):
                raise TypeError
            return float(val)
        if kind is int:
            if isinstance(val, bool) or int(val) != val:
                raise TypeError
            return int(val)
        if kind is bool:
            if not isinstance(val, bool):
                raise TypeError
            return val
        if kind is str:
            if not isinstance(val, str):
                raise TypeError
            return val
    except (TypeError, ValueError):
        raise ConfigError(f"field '{path}.{key}' must be a {kind.__name__}, got {val!r}") from None
    raise AssertionError(kind)


def _matrix(sec: dict, path: str, key: str, rows: int | None = None) -> Array:
    if key not in sec:
        raise ConfigError(f"missing field '{path}.{key}'")
    try:
        m = np.array(sec[key], dtype=np.float64)
    except (TypeError, ValueError):
        raise ConfigError(f"field '{path}.{key}' must be a numeric matrix") from None
    if m.ndim != 2:
        raise ConfigError(f"field '{path}.{key}' must be a 2-D matrix, got shape {m.shape}")
    if rows is not None and m.shape[0] != rows:
        raise ConfigError(f"field '{path}.{key}' must have {rows} rows, got {m.shape[0]}")
    return m


def _expr(sec: dict, path: str, key: str):
    text = _field(sec, path, key, str, required=True)
    try:
        return parse(text)
    except ValueError as exc:
        raise ConfigError(f"field '{path}.{key}': {exc}") from None


def _mixture(doc: dict, name: str) -> GaussianMixture:
    if name not in doc:
        raise ConfigError(f"missing section '{name}'")
    comps = doc[name]
    if not isinstance(comps, list) or not comps:
        raise ConfigError(f"section '{name}' must be a non-empty list of components")
    out = []
    for k, c in enumerate(comps):
        path = f"{name}[{k}]"
        if not isinstance(c, dict):
            raise ConfigError(f"{path} must be an object")
        w = _field(c, path, "weight", float, required=True)
        if "mean" not in c or "cov" not in c:
            raise ConfigError(f"{path} needs 'mean' and 'cov'")
        try:
            mean = np.array(c["mean"], dtype=np.float64).reshape(2)
            cov = np.array(c["cov"], dtype=np.float64).reshape(2, 2)
        except (TypeError, ValueError):
            raise ConfigError(f"{path}: mean must be a 2-vector and cov a 2x2 matrix") from None
        try:
            out.append(MixtureComponent(w, mean, cov))
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    try:
        return GaussianMixture(tuple(out))
    except ValueError as exc:
        raise ConfigError(f"section '{name}': {exc}") from None


def load_config(path: str) -> Config:
    """Parse and structurally validate a JSON problem document.

    Expressions are parsed here so syntax errors surface before solving;
    the numerical validation report comes from ``config.spec.validate()``.
    """
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("top-level document must be an object")

    dyn = _section(doc, "dynamics")
    cost = _section(doc, "cost")
    hor = _section(doc, "horizon")
    gsec = _section(doc, "grid")
    solver = _section(doc, "solver", required=False)
    mc = _section(doc, "mc", required=False)
    out = _section(doc, "output", required=False)

    g = _matrix(dyn, "dynamics", "g", rows=2)
    sigma = _matrix(dyn, "dynamics", "sigma", rows=2)
    lam = _field(dyn, "dynamics", "lambda", float, default=1.0)
    r_mat = _matrix(cost, "cost", "R") if "R" in cost else np.eye(g.shape[1])
    if r_mat.shape != (g.shape[1], g.shape[1]):
        raise ConfigError(f"field 'cost.R' must be {g.shape[1]}x{g.shape[1]} to match g")

    try:
        grid = Grid2D(
            x1_min=_field(gsec, "grid", "x1_min", float, required=True),
            x1_max=_field(gsec, "grid", "x1_max", float, required=True),
            x2_min=_field(gsec, "grid", "x2_min", float, required=True),
            x2_max=_field(gsec, "grid", "x2_max", float, required=True),
            nx=_field(gsec, "grid", "nx", int, required=True),
            ny=_field(gsec, "grid", "ny", int, required=True),
        )
    except ValueError as exc:
        raise ConfigError(f"section 'grid': {exc}") from None

    spec = ProblemSpec(
        f1=_expr(dyn, "dynamics", "f1"),
        f2=_expr(dyn, "dynamics", "f2"),
        g=g,
        sigma=sigma,
        q=_expr(cost, "cost", "q"),
        R=r_mat,
        lam=lam,
        t0=_field(hor, "horizon", "t0", float, required=True),
        t1=_field(hor, "horizon", "t1", float, required=True),
        dt=_field(hor, "horizon", "dt", float, required=True),
        grid=grid,
        buffer_stride=_field(solver, "solver", "buffer_stride", int, default=DEFAULTS["buffer_stride"]),
    )

    phi_init = _field(solver, "solver", "phi_init", str, default=DEFAULTS["phi_init"])
    if phi_init != "ones" and not phi_init.startswith("file:"):
        raise ConfigError("field 'solver.phi_init' must be 'ones' or 'file:<path>'")

    return Config(
        spec=spec,
        rho0=_mixture(doc, "rho0"),
        rho1=_mixture(doc, "rho1"),
        tol=_field(solver, "solver", "tol", float, default=DEFAULTS["tol"]),
        maxiter=_field(solver, "solver", "maxiter", int, default=DEFAULTS["maxiter"]),
        phi_init=phi_init,
        continuation=_field(solver, "solver", "continuation", bool, default=DEFAULTS["continuation"]),
        n_particles=_field(mc, "mc", "n_particles", int, default=DEFAULTS["n_particles"]),
        seed=_field(mc, "mc", "seed", int, default=DEFAULTS["seed"]),
        bins=_field(mc, "mc", "bins", int, default=DEFAULTS["bins"]),
        out_dir=_field(out, "output", "directory", str, default=None),
        n_snapshots=_field(out, "output", "snapshots", int, default=DEFAULTS["snapshots"]),
        raw=doc,
    )


def write_snapshot(path: str, field: ScalarField, t: float, quantity: str):
    g = field.grid
    header = (f"# t={t!r} nx={g.nx} ny={g.ny}"
              f" x1min={g.x1_min!r} x1max={g.x1_max!r}"
              f" x2min={g.x2_min!r} x2max={g.x2_max!r} quantity={quantity}")
    rows = field.values.T  # row j carries values[:, j]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_snapshot(path: str) -> tuple[dict, ScalarField]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
    if not header.startswith("# "):
        raise ValueError(f"{path}: missing snapshot header")
    meta = {}
    for tok in header[2:].split():
        key, _, val = tok.partition("=")
        meta[key] = val
    try:
        grid = Grid2D(
            x1_min=float(meta["x1min"]), x1_max=float(meta["x1max"]),
            x2_min=float(meta["x2min"]), x2_max=float(meta["x2max"]),
            nx=int(meta["nx"]), ny=int(meta["ny"]),
        )
        t = float(meta["t"])
        quantity = meta["quantity"]
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: malformed snapshot header ({exc})") from None
    values = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if values.shape != (grid.ny, grid.nx):
        raise ValueError(f"{path}: data shape {values.shape} does not match header {grid.ny}x{grid.nx}")
    return {"t": t, "quantity": quantity}, ScalarField(grid, values.T)


def _grid_meta(grid: Grid2D) -> dict:
    return {"x1_min": grid.x1_min, "x1_max": grid.x1_max,
            "x2_min": grid.x2_min, "x2_max": grid.x2_max,
            "nx": grid.nx, "ny": grid.ny}


def emit_indices(n_available: int, n_emit: int) -> list[int]:
    n_emit = max(1, min(n_emit, n_available))
    return sorted(set(int(round(k)) for k in np.linspace(0, n_available - 1, n_emit)))


def write_solution_dir(solution, out_dir: str, n_emit: int, tol: float | None = None) -> dict:
    """Write convergence trace, snapshots, and manifest for a solve."""
    os.makedirs(out_dir, exist_ok=True)
    manifest_path = os.path.join(out_dir, MANIFEST_NAME)
    if os.path.exists(manifest_path):
        raise FileExistsError(
            f"{manifest_path} already exists; refusing to mix solver outputs in one directory")

    with open(os.path.join(out_dir, CONVERGENCE_NAME), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("iter,err_hilbert\n")
        for it, err in solution.trace:
            fh.write(f"{it},{err:.17g}\n")

    indices = emit_indices(solution.n_snapshots, n_emit)
    files = []

    def emit(quantity: str, fields_for_index):
        for pos, idx in enumerate(indices):
            t = float(solution.snapshot_times[idx])
            name = f"{quantity}_{pos:04d}.csv"
            write_snapshot(os.path.join(out_dir, name), fields_for_index(idx), t, quantity)
            files.append({"file": name, "quantity": quantity, "time": t})

    emit("rho", lambda k: solution.rho_opt[k])
    for comp in range(solution.spec.m):
        emit(f"u{comp + 1}", lambda k, c=comp: solution.u_opt[k][c])
    emit("phi", lambda k: solution.phi_snapshots[k])
    emit("phi_hat", lambda k: solution.phi_hat_snapshots[k])

    manifest = {
        "format": "casbp-solution-v1",
        "grid": _grid_meta(solution.spec.grid),
        "converged": bool(solution.converged),
        "iterations": int(solution.iterations),
        "final_err": solution.final_err,
        "tol": tol,
        "n_buffer_snapshots": solution.n_snapshots,
        "emitted_times": [float(solution.snapshot_times[k]) for k in indices],
        "files": files,
    }
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def read_manifest(out_dir: str) -> dict:
    path = os.path.join(out_dir, MANIFEST_NAME)
    if not os.path.exists(path):
        raise FileNotFoundError(f"{out_dir} does not contain {MANIFEST_NAME}")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def update_manifest(out_dir: str, new_files: list[dict], replace_quantity: str):
    manifest = read_manifest(out_dir)
    manifest["files"] = [e for e in manifest["files"] if e["quantity"] != replace_quantity]
    manifest["files"].extend(new_files)
    with open(os.path.join(out_dir, MANIFEST_NAME), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_quantity(out_dir: str, quantity: str) -> tuple[list[float], list[ScalarField]]:
    """All snapshots of one quantity from a solution directory, by time."""
    manifest = read_manifest(out_dir)
    entries = [e for e in manifest["files"] if e["quantity"] == quantity]
    if not entries:
        raise ValueError(f"{out_dir} holds no '{quantity}' snapshots")
    entries.sort(key=lambda e: e["time"])
    times, fields = [], []
    for e in entries:
        meta, f = read_snapshot(os.path.join(out_dir, e["file"]))
        if meta["t"] != e["time"]:
            raise ValueError(f"{e['file']}: header time {meta['t']!r} disagrees with manifest {e['time']!r}")
        times.append(meta["t"])
        fields.append(f)
    return times, fields
