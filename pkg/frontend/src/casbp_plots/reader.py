"""Reader for solver output directories.

The on-disk contract is: a manifest.json listing every snapshot file with
its quantity and time; one CSV per (quantity, time) whose single header
line carries time, grid metadata, and the quantity name, followed by ny
rows of nx comma-separated values (row j holds values[:, j]); and a
convergence.csv with header ``iter,err_hilbert``. This package never
imports the solver: the directory is the interface.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

MANIFEST_NAME = "manifest.json"
CONVERGENCE_NAME = "convergence.csv"

GRID_KEYS = ("nx", "ny", "x1min", "x1max", "x2min", "x2max")


@dataclass
class Snapshot:
    time: float
    quantity: str
    grid: dict          # keys per GRID_KEYS
    values: np.ndarray  # (nx, ny), values[i, j] at (x1_i, x2_j)

    @property
    def extent(self):
        g = self.grid
        return (g["x1min"], g["x1max"], g["x2min"], g["x2max"])


@dataclass
class SnapshotSet:
    quantity: str
    snapshots: list[Snapshot]

    @property
    def times(self):
        return [s.time for s in self.snapshots]

    @property
    def vmin(self):
        return min(float(s.values.min()) for s in self.snapshots)

    @property
    def vmax(self):
        return max(float(s.values.max()) for s in self.snapshots)


def read_snapshot(path: str) -> Snapshot:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
    if not header.startswith("# "):
        raise ValueError(f"{path}: missing snapshot header")
    meta = {}
    for token in header[2:].split():
        key, _, val = token.partition("=")
        meta[key] = val
    try:
        grid = {
            "nx": int(meta["nx"]), "ny": int(meta["ny"]),
            "x1min": float(meta["x1min"]), "x1max": float(meta["x1max"]),
            "x2min": float(meta["x2min"]), "x2max": float(meta["x2max"]),
        }
        time = float(meta["t"])
        quantity = meta["quantity"]
    except (KeyError, ValueError) as exc:
        raise ValueError(f"{path}: malformed snapshot header ({exc})") from None
    values = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if values.shape != (grid["ny"], grid["nx"]):
        raise ValueError(f"{path}: data shape {values.shape} does not match "
                         f"header {grid['ny']}x{grid['nx']}")
    return Snapshot(time=time, quantity=quantity, grid=grid, values=values.T)


def load_manifest(directory: str) -> dict:
    path = os.path.join(directory, MANIFEST_NAME)
    if not os.path.exists(path):
        raise FileNotFoundError(f"{directory} does not contain {MANIFEST_NAME}")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def available_quantities(directory: str) -> list[str]:
    manifest = load_manifest(directory)
    return sorted({e["quantity"] for e in manifest["files"]})


def load_set(directory: str, quantity: str) -> SnapshotSet:
    """All snapshots of one quantity, ordered by time, grids verified."""
    manifest = load_manifest(directory)
    entries = [e for e in manifest["files"] if e["quantity"] == quantity]
    if not entries:
        raise ValueError(f"{directory} holds no '{quantity}' snapshots")
    entries.sort(key=lambda e: e["time"])
    snaps = []
    for entry in entries:
        snap = read_snapshot(os.path.join(directory, entry["file"]))
        if snap.time != entry["time"]:
            raise ValueError(f"{entry['file']}: header time {snap.time!r} "
                             f"disagrees with manifest {entry['time']!r}")
        if snaps and snap.grid != snaps[0].grid:
            raise ValueError(f"{entry['file']}: grid metadata disagrees with "
                             f"{entries[0]['file']}")
        snaps.append(snap)
    times = [s.time for s in snaps]
    if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
        raise ValueError(f"{quantity}: snapshot times are not strictly increasing")
    return SnapshotSet(quantity=quantity, snapshots=snaps)


def load_convergence(directory: str):
    """(iterations, errors) from convergence.csv."""
    path = os.path.join(directory, CONVERGENCE_NAME)
    if not os.path.exists(path):
        raise FileNotFoundError(f"{directory} does not contain {CONVERGENCE_NAME}")
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
    if header != "iter,err_hilbert":
        raise ValueError(f"{path}: unexpected header {header!r}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        return np.array([], dtype=int), np.array([])
    return data[:, 0].astype(int), data[:, 1]
