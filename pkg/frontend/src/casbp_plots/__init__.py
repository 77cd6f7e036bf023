"""Figure rendering for solver output directories (CSV + manifest contract)."""

from .reader import Snapshot, SnapshotSet, load_convergence, load_manifest, load_set, read_snapshot
from .render import render_all, render_convergence, render_panels

__version__ = "0.1.0"

__all__ = ["Snapshot", "SnapshotSet", "load_convergence", "load_manifest", "load_set",
           "read_snapshot", "render_all", "render_convergence", "render_panels"]
