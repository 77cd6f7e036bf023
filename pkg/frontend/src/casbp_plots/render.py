"""Multi-panel heatmaps and the convergence curve from a solution directory.

Rendering is a pure consumer of the directory: figures go elsewhere, and
repeated renders are byte-identical (no timestamps are embedded).
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from . import reader

# strip the writer's software tag so back-to-back renders are byte-stable
_PNG_META = {"Software": None}


def _save(fig, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fig.savefig(path, dpi=130, metadata=_PNG_META, bbox_inches="tight")
    plt.close(fig)
    return path


def render_panels(directory: str, quantity: str, out_dir: str) -> str:
    """One row of heatmap panels, ordered by time, shared color scale."""
    snaps = reader.load_set(directory, quantity)
    n = len(snaps.snapshots)
    vmin, vmax = snaps.vmin, snaps.vmax
    if vmin == vmax:
        vmin, vmax = vmin - 1.0, vmax + 1.0
    fig, axes = plt.subplots(1, n, figsize=(3.2 * n + 1.2, 3.4), squeeze=False)
    for ax, snap in zip(axes[0], snaps.snapshots):
        im = ax.imshow(snap.values.T, origin="lower", extent=snap.extent,
                       vmin=vmin, vmax=vmax, cmap="viridis", aspect="equal")
        ax.set_title(f"t = {snap.time:g}")
        ax.set_xlabel("x1")
    axes[0][0].set_ylabel("x2")
    fig.colorbar(im, ax=axes[0], shrink=0.85, label=quantity)
    return _save(fig, os.path.join(out_dir, f"{quantity}_panels.png"))


def render_convergence(directory: str, out_dir: str) -> str:
    """Semilog error trace with a horizontal line at the solve tolerance."""
    iters, errs = reader.load_convergence(directory)
    manifest = reader.load_manifest(directory)
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.semilogy(iters, errs, marker="o", markersize=3, lw=1.2)
    tol = manifest.get("tol")
    if tol:
        ax.axhline(tol, color="crimson", ls="--", lw=1.0, label=f"tol = {tol:g}")
        ax.legend(frameon=False)
    ax.set_xlabel("iteration")
    ax.set_ylabel("Hilbert-metric change")
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, os.path.join(out_dir, "convergence.png"))


def render_all(directory: str, quantity: str, out_dir: str) -> list[str]:
    """Render the requested quantity group plus the convergence curve."""
    available = reader.available_quantities(directory)
    if quantity == "all":
        wanted = available
    elif quantity == "u":
        wanted = [q for q in available if q.startswith("u")]
        if not wanted:
            raise ValueError(f"{directory} holds no control snapshots")
    else:
        wanted = [quantity]
    written = [render_panels(directory, q, out_dir) for q in wanted]
    written.append(render_convergence(directory, out_dir))
    return written
