"""Hilbert's projective metric between positive fields.

d_H(u, v) = log sup(u/v) - log inf(u/v) over all grid nodes, boundary
included. Each input is floored at 1e-14 times its own maximum before the
ratios are formed; the relative floor respects the projective scaling
freedom of factor fields, and endpoint densities discretized on a wide
domain routinely carry tails far below any fixed relative threshold, so
sub-floor nodes are clamped rather than rejected. A degenerate-field error
is raised only when flooring cannot restore positivity (non-positive
maximum or non-finite entries).
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateFieldError
from .grids import ScalarField

POSITIVITY_FLOOR_REL = 1e-14


def _floored(values: np.ndarray, label: str) -> np.ndarray:
    m = float(np.max(values)) if values.size else np.nan
    if not np.isfinite(m):
        node = tuple(int(k) for k in np.argwhere(~np.isfinite(values))[0])
        raise DegenerateFieldError(label, "non-finite entry", node=node)
    if m <= 0.0:
        node = tuple(int(k) for k in np.unravel_index(int(np.argmax(values)), values.shape))
        raise DegenerateFieldError(label, f"maximum {m:g} is not positive", node=node)
    return np.maximum(values, POSITIVITY_FLOOR_REL * m)


def hilbert_distance(u: ScalarField, v: ScalarField, labels=("u", "v")) -> float:
    if u.grid != v.grid:
        raise ValueError("fields live on different grids")
    return hilbert_distance_values(u.values, v.values, labels)


def hilbert_distance_values(u: np.ndarray, v: np.ndarray, labels=("u", "v")) -> float:
    uf = _floored(np.asarray(u, dtype=np.float64), labels[0])
    vf = _floored(np.asarray(v, dtype=np.float64), labels[1])
    ratio = uf / vf
    return float(np.log(ratio.max()) - np.log(ratio.min()))
