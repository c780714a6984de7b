"""Point-set distances: nearest neighbours between sets, Chamfer, NN spacing."""

from __future__ import annotations

import numpy as np

_CHUNK = 512


def nearest_neighbors(a, b, exclude_self: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """For each row of ``a`` the distance to and index of its nearest row in ``b``.

    Exhaustive in row chunks; ties resolve to the lower index. With
    ``exclude_self`` (``a`` and ``b`` the same set) a point is not its own
    neighbour.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if len(a) == 0 or len(b) == 0:
        raise ValueError("nearest_neighbors needs non-empty sets")
    dist = np.empty(len(a))
    idx = np.empty(len(a), dtype=np.intp)
    bx, by, bz = (np.ascontiguousarray(b[:, k]) for k in range(3))
    for start in range(0, len(a), _CHUNK):
        chunk = a[start : start + _CHUNK]
        rows = np.arange(len(chunk))
        # per-coordinate accumulation keeps d2 exact in the usual floating sense
        d2 = np.subtract.outer(chunk[:, 0], bx)
        d2 *= d2
        tmp = np.subtract.outer(chunk[:, 1], by)
        tmp *= tmp
        d2 += tmp
        np.subtract.outer(chunk[:, 2], bz, out=tmp)
        tmp *= tmp
        d2 += tmp
        if exclude_self:
            d2[rows, rows + start] = np.inf
        j = np.argmin(d2, axis=1)
        idx[start : start + len(chunk)] = j
        dist[start : start + len(chunk)] = np.sqrt(d2[rows, j])
    return dist, idx


def chamfer_distance(a, b) -> float:
    """Mean over ``a`` of the distance to the nearest point of ``b`` (one-sided)."""
    return float(nearest_neighbors(a, b)[0].mean())


def chamfer_gradient(a, b) -> tuple[float, np.ndarray]:
    """Chamfer distance from ``a`` to ``b`` and its gradient with respect to ``a``."""
    a = np.asarray(a, dtype=float)
    d, j = nearest_neighbors(a, b)
    diff = a - np.asarray(b, dtype=float)[j]
    with np.errstate(invalid="ignore", divide="ignore"):
        grad = np.where(d[:, None] > 0, diff / d[:, None], 0.0) / len(a)
    return float(d.mean()), grad


def mean_nn_distance(points) -> float:
    """Average distance from each point to its nearest other point."""
    points = np.asarray(points, dtype=float)
    if len(points) < 2:
        raise ValueError("need at least two points")
    return float(nearest_neighbors(points, points, exclude_self=True)[0].mean())
