"""Farthest point sampling and area-uniform sampling on triangle meshes."""

from __future__ import annotations

import numpy as np

from .mesh import TriangleMesh


def farthest_point_sample(points, m: int, seeds=()) -> np.ndarray:
    """Greedy farthest point sampling; returns ``m`` indices into ``points``.

    The result starts with ``seeds`` in the given order (or with index 0 when
    no seeds are given); each further pick maximizes the distance to the
    already chosen set, ties going to the lowest index.
    """
    points = np.asarray(points, dtype=float)
    n = len(points)
    seeds = np.asarray(seeds, dtype=np.intp).ravel()
    if m > n:
        raise ValueError(f"cannot pick {m} of {n} points")
    if len(seeds) > m:
        raise ValueError("more seeds than requested samples")
    if m <= 0:
        return np.zeros(0, dtype=np.intp)
    chosen = np.empty(m, dtype=np.intp)
    if len(seeds) == 0:
        seeds = np.zeros(1, dtype=np.intp)
    chosen[: len(seeds)] = seeds

    xs, ys, zs = (np.ascontiguousarray(points[:, k]) for k in range(3))
    min_d2 = np.full(n, np.inf)
    for start in range(0, len(seeds), 64):
        block = points[seeds[start : start + 64]]
        d2 = (xs[:, None] - block[None, :, 0]) ** 2
        d2 += (ys[:, None] - block[None, :, 1]) ** 2
        d2 += (zs[:, None] - block[None, :, 2]) ** 2
        np.minimum(min_d2, d2.min(axis=1), out=min_d2)
    min_d2[seeds] = -np.inf

    d2 = np.empty(n)
    tmp = np.empty(n)
    for k in range(len(seeds), m):
        i = int(np.argmax(min_d2))
        chosen[k] = i
        np.subtract(xs, xs[i], out=d2)
        np.multiply(d2, d2, out=d2)
        np.subtract(ys, ys[i], out=tmp)
        np.multiply(tmp, tmp, out=tmp)
        d2 += tmp
        np.subtract(zs, zs[i], out=tmp)
        np.multiply(tmp, tmp, out=tmp)
        d2 += tmp
        np.minimum(min_d2, d2, out=min_d2)
        min_d2[i] = -np.inf
    return chosen


def sample_on_mesh(mesh: TriangleMesh, m: int, rng: np.random.Generator, return_faces: bool = False):
    """``m`` points uniformly distributed over the mesh surface area.

    Triangles are drawn with probability proportional to area, then a point is
    placed uniformly inside the triangle via square-root barycentric sampling.
    """
    total = mesh.total_area
    if not total > 0:
        raise ValueError("mesh has zero total area")
    face = rng.choice(len(mesh), size=m, p=mesh.areas / total)
    r1 = np.sqrt(rng.random(m))
    r2 = rng.random(m)
    a, b, c = (corner[face] for corner in mesh.corners)
    pts = (1.0 - r1)[:, None] * a + (r1 * (1.0 - r2))[:, None] * b + (r1 * r2)[:, None] * c
    if return_faces:
        return pts, face
    return pts
