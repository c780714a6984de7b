"""Slow, obviously-correct reference implementations used by the tests.

None of these import library internals beyond plain data types.
"""

from __future__ import annotations

import math

import numpy as np


def knn_scan(points, q, k, exclude=None):
    """Exhaustive scan: indices of the k nearest points, ties to lower index."""
    rows = []
    for i, p in enumerate(points):
        if i == exclude:
            continue
        d = math.sqrt(sum((float(p[c]) - float(q[c])) ** 2 for c in range(3)))
        rows.append((d, i))
    rows.sort()
    return [i for _, i in rows[:k]], [d for d, _ in rows[:k]]


def fps_greedy(points, m, seeds=()):
    """Textbook greedy farthest point sampling with Python lists."""
    pts = [tuple(map(float, p)) for p in points]
    chosen = list(seeds) if len(seeds) else [0]
    while len(chosen) < m:
        best, best_d = None, -1.0
        for i, p in enumerate(pts):
            if i in chosen:
                continue
            d = min(sum((p[c] - pts[j][c]) ** 2 for c in range(3)) for j in chosen)
            if d > best_d:
                best, best_d = i, d
        chosen.append(best)
    return chosen


def chamfer_loop(a, b):
    total = 0.0
    for p in a:
        total += min(math.dist(p, q) for q in b)
    return total / len(a)


def dense_triangle_samples(a, b, c, per_side: int):
    """Regular barycentric grid on a triangle with per_side + 1 points per edge."""
    i, j = np.meshgrid(np.arange(per_side + 1), np.arange(per_side + 1), indexing="ij")
    keep = i + j <= per_side
    u = i[keep] / per_side
    v = j[keep] / per_side
    w = 1.0 - u - v
    return w[:, None] * a + u[:, None] * b + v[:, None] * c


def dense_mesh_samples(vertices, faces, per_side: int = 140):
    """About per_side^2 / 2 samples per triangle (per_side=140 gives ~10^4)."""
    return np.concatenate(
        [dense_triangle_samples(*(vertices[f] for f in face), per_side) for face in faces]
    )


def insphere_violations(points, tets, tol=1e-9):
    """Count (tet, point) pairs with the point strictly inside the circumsphere."""
    bad = 0
    for tet in tets:
        p = points[tet]
        # solve |c - p0|^2 = |c - pk|^2 as a 3x3 linear system
        A = 2.0 * (p[1:] - p[0])
        rhs = (p[1:] ** 2).sum(1) - (p[0] ** 2).sum()
        center = np.linalg.solve(A, rhs)
        r2 = ((p[0] - center) ** 2).sum()
        for i, q in enumerate(points):
            if i in tet:
                continue
            if ((q - center) ** 2).sum() < r2 * (1.0 - tol):
                bad += 1
    return bad


def outlier_survivors(points, k, eps_std):
    """Mean k-NN distance (self excluded), then mean + eps_std * population std."""
    n = len(points)
    scores = []
    for i in range(n):
        d = sorted(math.dist(points[i], points[j]) for j in range(n) if j != i)
        scores.append(sum(d[:k]) / k)
    mean = sum(scores) / n
    std = math.sqrt(sum((s - mean) ** 2 for s in scores) / n)
    return [i for i in range(n) if scores[i] <= mean + eps_std * std]


def central_difference(f, x, h=1e-5, entries=None):
    """Central-difference gradient of scalar f at array x (optionally at a subset of flat entries)."""
    x = np.array(x, dtype=float)
    flat = x.reshape(-1)
    entries = range(flat.size) if entries is None else entries
    out = {}
    for e in entries:
        old = flat[e]
        flat[e] = old + h
        up = f(x)
        flat[e] = old - h
        down = f(x)
        flat[e] = old
        out[e] = (up - down) / (2 * h)
    return out


def relative_error(analytic, numeric, floor=1e-6):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)
