"""Triangle meshes, point-to-triangle projection and point-to-surface distance."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .vptree import VPTree

# Triangles with area at or below this (relative to the squared mesh extent)
# are treated as degenerate and dropped.
DEGENERATE_AREA = 1e-14


@dataclass
class TriangleMesh:
    """Vertex array plus (T, 3) integer faces; unit normals follow face winding.

    Degenerate (near zero-area) faces are dropped on construction, so every
    stored triangle has a well-defined unit normal.
    """

    vertices: np.ndarray
    faces: np.ndarray
    normals: np.ndarray = field(init=False)
    areas: np.ndarray = field(init=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        faces = np.asarray(self.faces, dtype=np.intp).reshape(-1, 3)
        if len(faces) and (faces.min() < 0 or faces.max() >= len(self.vertices)):
            raise ValueError("face references a vertex out of range")
        a, b, c = (self.vertices[faces[:, k]] for k in range(3))
        cross = np.cross(b - a, c - a)
        twice_area = np.linalg.norm(cross, axis=1)
        extent = np.ptp(self.vertices, axis=0).max() if len(self.vertices) else 0.0
        ok = twice_area > 2 * DEGENERATE_AREA * max(extent, 1.0) ** 2
        self.faces = faces[ok]
        self.normals = cross[ok] / twice_area[ok, None]
        self.areas = 0.5 * twice_area[ok]
        if len(self.faces) == 0:
            raise ValueError("mesh has no non-degenerate triangles")

    def __len__(self) -> int:
        return len(self.faces)

    @property
    def corners(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(self.vertices[self.faces[:, k]] for k in range(3))

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    @property
    def centroid(self) -> np.ndarray:
        """Area-weighted centroid of the surface."""
        a, b, c = self.corners
        return (self.areas[:, None] * (a + b + c)).sum(axis=0) / (3.0 * self.total_area)

    def transformed(self, rotation=None, offset=None, scale: float = 1.0) -> "TriangleMesh":
        v = self.vertices
        if rotation is not None:
            v = v @ np.asarray(rotation).T
        if offset is not None:
            v = v + offset
        return TriangleMesh(v * scale, self.faces.copy())


def closest_points_on_triangles(p, a, b, c) -> np.ndarray:
    """Closest point on triangle (a, b, c) to p, row-wise for (K, 3) arrays.

    Region decomposition (vertex / edge / face Voronoi regions): equivalent to
    projecting onto the triangle plane and clipping the result to the triangle.
    """
    p, a, b, c = (np.asarray(v, dtype=float) for v in (p, a, b, c))
    ab, ac, ap = b - a, c - a, p - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = p - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = p - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    out = np.empty_like(p)
    done = np.zeros(len(p), dtype=bool)

    def assign(mask, value):
        nonlocal done
        mask = mask & ~done
        if mask.any():
            out[mask] = value(mask)
            done |= mask

    assign((d1 <= 0) & (d2 <= 0), lambda m: a[m])
    assign((d3 >= 0) & (d4 <= d3), lambda m: b[m])
    assign((d6 >= 0) & (d5 <= d6), lambda m: c[m])

    with np.errstate(divide="ignore", invalid="ignore"):
        assign(
            (vc <= 0) & (d1 >= 0) & (d3 <= 0),
            lambda m: a[m] + (d1[m] / (d1[m] - d3[m]))[:, None] * ab[m],
        )
        assign(
            (vb <= 0) & (d2 >= 0) & (d6 <= 0),
            lambda m: a[m] + (d2[m] / (d2[m] - d6[m]))[:, None] * ac[m],
        )
        assign(
            (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0),
            lambda m: b[m]
            + ((d4[m] - d3[m]) / ((d4[m] - d3[m]) + (d5[m] - d6[m])))[:, None] * (c[m] - b[m]),
        )

        def interior(m):
            denom = 1.0 / (va[m] + vb[m] + vc[m])
            return a[m] + (vb[m] * denom)[:, None] * ab[m] + (vc[m] * denom)[:, None] * ac[m]

        assign(np.ones(len(p), dtype=bool), interior)
    return out


class TriangleIndex:
    """VP-tree over triangle centroids with per-triangle bounding radii.

    A triangle's closest point to q is within r only if its centroid is within
    r + (bounding radius) of q, so radius queries on the centroid tree return
    a superset of the triangles that matter.
    """

    def __init__(self, mesh: TriangleMesh):
        self.mesh = mesh
        a, b, c = mesh.corners
        self._a, self._b, self._c = a, b, c
        centroids = (a + b + c) / 3.0
        radii = np.max(
            np.stack([np.linalg.norm(v - centroids, axis=1) for v in (a, b, c)]), axis=0
        )
        self.tree = VPTree(centroids, radii=radii)

    def __len__(self) -> int:
        return len(self.mesh)

    def candidates(self, queries, radius):
        """(query, triangle) pairs whose triangle may lie within ``radius``.

        A superset of all triangles whose closest point to the query is within
        the radius.
        """
        return self.tree.query_radius(queries, radius)

    def nearest(self, queries) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Closest surface point, its distance and triangle id for each query.

        Exact; ties between triangles go to the lower triangle index.
        The home-leaf minimum bounds the search radius, then all triangles
        whose bounding balls reach within it are resolved exactly.
        """
        q = np.atleast_2d(np.asarray(queries, dtype=float))
        # upper bound from the triangles in each query's home leaf
        bound = np.full(len(q), np.inf)
        for qs, items in self.tree.home_leaves(q):
            qq = np.repeat(qs, len(items))
            tt = np.tile(items, len(qs))
            cp = closest_points_on_triangles(q[qq], self._a[tt], self._b[tt], self._c[tt])
            d = np.linalg.norm(q[qq] - cp, axis=1).reshape(len(qs), len(items))
            bound[qs] = d.min(axis=1)

        qi, ti = self.candidates(q, bound)
        cp = closest_points_on_triangles(q[qi], self._a[ti], self._b[ti], self._c[ti])
        d = np.linalg.norm(q[qi] - cp, axis=1)
        order = np.lexsort((ti, d, qi))
        first = np.ones(len(order), dtype=bool)
        first[1:] = qi[order][1:] != qi[order][:-1]
        pick = order[first]
        closest = np.empty_like(q)
        dist = np.empty(len(q))
        tri = np.empty(len(q), dtype=np.intp)
        # every query has at least its home-leaf minimizer among the candidates
        closest[qi[pick]] = cp[pick]
        dist[qi[pick]] = d[pick]
        tri[qi[pick]] = ti[pick]
        return closest, dist, tri


def build_triangle_index(mesh: TriangleMesh) -> TriangleIndex:
    return TriangleIndex(mesh)


def project_to_surface(p, mesh: TriangleMesh, index: TriangleIndex | None = None) -> np.ndarray:
    """Closest point on the mesh surface for one point (3,) or many (K, 3)."""
    index = index or TriangleIndex(mesh)
    p = np.asarray(p, dtype=float)
    closest, _, _ = index.nearest(np.atleast_2d(p))
    return closest[0] if p.ndim == 1 else closest


def surface_distance(points, mesh: TriangleMesh, index: TriangleIndex | None = None) -> np.ndarray:
    index = index or TriangleIndex(mesh)
    return index.nearest(points)[1]


def hausdorff_to_surface(points, mesh: TriangleMesh, index: TriangleIndex | None = None) -> float:
    """One-sided Hausdorff distance: max over points of the distance to the mesh."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if len(points) == 0:
        raise ValueError("empty point set")
    return float(surface_distance(points, mesh, index).max())
