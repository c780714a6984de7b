"""3D Delaunay tetrahedralization and alpha-shape boundary extraction."""

from __future__ import annotations

import logging

import numpy as np
from scipy.spatial import Delaunay, QhullError

from .distances import mean_nn_distance
from .mesh import TriangleMesh

log = logging.getLogger(__name__)

# relative tolerance on orientation determinants
ORIENT_RTOL = 1e-12
# exact duplicates are separated by this fraction of the cloud diameter
DUPLICATE_JITTER = 1e-9


class DegenerateInputError(ValueError):
    """Input cannot be tetrahedralized; ``code`` says why."""

    def __init__(self, code: str, message: str):
        super().__init__(f"[{code}] {message}")
        self.code = code


class EmptyBoundaryError(ValueError):
    """No tetrahedron survives the alpha filter."""


def _separate_duplicates(points: np.ndarray) -> np.ndarray:
    _, first, inverse = np.unique(points, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    dup = first[inverse] != np.arange(len(points))
    if not dup.any():
        return points
    diameter = float(np.ptp(points, axis=0).max()) or 1.0
    rng = np.random.default_rng(0)
    out = points.copy()
    out[dup] += rng.uniform(-1.0, 1.0, (int(dup.sum()), 3)) * DUPLICATE_JITTER * diameter
    return out


def signed_volumes(points: np.ndarray, tets: np.ndarray) -> np.ndarray:
    a, b, c, d = (points[tets[:, k]] for k in range(4))
    return np.einsum("ij,ij->i", b - a, np.cross(c - a, d - a)) / 6.0


def delaunay_3d(points) -> np.ndarray:
    """Delaunay tetrahedra as a (T, 4) index array, positively oriented.

    Raises ``DegenerateInputError`` with code ``too_few`` (N < 4), ``coplanar``
    (affine rank below 3) or ``qhull`` (triangulator failure).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 4:
        raise DegenerateInputError("too_few", "need at least 4 points in 3D")
    if not np.isfinite(pts).all():
        raise ValueError("points must be finite")
    centered = pts - pts.mean(0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[0] == 0 or sv[2] <= ORIENT_RTOL * sv[0]:
        raise DegenerateInputError("coplanar", "all points are coplanar")
    pts = _separate_duplicates(pts)
    try:
        tri = Delaunay(pts, qhull_options="Qbb Qc Qz Q12")
    except QhullError as exc:
        raise DegenerateInputError("qhull", str(exc).splitlines()[0]) from exc
    tets = tri.simplices.astype(np.intp)
    vol = signed_volumes(pts, tets)
    scale = float(np.ptp(pts, axis=0).max()) ** 3
    flat = np.abs(vol) <= ORIENT_RTOL * scale
    tets = tets[~flat]
    neg = vol[~flat] < 0
    tets[neg] = tets[neg][:, [0, 2, 1, 3]]
    return tets


def circumspheres(points, tets) -> tuple[np.ndarray, np.ndarray]:
    """Circumcenters (T, 3) and circumradii (T,) of tetrahedra."""
    points = np.asarray(points, dtype=float)
    a = points[tets[:, 0]]
    u, v, w = (points[tets[:, k]] - a for k in (1, 2, 3))
    uu, vv, ww = (np.einsum("ij,ij->i", x, x) for x in (u, v, w))
    num = (
        uu[:, None] * np.cross(v, w)
        + vv[:, None] * np.cross(w, u)
        + ww[:, None] * np.cross(u, v)
    )
    den = 2.0 * np.einsum("ij,ij->i", u, np.cross(v, w))
    with np.errstate(divide="ignore", invalid="ignore"):
        offset = num / den[:, None]
    radius = np.linalg.norm(offset, axis=1)
    radius[~np.isfinite(radius)] = np.inf
    return a + offset, radius


_TET_FACES = np.array([[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]])


def _face_table(tets: np.ndarray):
    """Every tetrahedron face (outward wound), its opposite vertex, owning tet,
    and a key shared by the two copies of an interior face."""
    faces = tets[:, _TET_FACES].reshape(-1, 3)
    opposite = tets.reshape(-1)  # face k of a tet is opposite its vertex k
    owner = np.repeat(np.arange(len(tets)), 4)
    srt = np.sort(faces, axis=1).astype(np.int64)
    n = int(srt.max()) + 1 if len(srt) else 1
    key = (srt[:, 0] * n + srt[:, 1]) * n + srt[:, 2]
    return faces, opposite, owner, key


def boundary_faces(points, tets) -> np.ndarray:
    """Faces that belong to exactly one tetrahedron, wound with outward normals.

    Assumes positively oriented tetrahedra (as returned by ``delaunay_3d``):
    the face ordering in ``_TET_FACES`` then points away from the opposite
    vertex.
    """
    if len(tets) == 0:
        return np.zeros((0, 3), dtype=np.intp)
    faces, _, _, key = _face_table(tets)
    _, inverse, counts = np.unique(key, return_inverse=True, return_counts=True)
    return faces[counts[inverse] == 1]


def triangle_circles(points, faces) -> tuple[np.ndarray, np.ndarray]:
    """Circumcenters (F, 3) and circumradii (F,) of triangles."""
    points = np.asarray(points, dtype=float)
    a = points[faces[:, 0]]
    ab, ac = points[faces[:, 1]] - a, points[faces[:, 2]] - a
    n = np.cross(ab, ac)
    nn = np.einsum("ij,ij->i", n, n)
    num = (
        np.einsum("ij,ij->i", ac, ac)[:, None] * np.cross(n, ab)
        + np.einsum("ij,ij->i", ab, ab)[:, None] * np.cross(ac, n)
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        offset = num / (2.0 * nn[:, None])
    radius = np.linalg.norm(offset, axis=1)
    radius[~np.isfinite(radius)] = np.inf
    return a + offset, radius


def alpha_faces(points, tets, alpha: float, tet_radius: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Boundary triangles of the alpha complex and the kept tetrahedra.

    A face is on the boundary when exactly one of its tetrahedra has
    circumradius <= alpha, or when none does but the face itself is an
    isolated alpha-triangle: circumradius <= alpha and no Delaunay neighbour
    vertex strictly inside its diametral ball. The second kind matters on
    nearly convex clouds, where every tetrahedron spans the whole shape.
    """
    points = np.asarray(points, dtype=float)
    if len(tets) == 0:
        return np.zeros((0, 3), dtype=np.intp), tets
    if tet_radius is None:
        _, tet_radius = circumspheres(points, tets)
    kept_tet = tet_radius <= alpha
    faces, opposite, owner, key = _face_table(tets)
    uniq, first, inverse = np.unique(key, return_index=True, return_inverse=True)
    n_kept = np.bincount(inverse, weights=kept_tet[owner], minlength=len(uniq))
    on_boundary = n_kept[inverse] == 1
    from_kept = on_boundary & kept_tet[owner]

    # isolated triangles: test each unique face not touching a kept tet
    free = np.flatnonzero(n_kept == 0)
    center, radius = triangle_circles(points, faces[first[free]])
    small = radius <= alpha
    free, center, radius = free[small], center[small], radius[small]
    slot = np.full(len(uniq), -1)
    slot[free] = np.arange(len(free))
    occ = np.flatnonzero(slot[inverse] >= 0)
    s = slot[inverse[occ]]
    inside = np.einsum("ij,ij->i", points[opposite[occ]] - center[s], points[opposite[occ]] - center[s])
    blocked = np.zeros(len(free), dtype=bool)
    np.logical_or.at(blocked, s, inside < radius[s] ** 2 * (1.0 - 1e-12))
    isolated = faces[first[free[~blocked]]]
    return np.concatenate([faces[from_kept], isolated]), tets[kept_tet]


def alpha_tets(points, tets, alpha: float) -> np.ndarray:
    _, radius = circumspheres(points, tets)
    return tets[radius <= alpha]


def alpha_shape(points, alpha: float, tets: np.ndarray | None = None) -> TriangleMesh:
    """Boundary of the alpha complex of the Delaunay tetrahedralization.

    Keeps tetrahedra with circumradius <= alpha and returns the faces owned by
    exactly one kept tetrahedron (outward wound) plus isolated alpha-triangles
    (see :func:`alpha_faces`). Raises ``EmptyBoundaryError`` when nothing
    survives.
    """
    points = np.asarray(points, dtype=float)
    if tets is None:
        tets = delaunay_3d(points)
    faces, _ = alpha_faces(points, tets, alpha)
    if len(faces) == 0:
        raise EmptyBoundaryError(f"alpha={alpha:g} keeps no boundary triangles")
    return TriangleMesh(points, faces)


def default_alpha(points) -> float:
    return 4.0 * mean_nn_distance(points)


def estimate_surface(
    points,
    alpha: float | None = None,
    max_doublings: int = 3,
    min_coverage: float = 1.0,
) -> tuple[TriangleMesh, float]:
    """Alpha shape with the fallback policy used by the attacks.

    Starts at ``alpha`` (default: 4x mean nearest-neighbour distance) and
    doubles it up to ``max_doublings`` times while the boundary is empty or
    fewer than ``min_coverage`` of the points touch the alpha complex (kept
    tetrahedra or boundary triangles); after that it returns the convex hull
    (alpha = inf). Returns the mesh and the alpha actually used.
    """
    points = np.asarray(points, dtype=float)
    tets = delaunay_3d(points)
    _, radius = circumspheres(points, tets)
    a = default_alpha(points) if alpha is None else float(alpha)
    for _ in range(max_doublings + 1):
        faces, kept = alpha_faces(points, tets, a, radius)
        if len(faces):
            covered = np.zeros(len(points), dtype=bool)
            covered[kept.ravel()] = True
            covered[faces.ravel()] = True
            if covered.mean() >= min_coverage:
                return TriangleMesh(points, faces), a
        a *= 2.0
    log.debug("alpha shape fell back to the convex hull")
    return TriangleMesh(points, boundary_faces(points, tets)), float("inf")
