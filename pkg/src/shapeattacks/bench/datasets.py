"""Synthetic shape datasets (sphere, box, cylinder, cone, torus) and OFF ingestion."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..geometry import TriangleMesh, sample_on_mesh
from ..net import random_rotation

SHAPES = ("sphere", "box", "cylinder", "cone", "torus")


@dataclass
class Dataset:
    clouds: np.ndarray  # (S, N, 3)
    labels: np.ndarray  # (S,)
    class_names: list[str]
    meshes: list[TriangleMesh] | None = None
    split: str = "test"
    sources: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        meshes = [self.meshes[i] for i in idx] if self.meshes is not None else None
        sources = [self.sources[i] for i in idx] if self.sources else []
        return Dataset(self.clouds[idx], self.labels[idx], self.class_names, meshes, self.split, sources)


# ------------------------------------------------------------------- meshes
def icosphere(subdivisions: int = 3) -> TriangleMesh:
    t = (1.0 + 5**0.5) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    v = [np.array(p, dtype=float) / np.linalg.norm(p) for p in verts]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = v[i] + v[j]
                v.append(m / np.linalg.norm(m))
                cache[key] = len(v) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return TriangleMesh(np.array(v), np.array(faces))


def box_mesh(extent=(1.0, 1.0, 1.0)) -> TriangleMesh:
    ex = np.asarray(extent, dtype=float) / 2.0
    corners = np.array([[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], dtype=float) * ex
    quads = [(0, 1, 3, 2), (4, 6, 7, 5), (0, 4, 5, 1), (2, 3, 7, 6), (0, 2, 6, 4), (1, 5, 7, 3)]
    faces = [f for a, b, c, d in quads for f in ((a, b, c), (a, c, d))]
    return TriangleMesh(corners, np.array(faces))


def _revolve(profile: np.ndarray, segments: int, closed: bool = False) -> TriangleMesh:
    """Surface of revolution about z from a (K, 2) profile of (radius, z) rows.

    Profile rows with zero radius collapse to a single apex vertex.
    """
    theta = np.linspace(0.0, 2 * np.pi, segments, endpoint=False)
    verts, rings = [], []
    for r, z in profile:
        if r == 0:
            rings.append([len(verts)] * segments)
            verts.append((0.0, 0.0, z))
        else:
            rings.append(list(range(len(verts), len(verts) + segments)))
            verts.extend((r * np.cos(t), r * np.sin(t), z) for t in theta)
    n_rings = len(rings) if not closed else len(rings) + 1
    faces = []
    for i in range(n_rings - 1):
        lo, hi = rings[i], rings[(i + 1) % len(rings)]
        for s in range(segments):
            t = (s + 1) % segments
            faces.append((lo[s], lo[t], hi[t]))
            faces.append((lo[s], hi[t], hi[s]))
    return TriangleMesh(np.array(verts), np.array(faces))


def cylinder_mesh(radius=0.5, height=1.0, segments=32) -> TriangleMesh:
    h = height / 2.0
    return _revolve(np.array([[0, -h], [radius, -h], [radius, h], [0, h]]), segments)


def cone_mesh(radius=0.5, height=1.0, segments=32) -> TriangleMesh:
    h = height / 2.0
    return _revolve(np.array([[0, -h], [radius, -h], [0, h]]), segments)


def torus_mesh(major=1.0, minor=0.35, segments=32, tube_segments=16) -> TriangleMesh:
    phi = np.linspace(0.0, 2 * np.pi, tube_segments, endpoint=False)
    profile = np.stack([major + minor * np.cos(phi), minor * np.sin(phi)], axis=1)
    return _revolve(profile, segments, closed=True)


def shape_mesh(name: str, rng: np.random.Generator) -> TriangleMesh:
    """Parametric mesh of class ``name`` with random size/aspect jitter."""
    size = rng.uniform(0.5, 2.0)
    if name == "sphere":
        mesh = icosphere(3)
    elif name == "box":
        mesh = box_mesh(rng.uniform(0.4, 1.6, 3))
    elif name == "cylinder":
        mesh = cylinder_mesh(radius=rng.uniform(0.3, 0.6), height=rng.uniform(0.8, 2.0))
    elif name == "cone":
        mesh = cone_mesh(radius=rng.uniform(0.3, 0.7), height=rng.uniform(0.8, 2.0))
    elif name == "torus":
        mesh = torus_mesh(major=1.0, minor=rng.uniform(0.2, 0.45))
    else:
        raise ValueError(f"unknown shape {name!r}; choose from {SHAPES}")
    return mesh.transformed(scale=size)


def normalize_cloud(cloud: np.ndarray, mesh: TriangleMesh | None = None):
    """Center and scale so the farthest point is at distance 1 from the center.

    The center is the surface centroid of ``mesh`` when given (free of sampling
    noise), otherwise the mean of the points.
    """
    center = mesh.centroid if mesh is not None else cloud.mean(axis=0)
    scale = 1.0 / np.linalg.norm(cloud - center, axis=1).max()
    cloud = (cloud - center) * scale
    if mesh is not None:
        mesh = mesh.transformed(offset=-center, scale=scale)
    return cloud, mesh


def sample_cloud(mesh: TriangleMesh, n_points: int, rng: np.random.Generator):
    cloud = sample_on_mesh(mesh, n_points, rng)
    return normalize_cloud(cloud, mesh)


def gen_synthetic_dataset(
    classes=SHAPES,
    per_class: int = 30,
    n_points: int = 1024,
    rng: np.random.Generator | None = None,
    rotate: bool = True,
    split: str = "test",
) -> Dataset:
    """``per_class`` randomly jittered and rotated samples of each shape class.

    Samples are interleaved by class (sample i has class i % len(classes)).
    Each stored mesh is the normalized generating surface of its cloud.
    """
    if n_points < 4:
        raise ValueError("need at least 4 points per cloud")
    rng = rng if rng is not None else np.random.default_rng(0)
    classes = list(classes)
    clouds, labels, meshes = [], [], []
    for _ in range(per_class):
        for label, name in enumerate(classes):
            mesh = shape_mesh(name, rng)
            if rotate:
                mesh = mesh.transformed(rotation=random_rotation(rng))
            cloud, mesh = sample_cloud(mesh, n_points, rng)
            clouds.append(cloud)
            labels.append(label)
            meshes.append(mesh)
    return Dataset(np.array(clouds), np.array(labels), classes, meshes, split)


def synthetic_splits(
    classes=SHAPES, train_per_class: int = 120, test_per_class: int = 30, n_points: int = 1024, seed: int = 0
) -> tuple[Dataset, Dataset]:
    """Independent train and test sets derived from one seed."""
    train_seq, test_seq = np.random.SeedSequence(seed).spawn(2)
    train = gen_synthetic_dataset(classes, train_per_class, n_points, np.random.default_rng(train_seq), split="train")
    test = gen_synthetic_dataset(classes, test_per_class, n_points, np.random.default_rng(test_seq), split="test")
    return train, test


def dataset_from_off_dir(root, n_points: int = 1024, split: str = "test", seed: int = 0) -> Dataset:
    """ModelNet-style layout: ``root/<class>/[<split>/]*.off``.

    Class names are the sorted subdirectory names; one cloud is sampled per
    mesh and normalized to the unit sphere.
    """
    from .io import load_off

    root = Path(root)
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise ValueError(f"no class directories under {root}")
    rng = np.random.default_rng(seed)
    clouds, labels, meshes, sources = [], [], [], []
    for label, cdir in enumerate(class_dirs):
        sub = cdir / split if (cdir / split).is_dir() else cdir
        for path in sorted(sub.glob("*.off")):
            cloud, mesh = sample_cloud(load_off(path), n_points, rng)
            clouds.append(cloud)
            labels.append(label)
            meshes.append(mesh)
            sources.append(str(path))
    if not clouds:
        raise ValueError(f"no .off files found under {root}")
    return Dataset(np.array(clouds), np.array(labels), [c.name for c in class_dirs], meshes, split, sources)
