"""File formats: OFF meshes (read), XYZ/PLY point clouds (write, XYZ read)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..geometry import TriangleMesh


class OffFormatError(ValueError):
    """Malformed OFF file. ``code`` is one of header/counts/vertex/face/index."""

    def __init__(self, code: str, line: int, message: str, path=None):
        where = f"{path}:" if path is not None else "line "
        super().__init__(f"{where}{line}: [{code}] {message}")
        self.code = code
        self.line = line


def load_off(path) -> TriangleMesh:
    """Parse an ASCII OFF mesh; polygons are fan-triangulated.

    Comment lines (``#``) and blank lines are skipped. Also accepts the common
    ModelNet quirk where the counts are glued to the header (``OFF490 518 0``).
    """
    path = Path(path)
    with open(path) as fh:
        raw = fh.read().splitlines()
    lines = [(i + 1, ln.split("#", 1)[0].strip()) for i, ln in enumerate(raw)]
    lines = [(no, ln) for no, ln in lines if ln]
    if not lines or not lines[0][1].startswith("OFF"):
        no = lines[0][0] if lines else 1
        raise OffFormatError("header", no, "missing 'OFF' header", path)
    pos = 0
    head_no, head = lines[0]
    rest = head[3:].strip()
    if rest:
        counts_no, counts_line = head_no, rest
        pos = 1
    else:
        if len(lines) < 2:
            raise OffFormatError("counts", head_no + 1, "missing counts line", path)
        counts_no, counts_line = lines[1]
        pos = 2
    try:
        n_vert, n_face = (int(tok) for tok in counts_line.split()[:2])
    except ValueError:
        raise OffFormatError("counts", counts_no, f"bad counts {counts_line!r}", path) from None
    if n_vert < 0 or n_face < 0:
        raise OffFormatError("counts", counts_no, "negative counts", path)
    if len(lines) - pos < n_vert + n_face:
        raise OffFormatError(
            "counts", counts_no, f"expected {n_vert} vertices and {n_face} faces, file is too short", path
        )

    verts = np.empty((n_vert, 3))
    for k in range(n_vert):
        no, ln = lines[pos + k]
        try:
            verts[k] = [float(t) for t in ln.split()[:3]]
        except ValueError:
            raise OffFormatError("vertex", no, f"bad vertex {ln!r}", path) from None
    pos += n_vert

    tris = []
    for k in range(n_face):
        no, ln = lines[pos + k]
        try:
            toks = [int(t) for t in ln.split()]
        except ValueError:
            raise OffFormatError("face", no, f"bad face {ln!r}", path) from None
        if not toks or len(toks) < toks[0] + 1 or toks[0] < 3:
            raise OffFormatError("face", no, f"bad face {ln!r}", path)
        idx = toks[1 : toks[0] + 1]
        bad = [i for i in idx if i < 0 or i >= n_vert]
        if bad:
            raise OffFormatError("index", no, f"vertex index {bad[0]} out of range (have {n_vert})", path)
        tris.extend((idx[0], idx[j], idx[j + 1]) for j in range(1, len(idx) - 1))
    if len(lines) - pos > n_face:
        no = lines[pos + n_face][0]
        raise OffFormatError("counts", no, "more lines than the counts declare", path)
    return TriangleMesh(verts, np.array(tris, dtype=np.intp).reshape(-1, 3))


def write_xyz(cloud, path) -> Path:
    """One ``x y z`` line per point at full double precision."""
    path = Path(path)
    cloud = np.asarray(cloud, dtype=float).reshape(-1, 3)
    try:
        with open(path, "w") as fh:
            for x, y, z in cloud.tolist():
                fh.write(f"{x!r} {y!r} {z!r}\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def read_xyz(path) -> np.ndarray:
    path = Path(path)
    rows = [ln.split() for ln in path.read_text().splitlines() if ln.strip()]
    return np.array([[float(t) for t in r[:3]] for r in rows], dtype=float).reshape(-1, 3)


def write_ply(cloud, path) -> Path:
    """ASCII PLY with a single ``vertex`` element of float x/y/z properties."""
    path = Path(path)
    cloud = np.asarray(cloud, dtype=float).reshape(-1, 3)
    header = (
        "ply\nformat ascii 1.0\n"
        f"element vertex {len(cloud)}\n"
        "property double x\nproperty double y\nproperty double z\n"
        "end_header\n"
    )
    try:
        with open(path, "w") as fh:
            fh.write(header)
            for x, y, z in cloud.tolist():
                fh.write(f"{x!r} {y!r} {z!r}\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def export_cloud(cloud, path, fmt: str | None = None) -> Path:
    """Write ``cloud`` as XYZ or PLY (inferred from the suffix when ``fmt`` is None)."""
    fmt = (fmt or Path(path).suffix.lstrip(".") or "xyz").lower()
    if fmt == "xyz":
        return write_xyz(cloud, path)
    if fmt == "ply":
        return write_ply(cloud, path)
    raise ValueError(f"unknown export format {fmt!r} (xyz or ply)")
