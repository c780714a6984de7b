import numpy as np
import pytest

from shapeattacks.bench.datasets import (
    SHAPES,
    dataset_from_off_dir,
    gen_synthetic_dataset,
    shape_mesh,
    sample_cloud,
)
from shapeattacks.bench.io import OffFormatError, export_cloud, load_off, read_xyz, write_ply, write_xyz

CUBE_VERTS = """\
0 0 0
1 0 0
1 1 0
0 1 0
0 0 1
1 0 1
1 1 1
0 1 1
"""
CUBE_FACES = """\
4 0 3 2 1
4 4 5 6 7
4 0 1 5 4
4 1 2 6 5
4 2 3 7 6
4 3 0 4 7
"""


def _write(tmp_path, text, name="m.off"):
    path = tmp_path / name
    path.write_text(text)
    return path


# -------------------------------------------------------------------- OFF
def test_cube_quads_fan_triangulated(tmp_path):
    mesh = load_off(_write(tmp_path, "OFF\n8 6 12\n" + CUBE_VERTS + CUBE_FACES))
    assert mesh.vertices.shape == (8, 3)
    assert len(mesh.faces) == 12
    assert mesh.total_area == pytest.approx(6.0)


def test_comments_and_glued_header(tmp_path):
    text = "OFF8 6 0\n# a comment\n" + CUBE_VERTS + "\n" + CUBE_FACES
    assert len(load_off(_write(tmp_path, text)).faces) == 12


def test_zero_area_faces_dropped(tmp_path):
    text = "OFF\n4 2 0\n0 0 0\n1 0 0\n0 1 0\n2 0 0\n3 0 1 2\n3 0 1 3\n"
    assert len(load_off(_write(tmp_path, text)).faces) == 1


def test_bad_header_names_line_one(tmp_path):
    with pytest.raises(OffFormatError) as err:
        load_off(_write(tmp_path, "OFX\n8 6 0\n" + CUBE_VERTS + CUBE_FACES))
    assert err.value.code == "header" and err.value.line == 1


def test_out_of_range_index_names_face_line(tmp_path):
    faces = CUBE_FACES.replace("4 3 0 4 7", "4 3 0 4 99")
    with pytest.raises(OffFormatError) as err:
        load_off(_write(tmp_path, "OFF\n8 6 0\n" + CUBE_VERTS + faces))
    assert err.value.code == "index" and err.value.line == 2 + 8 + 6
    assert "99" in str(err.value)


@pytest.mark.parametrize(
    "text, code",
    [
        ("OFF\n8 six 0\n" + CUBE_VERTS + CUBE_FACES, "counts"),
        ("OFF\n8 7 0\n" + CUBE_VERTS + CUBE_FACES, "counts"),
        ("OFF\n8 5 0\n" + CUBE_VERTS + CUBE_FACES, "counts"),
        ("OFF\n8 6 0\n" + CUBE_VERTS.replace("1 1 1", "1 x 1") + CUBE_FACES, "vertex"),
        ("OFF\n8 6 0\n" + CUBE_VERTS + CUBE_FACES.replace("4 1 2 6 5", "4 1 2"), "face"),
        ("", "header"),
    ],
)
def test_error_codes_are_distinct(tmp_path, text, code):
    with pytest.raises(OffFormatError) as err:
        load_off(_write(tmp_path, text))
    assert err.value.code == code


def test_off_directory_dataset(tmp_path):
    for cls in ("b_cube", "a_cube"):
        (tmp_path / cls / "test").mkdir(parents=True)
        for i in range(2):
            _write(tmp_path / cls / "test", "OFF\n8 6 0\n" + CUBE_VERTS + CUBE_FACES, f"{i}.off")
    ds = dataset_from_off_dir(tmp_path, n_points=64)
    assert ds.class_names == ["a_cube", "b_cube"]
    assert ds.clouds.shape == (4, 64, 3) and ds.labels.tolist() == [0, 0, 1, 1]


# -------------------------------------------------------------- XYZ / PLY
def test_xyz_round_trip(tmp_path):
    cloud = np.random.default_rng(0).normal(size=(200, 3)) * 1e3
    back = read_xyz(write_xyz(cloud, tmp_path / "c.xyz"))
    assert np.abs(back - cloud).max() <= 1e-12


def test_ply_vertex_count(tmp_path):
    cloud = np.random.default_rng(0).normal(size=(37, 3))
    lines = write_ply(cloud, tmp_path / "c.ply").read_text().splitlines()
    assert "element vertex 37" in lines
    assert len(lines) - lines.index("end_header") - 1 == 37


def test_empty_cloud_export(tmp_path):
    assert read_xyz(export_cloud(np.zeros((0, 3)), tmp_path / "e.xyz")).shape == (0, 3)
    text = export_cloud(np.zeros((0, 3)), tmp_path / "e.ply").read_text()
    assert "element vertex 0" in text and text.endswith("end_header\n")


def test_export_errors(tmp_path):
    with pytest.raises(ValueError):
        export_cloud(np.zeros((2, 3)), tmp_path / "c.obj")
    with pytest.raises(OSError, match="missing"):
        export_cloud(np.zeros((2, 3)), tmp_path / "missing" / "c.xyz")


# -------------------------------------------------------------- synthetic
def test_synthetic_normalized_and_counted():
    ds = gen_synthetic_dataset(per_class=3, n_points=128, rng=np.random.default_rng(0))
    centers = np.array([m.centroid for m in ds.meshes])
    np.testing.assert_allclose(centers, 0.0, atol=1e-9)
    radii = np.linalg.norm(ds.clouds, axis=2).max(axis=1)
    np.testing.assert_allclose(radii, 1.0, atol=1e-9)
    assert np.bincount(ds.labels).tolist() == [3] * len(SHAPES)
    assert len(ds.meshes) == len(ds)


def test_stored_mesh_is_cloud_surface():
    from shapeattacks.geometry import surface_distance

    ds = gen_synthetic_dataset(per_class=1, n_points=256, rng=np.random.default_rng(1))
    for cloud, mesh in zip(ds.clouds, ds.meshes):
        assert surface_distance(cloud, mesh).max() < 1e-9


def test_sphere_class_radius():
    rng = np.random.default_rng(0)
    for _ in range(5):
        cloud, mesh = sample_cloud(shape_mesh("sphere", rng), 512, rng)
        r = np.linalg.norm(cloud - mesh.centroid, axis=1)
        assert np.all(np.abs(r - 1.0) <= 0.02)


def test_synthetic_rejects_tiny_clouds():
    with pytest.raises(ValueError):
        gen_synthetic_dataset(per_class=1, n_points=3)
