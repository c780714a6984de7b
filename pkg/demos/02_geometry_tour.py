# The geometry underneath the shape attacks: Delaunay tetrahedra, alpha shapes,
# nearest-neighbour search, farthest point sampling and surface projection.
#
#   python3 demos/02_geometry_tour.py

import numpy as np

from shapeattacks.bench.datasets import shape_mesh, sample_cloud
from shapeattacks.geometry import (
    build_index,
    chamfer_distance,
    circumspheres,
    delaunay_3d,
    estimate_surface,
    farthest_point_sample,
    hausdorff_to_surface,
    mean_nn_distance,
    project_to_surface,
    sample_on_mesh,
    surface_distance,
)

rng = np.random.default_rng(0)

# a torus cloud, normalized to the unit sphere, and the mesh it was sampled from
cloud, true_mesh = sample_cloud(shape_mesh("torus", rng), 1024, rng)
print("cloud", cloud.shape, f"mean nn distance {mean_nn_distance(cloud):.4f}")

# Delaunay tetrahedralization: no vertex lies inside any tetrahedron's circumsphere
tets = delaunay_3d(cloud)
centers, radii = circumspheres(cloud, tets)
print(f"{len(tets)} tetrahedra, circumradius median {np.median(radii):.3f}, max {radii.max():.1f}")

# Alpha shape: keep small tetrahedra, take the boundary. The torus hole survives,
# which the convex hull would fill in.
mesh, alpha = estimate_surface(cloud)
print(f"alpha shape at alpha={alpha:.3f}: {len(mesh.faces)} triangles, area {mesh.total_area:.2f}")
# a sampled surface gives a thin two-sided shell, so roughly twice the true area
print(f"true surface area {true_mesh.total_area:.2f}")
probe = np.zeros((1, 3))  # the center of the hole
print(f"distance from the hole's center to the alpha shape {surface_distance(probe, mesh)[0]:.3f}")

# k nearest neighbours through a vantage-point tree, leaving each query point out
tree = build_index(cloud)
dist, idx = tree.query(cloud[:3], 4, exclude=np.arange(3))
print("4 nearest neighbours of the first three points:\n", idx)

# farthest point sampling spreads a subset evenly over the shape
pick = farthest_point_sample(cloud, 64)
print(f"64 FPS points cover the cloud to within {np.sqrt(((cloud[:, None] - cloud[pick][None]) ** 2).sum(-1)).min(1).max():.3f}")

# points pushed off the surface and projected back land on it again
noisy = cloud + rng.normal(scale=0.05, size=cloud.shape)
back = project_to_surface(noisy, mesh)
print(f"Hausdorff to surface: noisy {hausdorff_to_surface(noisy, mesh):.4f}, projected {hausdorff_to_surface(back, mesh):.2e}")

# resampling the alpha shape gives a fresh cloud of the same object
fresh = sample_on_mesh(mesh, 1024, rng)
print(f"Chamfer between the cloud and a resampled copy {chamfer_distance(fresh, cloud):.5f}")
