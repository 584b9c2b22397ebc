import numpy as np
import pytest

from geolangevin import geometry as geo


def sphere_points(rng, n, dim=3, radius=1.0):
    x = rng.standard_normal((n, dim))
    return radius * x / np.linalg.norm(x, axis=1, keepdims=True)


def cylinder_points(rng, n, radius=1.0):
    a = rng.uniform(0, 2 * np.pi, n)
    return np.column_stack([radius * np.cos(a), radius * np.sin(a), rng.uniform(-3, 3, n)])


def ellipsoid_points(rng, n, axes):
    return sphere_points(rng, n, len(axes)) * np.asarray(axes)


def plane_points(rng, n, d):
    x = rng.standard_normal((n, d + 1))
    x[:, -1] = 0.0
    return x


def tangent_vectors(m, xi, rng, scale=1.0):
    P = geo.project_tangent(m, xi)
    return scale * np.einsum("mij,mj->mi", P, rng.standard_normal(xi.shape))


def sphere_slice(height=0.3):
    """Circle {|ξ|² = 1, ξ₃ = h} in R³: a codimension-2 manifold."""
    e3 = np.array([0.0, 0.0, 1.0])
    return geo.ImplicitManifold("slice", 3, (
        geo.Constraint(lambda x: np.einsum("...i,...i->...", x, x) - 1.0, lambda x: 2.0 * np.asarray(x),
                       lambda x: np.broadcast_to(2.0 * np.eye(3), np.shape(x)[:-1] + (3, 3))),
        geo.Constraint(lambda x: np.asarray(x)[..., 2] - height,
                       lambda x: np.broadcast_to(e3, np.shape(x)).copy(),
                       lambda x: np.zeros(np.shape(x)[:-1] + (3, 3))),
    ))


def slice_points(rng, n, height=0.3):
    a = rng.uniform(0, 2 * np.pi, n)
    rho = np.sqrt(1 - height ** 2)
    return np.column_stack([rho * np.cos(a), rho * np.sin(a), np.full(n, height)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


MANIFOLD_CASES = {
    "sphere": (lambda: geo.sphere(3), lambda rng, n: sphere_points(rng, n)),
    "sphere_r2": (lambda: geo.sphere(3, 2.0), lambda rng, n: sphere_points(rng, n, radius=2.0)),
    "sphere_s3": (lambda: geo.sphere(4), lambda rng, n: sphere_points(rng, n, 4)),
    "cylinder": (lambda: geo.cylinder(1.5), lambda rng, n: cylinder_points(rng, n, 1.5)),
    "ellipsoid": (lambda: geo.ellipsoid([2.0, 1.0, 0.5]), lambda rng, n: ellipsoid_points(rng, n, [2.0, 1.0, 0.5])),
    "plane": (lambda: geo.plane(2), lambda rng, n: plane_points(rng, n, 2)),
    "slice": (sphere_slice, lambda rng, n: slice_points(rng, n)),
}
