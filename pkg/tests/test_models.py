import numpy as np
import pytest

from geolangevin import charts as ch
from geolangevin import geometry as geo
from geolangevin.errors import ChartBoundary, ConfigError, OffManifold, ParticleCollision
from geolangevin.integrators import Trajectory
from geolangevin.models import (CATALOG, Interaction, LocalState, ModelKind, ModelSpec, SwarmSpec,
                                ambient_fields, belt_transform, effective_gradients, get_model,
                                local_fields, swarm_fields)
from geolangevin.potentials import Potential

from conftest import MANIFOLD_CASES, sphere_points, tangent_vectors

K = ModelKind
PHI3 = Potential.polynomial([(1.0, [1, 0, 0]), (0.5, [0, 2, 1]), (-0.3, [1, 1, 0])])


# catalog

def test_catalog_covers_every_kind():
    assert set(CATALOG) == set(ModelKind)
    for kind in ModelKind:
        spec = ModelSpec(kind, swarm=SwarmSpec(K=2) if kind == K.SWARM else None)
        m = get_model(kind)
        assert m.schema(spec).size == len(m.default_state(spec))
        assert m.noise_dim(spec) >= 1


def test_euler_rejection_flags():
    sv = get_model(K.SPHERICAL_VELOCITY_AMBIENT)
    geo_l = get_model(K.GEOMETRIC_LANGEVIN_AMBIENT)
    assert not sv.allows_euler(ModelSpec(K.SPHERICAL_VELOCITY_AMBIENT))
    assert geo_l.allows_euler(ModelSpec(K.GEOMETRIC_LANGEVIN_AMBIENT))
    assert ambient_fields(ModelSpec(K.GEOMETRIC_LANGEVIN_AMBIENT), [1, 0, 0, 0, 1, 0]).ito_equal


def test_spec_validation():
    with pytest.raises(ConfigError):
        ModelSpec(K.CLASSICAL_LANGEVIN, sigma=-1.0)
    with pytest.raises(ConfigError):
        ModelSpec(K.SPHERICAL_VELOCITY_AMBIENT, r=0.0)
    with pytest.raises(ConfigError):
        ModelSpec(K.SWARM)
    with pytest.raises(ConfigError):
        ModelSpec(K.CLASSICAL_LANGEVIN, d=3, potential=Potential.squared_norm(2))


# ambient examples

def test_basic_fiber_force_free_fields():
    spec = ModelSpec(K.BASIC_FIBER_AMBIENT, sigma=0.7, d=3)
    om = np.array([0.0, 0.6, 0.8])
    f = ambient_fields(spec, np.concatenate([[1.0, 2.0, 3.0], om]))
    np.testing.assert_allclose(f.drift[3:], 0.0, atol=1e-15)
    np.testing.assert_allclose(f.diffusion[3:], 0.7 * (np.eye(3) - np.outer(om, om)), atol=1e-15)
    assert f.interpretation == "stratonovich"


def test_spherical_velocity_drift_contains_forcing(rng):
    spec = ModelSpec(K.SPHERICAL_VELOCITY_AMBIENT, r=1.7, sigma=0.0)
    m = spec.manifold
    xi = sphere_points(rng, 10)
    om = tangent_vectors(m, xi, rng)
    om *= 1.7 / np.linalg.norm(om, axis=1, keepdims=True)
    f = ambient_fields(spec, np.concatenate([xi, om], axis=1))
    np.testing.assert_allclose(f.drift[:, 3:], -(1.7 ** 2) * xi, atol=1e-13)


def test_smooth_fiber_force_free_mu_drift():
    spec = ModelSpec(K.SMOOTH_FIBER_AMBIENT, lam=0.8, sigma=0.3, d=3)
    om = np.array([0.6, 0.8, 0.0])
    mu = np.array([-0.8 * 1.5, 0.6 * 1.5, 0.4])
    f = ambient_fields(spec, np.concatenate([[0.1, 0.2, 0.3], om, mu]))
    np.testing.assert_allclose(f.drift[6:], -0.8 * mu - (mu @ mu) * om, atol=1e-14)
    np.testing.assert_allclose(f.drift[3:6], mu, atol=1e-15)


def test_ambient_fields_rejects_off_manifold():
    with pytest.raises(OffManifold):
        ambient_fields(ModelSpec(K.GEOMETRIC_LANGEVIN_AMBIENT), [1.0, 0, 0, 0.1, 0, 0])


# local examples

def test_nu_form_equator_friction():
    spec = ModelSpec(K.SPHERICAL_LANGEVIN_LOCAL_NU, lam=1.3)
    f = local_fields(spec, LocalState([0.4, np.pi / 2, 0.7, -0.2]))
    assert f.drift[2] == pytest.approx(-1.3 * 0.7, abs=1e-15)


def test_sphere_sv_equator():
    spec = ModelSpec(K.SPHERE_SV_LOCAL, sigma=0.9, r=1.5)
    f = local_fields(spec, [0.2, np.pi / 2, 1.0])
    assert f.drift[2] == pytest.approx(0.0, abs=1e-15)
    assert f.diffusion[2, 0] == pytest.approx(0.9 / 1.5)


def test_sphere_sv_alpha_drift_transcription(rng):
    spec = ModelSpec(K.SPHERE_SV_LOCAL, r=0.7, potential=PHI3)
    psi = ch.chart_potential(ch.sphere_chart(), PHI3)
    for _ in range(20):
        t1, t2, a = rng.uniform(0, 6), rng.uniform(0.2, 2.9), rng.uniform(0, 6)
        dpsi = psi.grad(np.array([t1, t2]))
        r = 0.7
        want = (r * np.cos(a) / np.tan(t2) + np.sin(a) / (r * np.sin(t2)) * dpsi[0]
                - np.cos(a) / r * dpsi[1])
        assert local_fields(spec, [t1, t2, a]).drift[2] == pytest.approx(want, abs=1e-12)


def test_spherical_bm_coefficients():
    spec = ModelSpec(K.SPHERICAL_BM_LOCAL, sigma=0.8)
    t2 = 0.9
    f = local_fields(spec, [0.3, t2])
    assert f.diffusion[0, 0] == pytest.approx(0.8 / np.sin(t2))
    assert f.drift[1] == pytest.approx(0.5 * 0.64 / np.tan(t2))


def test_local_fields_chart_boundary():
    with pytest.raises(ChartBoundary):
        local_fields(ModelSpec(K.SPHERE_SV_LOCAL), [0.0, 1e-9, 0.0])


def test_nu_form_matches_kappa_form(rng):
    # ν₁ = sinθ₂ κ₁, ν₂ = κ₂ is a change of velocity coordinates; the transformed
    # κ-drift must equal the ν-drift by Itô's rule (no noise cross terms: σ is additive in ν).
    kap = ModelSpec(K.SPHERICAL_LANGEVIN_LOCAL, lam=0.6, sigma=0.9, potential=PHI3)
    nu = kap.with_(kind=K.SPHERICAL_LANGEVIN_LOCAL_NU)
    for _ in range(20):
        t1, t2 = rng.uniform(0, 6), rng.uniform(0.3, 2.8)
        k1, k2 = rng.standard_normal(2)
        fk = local_fields(kap, [t1, t2, k1, k2])
        fn = local_fields(nu, [t1, t2, np.sin(t2) * k1, k2])
        s, c = np.sin(t2), np.cos(t2)
        # dν₁ = s dκ₁ + c κ₁ dθ₂ (dθ₂ has no noise so there is no Itô correction)
        np.testing.assert_allclose(fn.drift[2], s * fk.drift[2] + c * k1 * fk.drift[1], atol=1e-12)
        np.testing.assert_allclose(fn.drift[3], fk.drift[3], atol=1e-12)
        np.testing.assert_allclose(fn.diffusion[2], s * fk.diffusion[2], atol=1e-12)


# tangency of ambient fields

def _complex_step(fn, x, v, h=1e-30):
    return np.imag(fn(x + 1j * h * v)) / h


def _tm_linearized(m, r=None):
    """Exact derivative of (f_j(ξ), ∇f_j(ξ)·ω[, |ω|² − r²]) along (δξ, δω)."""
    n = m.ambient_dim

    def dG(x, v):
        xi, om = x[:n], x[n:2 * n]
        dxi, dom = v[:n], v[n:2 * n]
        J, H = m.gradients(xi), m.hessians(xi)
        out = [J @ dxi, np.einsum("i,kij,j->k", om, H, dxi) + J @ dom]
        if r is not None:
            out.append([2 * om @ dom])
        return np.concatenate(out)
    return dG


def _fiber_constraints(d, smooth):
    def G(x):
        om = x[d:2 * d]
        out = [om @ om - 1.0]
        if smooth:
            out.append(om @ x[2 * d:])
        return np.array(out)
    return G


def _check_tangent(spec, X, G, tol=1e-10, linearized=False):
    a, B = get_model(spec.kind).fields(spec, X)
    deriv = G if linearized else (lambda x, v: _complex_step(G, x, v))
    for i in range(len(X)):
        assert np.abs(deriv(X[i], a[i])).max() < tol
        for j in range(B.shape[2]):
            assert np.abs(deriv(X[i], B[i, :, j])).max() < tol


@pytest.mark.parametrize("case", sorted(MANIFOLD_CASES))
@pytest.mark.parametrize("kind", [K.GEOMETRIC_LANGEVIN_AMBIENT, K.SPHERICAL_VELOCITY_AMBIENT])
def test_manifold_kinds_tangent(case, kind, rng):
    make, sample = MANIFOLD_CASES[case]
    m = make()
    n = m.ambient_dim
    phi = Potential.polynomial([(1.0, [1] + [0] * (n - 1)), (0.4, [0] * (n - 1) + [2])])
    r = 1.3 if kind == K.SPHERICAL_VELOCITY_AMBIENT else None
    spec = ModelSpec(kind, lam=0.5, sigma=0.8, r=r or 1.0, manifold=m, potential=phi)
    xi = sample(rng, 1000)
    om = tangent_vectors(m, xi, rng)
    if r:
        om *= r / np.linalg.norm(om, axis=1, keepdims=True)
    _check_tangent(spec, np.concatenate([xi, om], axis=1), _tm_linearized(m, r), linearized=True)


@pytest.mark.parametrize("d", [2, 3])
@pytest.mark.parametrize("kind", [K.BASIC_FIBER_AMBIENT, K.SMOOTH_FIBER_AMBIENT])
def test_fiber_kinds_tangent(kind, d, rng):
    spec = ModelSpec(kind, lam=0.7, sigma=1.1, d=d, potential=Potential.quadratic(np.arange(1.0, d + 1)))
    n = 1000
    xi = rng.standard_normal((n, d))
    om = sphere_points(rng, n, d)
    parts = [xi, om]
    if kind == K.SMOOTH_FIBER_AMBIENT:
        mu = rng.standard_normal((n, d))
        parts.append(mu - np.einsum("mi,mi->m", mu, om)[:, None] * om)
    _check_tangent(spec, np.concatenate(parts, axis=1), _fiber_constraints(d, kind == K.SMOOTH_FIBER_AMBIENT))


@pytest.mark.parametrize("smooth", [False, True])
def test_swarm_ambient_tangent(smooth, rng):
    Kp, d, r = 3, 3, 0.8
    sw = SwarmSpec(K=Kp, roosting=Potential.squared_norm(d), interaction=Interaction.morse(1.0, 0.5, 0.5, 2.0),
                   r=r, sigma=0.6, d=d, smooth=smooth, lam=0.9)
    spec = ModelSpec(K.SWARM, swarm=sw)
    n = 200
    xi = rng.standard_normal((n, Kp * d))
    om = (sphere_points(rng, n * Kp, d) * r).reshape(n, Kp, d)
    parts = [xi, om.reshape(n, -1)]
    if smooth:
        mu = rng.standard_normal((n, Kp, d))
        mu -= np.einsum("mki,mki->mk", mu, om)[..., None] * om / r ** 2
        parts.append(mu.reshape(n, -1))

    def G(x):
        o = x[Kp * d:2 * Kp * d].reshape(Kp, d)
        out = list(np.einsum("ki,ki->k", o, o) - r * r)
        if smooth:
            out += list(np.einsum("ki,ki->k", o, x[2 * Kp * d:].reshape(Kp, d)))
        return np.array(out)
    _check_tangent(spec, np.concatenate(parts, axis=1), G)


# reductions between kinds

def test_classical_equals_geometric_on_plane(rng):
    d = 2
    phi3 = Potential.polynomial([(1.0, [2, 0, 0]), (0.5, [1, 1, 0])])
    phi2 = Potential.polynomial([(1.0, [2, 0]), (0.5, [1, 1])])
    g = ModelSpec(K.GEOMETRIC_LANGEVIN_AMBIENT, lam=0.7, sigma=1.2, manifold=geo.plane(d), potential=phi3)
    c = ModelSpec(K.CLASSICAL_LANGEVIN, lam=0.7, sigma=1.2, d=d, potential=phi2)
    for _ in range(20):
        xi, om = rng.standard_normal(d), rng.standard_normal(d)
        fg = ambient_fields(g, np.concatenate([xi, [0.0], om, [0.0]]))
        fc = local_fields(c, np.concatenate([xi, om]))
        np.testing.assert_allclose(fg.drift[[0, 1, 3, 4]], fc.drift, atol=1e-12)
        np.testing.assert_allclose(fg.drift[[2, 5]], 0.0, atol=1e-12)
        np.testing.assert_allclose(fg.diffusion[np.ix_([0, 1, 3, 4], [0, 1])], fc.diffusion, atol=1e-12)
        np.testing.assert_allclose(fg.diffusion[:, 2], 0.0, atol=1e-12)


@pytest.mark.parametrize("d", [2, 3])
def test_basic_fiber_equals_spherical_velocity_in_flat_space(d, rng):
    phi = Potential.quadratic(np.linspace(0.5, 2.0, d))
    bf = ModelSpec(K.BASIC_FIBER_AMBIENT, sigma=0.9, d=d, potential=phi)
    sv = ModelSpec(K.SPHERICAL_VELOCITY_AMBIENT, lam=3.0, sigma=0.9, manifold=geo.euclidean(d), potential=phi)
    X = np.concatenate([rng.standard_normal((50, d)), sphere_points(rng, 50, d)], axis=1)
    a1, B1 = get_model(bf.kind).fields(bf, X)
    a2, B2 = get_model(sv.kind).fields(sv, X)
    np.testing.assert_allclose(a1, a2, atol=1e-12)
    np.testing.assert_allclose(B1, B2, atol=1e-12)


def test_smooth_fiber_local_d2_is_angle_form(rng):
    phi = Potential.quadratic([1.0, 0.5])
    loc = ModelSpec(K.SMOOTH_FIBER_LOCAL, lam=0.4, sigma=1.3, d=2, potential=phi)
    ang = ModelSpec(K.SMOOTH_FIBER_2D_ALPHA, lam=0.4, sigma=1.3, potential=phi)
    X = np.column_stack([rng.standard_normal((50, 2)), rng.uniform(0, 6, 50), rng.standard_normal(50)])
    a1, B1 = get_model(loc.kind).fields(loc, X)
    a2, B2 = get_model(ang.kind).fields(ang, X)
    np.testing.assert_allclose(a1, a2, atol=1e-12)
    np.testing.assert_allclose(B1, B2, atol=1e-12)


# swarm

def test_swarm_single_particle_is_basic_fiber(rng):
    phi = Potential.quadratic([1.0, 2.0])
    sw = ModelSpec(K.SWARM, swarm=SwarmSpec(K=1, roosting=phi, sigma=0.7))
    bf = ModelSpec(K.BASIC_FIBER_AMBIENT, sigma=0.7, potential=phi)
    X = np.concatenate([rng.standard_normal((20, 2)), sphere_points(rng, 20, 2)], axis=1)
    for a, b in zip(get_model(K.SWARM).fields(sw, X), get_model(bf.kind).fields(bf, X)):
        np.testing.assert_allclose(a, b, atol=1e-14)
    planar = ModelSpec(K.SWARM, swarm=SwarmSpec(K=1, roosting=phi, sigma=0.7, form="planar"))
    alpha = ModelSpec(K.BASIC_FIBER_2D_ALPHA, sigma=0.7, potential=phi)
    Y = np.column_stack([rng.standard_normal((20, 2)), rng.uniform(0, 6, 20)])
    for a, b in zip(get_model(K.SWARM).fields(planar, Y), get_model(alpha.kind).fields(alpha, Y)):
        np.testing.assert_allclose(a, b, atol=1e-14)


def test_swarm_pair_forces_opposite():
    sw = SwarmSpec(K=2, interaction=Interaction.quadratic(1.0))
    p = np.array([0.3, -0.4])
    g = effective_gradients(sw, np.array([[p, -p]]))[0]
    np.testing.assert_allclose(g[0], 2 * p, atol=1e-15)   # (1/K)·U'(s)/s·(ξ₁ − ξ₂) with U' = 2s
    np.testing.assert_allclose(g[0], -g[1], atol=1e-15)


def test_swarm_planar_angle_coefficient(rng):
    r = 1.4
    sw = SwarmSpec(K=3, roosting=Potential.quadratic([1.0, 0.3]),
                   interaction=Interaction.morse(1.0, 0.5, 0.6, 1.5), r=r, sigma=0.5, form="planar")
    spec = ModelSpec(K.SWARM, swarm=sw)
    X = np.concatenate([rng.standard_normal(6), rng.uniform(0, 6, 3)])
    a, B = swarm_fields(spec, X)
    grads = effective_gradients(sw, X[:6].reshape(1, 3, 2))[0]
    th = X[6:]
    perp = np.column_stack([-np.sin(th), np.cos(th)])
    np.testing.assert_allclose(a[:, 2], -np.einsum("ki,ki->k", perp, grads) / r, atol=1e-13)
    np.testing.assert_allclose(a[:, :2], r * np.column_stack([np.cos(th), np.sin(th)]), atol=1e-15)
    np.testing.assert_allclose(B[:, 2, 0], 0.5 / r)


def test_swarm_collision():
    sw = SwarmSpec(K=2, interaction=Interaction.inverse_power(1.0, 1.0))
    with pytest.raises(ParticleCollision):
        effective_gradients(sw, np.zeros((1, 2, 2)))


# belt transform

def _traj(states, dt=0.5):
    spec = ModelSpec(K.BASIC_FIBER_2D_ALPHA)
    schema = get_model(spec.kind).schema(spec)
    states = np.asarray(states, dtype=float)
    return Trajectory(schema, np.arange(len(states)) * dt, states)


def test_belt_identity_and_translation():
    tr = _traj(np.zeros((5, 3)))
    np.testing.assert_array_equal(belt_transform(tr, 0.0, [1, 0]).states, tr.states)
    moved = belt_transform(tr, 1.0, [1.0, 0.0])
    np.testing.assert_allclose(moved.states[4, :2], [2.0, 0.0])
    np.testing.assert_array_equal(moved.states[:, 2], 0.0)


def test_belt_linearity(rng):
    tr = _traj(rng.standard_normal((7, 3)))
    e = np.array([0.6, 0.8])
    twice = belt_transform(belt_transform(tr, 0.3, e), 0.3, e)
    np.testing.assert_allclose(twice.states, belt_transform(tr, 0.6, e).states, atol=1e-15)


def test_belt_rejects_fast_belt():
    with pytest.raises(ConfigError):
        belt_transform(_traj(np.zeros((2, 3))), 1.5, [1, 0])
