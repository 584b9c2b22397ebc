import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geolangevin import charts as ch
from geolangevin import geometry as geo
from geolangevin.analysis import (FREE, analytic_generator, batch_means_ess, collect_samples,
                                  conserved_monitor, constant, coordinate, from_callable,
                                  generator_apply, infinitesimal_stationarity, monomial, stationary_density,
                                  stationary_law, stationary_test, stratonovich_generator,
                                  TestFunction, trig_product, weak_consistency)
from geolangevin.errors import ChartBoundary, InsufficientSamples, MissingPartials, NoKnownStationary
from geolangevin.integrators import Diagnostics, Trajectory
from geolangevin.models import ModelKind, ModelSpec, get_model
from geolangevin.models.fields import embed_flat
from geolangevin.models.spec import Interaction, SwarmSpec
from geolangevin.potentials import Potential

K = ModelKind


def _all_specs():
    for kind in ModelKind:
        if kind == K.SWARM:
            yield ModelSpec(kind, swarm=SwarmSpec(K=2, interaction=Interaction.from_config(
                {"kind": "quadratic", "strength": 1.0})))
            yield ModelSpec(kind, swarm=SwarmSpec(K=2, form="planar"))
        else:
            yield ModelSpec(kind)


# generators

@pytest.mark.parametrize("spec", list(_all_specs()), ids=lambda s: s.kind.value)
def test_generator_zero_on_constants(spec):
    x = get_model(spec.kind).default_state(spec)
    assert generator_apply(spec, constant(3.0), x) == 0.0


def test_langevin_chart_generator_v2_hand_formula(rng):
    lam, sig = 0.7, 1.3
    spec = ModelSpec(K.SPHERICAL_LANGEVIN_LOCAL, lam=lam, sigma=sig)
    X = np.column_stack([rng.uniform(0, 2 * np.pi, 20), rng.uniform(0.2, 2.9, 20), rng.normal(size=(20, 2))])
    f = monomial([0, 0, 0, 2])
    s, c = np.sin(X[:, 1]), np.cos(X[:, 1])
    expected = 2 * s * c * X[:, 2] ** 2 * X[:, 3] - 2 * lam * X[:, 3] ** 2 + sig ** 2
    np.testing.assert_allclose(analytic_generator(spec, f, X), expected, atol=1e-12)


def test_sphere_sv_alpha_on_equator():
    spec = ModelSpec(K.SPHERE_SV_LOCAL)
    for a in (0.0, 0.4, 2.0):
        assert generator_apply(spec, coordinate(2, 3), [1.0, np.pi / 2, a]) == pytest.approx(0.0, abs=1e-15)


def test_generator_rejects_chart_boundary():
    with pytest.raises(ChartBoundary):
        generator_apply(ModelSpec(K.SPHERE_SV_LOCAL), coordinate(0, 3), [0.0, 0.0, 0.0])


def test_missing_partials():
    f = TestFunction(lambda x: x[..., 0] ** 2, allow_fd=False)
    with pytest.raises(MissingPartials):
        generator_apply(ModelSpec(K.CLASSICAL_LANGEVIN, d=1), f, [0.1, 0.2])


def test_fd_partials_second_order():
    g = monomial([2, 1])
    f = from_callable(g.value)
    x = np.array([[0.3, -0.7]])
    np.testing.assert_allclose(f.gradient(x), g.gradient(x), atol=1e-9)
    np.testing.assert_allclose(f.hessian(x), g.hessian(x), atol=1e-6)


def _random_local(spec, rng, n):
    model = get_model(spec.kind)
    kinds = model.schema(spec).kinds
    cols = []
    for k in kinds:
        if k == "periodic":
            cols.append(rng.uniform(0, 2 * np.pi, n))
        elif k == "interval":
            cols.append(rng.uniform(0.3, np.pi - 0.3, n))
        else:
            cols.append(rng.normal(scale=0.7, size=n))
    return np.column_stack(cols)


AMBIENT_PAIRS = [
    ModelSpec(K.SPHERICAL_LANGEVIN_LOCAL, lam=0.8, sigma=1.1, potential=Potential.linear(2)),
    ModelSpec(K.SPHERICAL_LANGEVIN_LOCAL_NU, lam=0.8, sigma=1.1, potential=Potential.linear(2)),
    ModelSpec(K.SPHERE_SV_LOCAL, sigma=0.9, r=1.5, potential=Potential.linear(2)),
    ModelSpec(K.CYLINDER_SV_LOCAL, sigma=0.9, r=1.5, potential=Potential.linear(0, 0.7)),
    ModelSpec(K.BASIC_FIBER_2D_ALPHA, sigma=0.8, potential=Potential.squared_norm(2)),
    ModelSpec(K.SMOOTH_FIBER_2D_ALPHA, lam=0.6, sigma=0.8, potential=Potential.squared_norm(2)),
    ModelSpec(K.SMOOTH_FIBER_LOCAL, d=3, lam=0.6, sigma=0.8, potential=Potential.squared_norm(3)),
    ModelSpec(K.CIRCLE_LANGEVIN, lam=0.5, sigma=0.7, potential=Potential.linear(1)),
]


@pytest.mark.parametrize("spec", AMBIENT_PAIRS, ids=lambda s: s.kind.value)
def test_local_generator_matches_ambient_counterpart(spec, rng):
    """L_local (f∘embed) = L_ambient f at the embedded state."""
    model = get_model(spec.kind)
    amb = model.counterpart(spec)
    X = _random_local(spec, rng, 10)
    Y = embed_flat(model, spec, X)
    n = Y.shape[1]
    powers = np.zeros((3, n), dtype=int)
    powers[0, 0] = 1
    powers[1, [1, n // 2]] = 1
    powers[2, n - 1] = 2
    fs = [monomial(p) for p in powers]
    for f in fs:
        g = from_callable(lambda x, f=f: f.value(embed_flat(model, spec, x)))
        lhs = stratonovich_generator(spec, g, X)
        rhs = stratonovich_generator(amb, f, Y)
        np.testing.assert_allclose(lhs, rhs, atol=2e-5 * (1 + np.abs(rhs).max()))


def test_cylinder_angle_drift_sign_is_pinned(rng):
    """Flipping the angle-drift sign breaks the match with the ambient cylinder equation."""
    spec = AMBIENT_PAIRS[3]
    model = get_model(spec.kind)
    amb = model.counterpart(spec)
    X = _random_local(spec, rng, 10)
    Y = embed_flat(model, spec, X)
    f = monomial([0, 0, 0, 1, 0, 0])       # ω₁ depends on the heading angle
    g = from_callable(lambda x: f.value(embed_flat(model, spec, x)))
    a, _ = model.fields(spec, X)
    dg = g.gradient(X)
    flipped = stratonovich_generator(spec, g, X) - 2 * a[:, 2] * dg[:, 2]
    rhs = stratonovich_generator(amb, f, Y)
    assert np.abs(flipped - rhs).max() > 1e-2


# stationary laws

def test_stationary_density_examples():
    nu = ModelSpec(K.SPHERICAL_LANGEVIN_LOCAL_NU)
    assert stationary_density(nu, [1.3, np.pi / 2, 0, 0]) == pytest.approx(1.0, abs=1e-15)
    fiber = ModelSpec(K.BASIC_FIBER_AMBIENT, d=2, potential=Potential.squared_norm(2))
    assert stationary_density(fiber, [0, 0, 1, 0]) == 1.0
    sv = ModelSpec(K.SPHERE_SV_LOCAL)
    for th in (0.2, 1.0, 2.5):
        assert stationary_density(sv, [0.3, th, 1.0]) == pytest.approx(np.sin(th), rel=1e-15)
    cl = ModelSpec(K.CLASSICAL_LANGEVIN, d=1, lam=1.0, sigma=np.sqrt(2), potential=Potential.quadratic([0.5]))
    assert stationary_density(cl, [1.0, 2.0]) == pytest.approx(np.exp(-0.5 - 2.0))


def test_basic_fiber_density_exponent_scales_with_dimension():
    spec = ModelSpec(K.BASIC_FIBER_AMBIENT, d=3, potential=Potential.squared_norm(3))
    assert stationary_density(spec, [1.0, 0, 0, 0, 0, 1]) == pytest.approx(np.exp(-2.0))
    assert stationary_law(spec).supports[3:] == (FREE,) * 3


@pytest.mark.parametrize("kind", [K.SPHERICAL_BM_LOCAL, K.SMOOTH_FIBER_AMBIENT, K.SMOOTH_FIBER_LOCAL,
                                  K.CYLINDER_SV_LOCAL, K.GEOMETRIC_LANGEVIN_AMBIENT])
def test_no_known_stationary(kind):
    with pytest.raises(NoKnownStationary):
        stationary_law(ModelSpec(kind))


@given(st.floats(0, 2 * np.pi), st.floats(0.01, np.pi - 0.01), st.floats(-5, 5), st.floats(-5, 5))
@settings(max_examples=50, deadline=None)
def test_density_nonnegative(t1, t2, a, b):
    spec = ModelSpec(K.SPHERICAL_LANGEVIN_LOCAL, potential=Potential.linear(2))
    assert stationary_density(spec, [t1, t2, a, b]) >= 0


def _rejection_sample_sphere_sv(n, seed):
    """Independent sampler: θ₁, α uniform; θ₂ ∝ sinθ₂ by rejection."""
    gen = np.random.default_rng(seed)
    th2 = np.empty(0)
    while th2.size < n:
        u = gen.uniform(0, np.pi, 2 * n)
        th2 = np.concatenate([th2, u[gen.uniform(size=u.size) < np.sin(u)]])
    return np.column_stack([gen.uniform(0, 2 * np.pi, n), th2[:n], gen.uniform(0, 2 * np.pi, n)])


def test_stationary_test_on_exact_draws():
    spec = ModelSpec(K.SPHERE_SV_LOCAL)
    X = _rejection_sample_sphere_sv(1_000_000, 11)
    rep = stationary_test([X], spec, {"theta_1": 50, "theta_2": 50, "alpha": 50})
    assert rep.tv_distance < 0.01
    assert rep.passed


def test_stationary_test_gaussian_velocity_marginals():
    # exact draws from the ν-form law with Φ=0: ν ~ N(0, σ²/(2λ)), θ₂ ∝ sinθ₂
    spec = ModelSpec(K.SPHERICAL_LANGEVIN_LOCAL_NU, lam=1.0, sigma=1.0)
    base = _rejection_sample_sphere_sv(1_000_000, 12)
    gen = np.random.default_rng(13)
    X = np.column_stack([base[:, :2], gen.normal(scale=np.sqrt(0.5), size=(base.shape[0], 2))])
    rep = stationary_test([X], spec, {"theta_2": 50, "nu_1": 50, "nu_2": 50})
    assert rep.passed
    for m in rep.marginals:
        if m.name.startswith("nu"):
            assert 0.475 <= m.sample_var <= 0.525


def test_stationary_test_detects_wrong_law():
    spec = ModelSpec(K.SPHERE_SV_LOCAL)
    gen = np.random.default_rng(3)
    X = np.column_stack([gen.uniform(0, 2 * np.pi, 10 ** 5), gen.uniform(0.01, np.pi - 0.01, 10 ** 5),
                         gen.uniform(0, 2 * np.pi, 10 ** 5)])
    rep = stationary_test([X], spec, {"theta_2": 50})
    assert not rep.passed
    assert rep.tv_distance > 0.1


def test_insufficient_samples():
    with pytest.raises(InsufficientSamples):
        stationary_test([np.zeros((10, 3)) + 1.0], ModelSpec(K.SPHERE_SV_LOCAL), {"theta_2": 10})


def test_batch_means_ess():
    gen = np.random.default_rng(0)
    iid = gen.normal(size=100_000)
    assert 0.7 < batch_means_ess(iid) / iid.size < 1.3
    ar = np.zeros(100_000)
    for i in range(1, ar.size):
        ar[i] = 0.9 * ar[i - 1] + gen.normal()
    # AR(1) with coefficient 0.9: integrated autocorrelation time 19
    assert 0.6 < batch_means_ess(ar) / (ar.size / 19) < 1.4


def test_collect_samples_burn_in():
    schema = get_model(K.CLASSICAL_LANGEVIN).schema(ModelSpec(K.CLASSICAL_LANGEVIN, d=1))
    tr = Trajectory(schema, np.arange(10.0), np.arange(20.0).reshape(10, 2), 0, Diagnostics())
    out = collect_samples([tr], burn_in=0.2)
    assert out[0].shape == (8, 2)


def test_infinitesimal_stationarity_sphere_sv():
    spec = ModelSpec(K.SPHERE_SV_LOCAL, r=1.2, sigma=0.8, potential=Potential.linear(2, 0.5))
    fs = [trig_product([1, 0, 1], [0, 0, 0]), trig_product([0, 2, 1], [0.3, 0, 0.5]),
          trig_product([1, 1, 0], [0, 1, 0]), trig_product([0, 1, 2], [0, 0, 0.7]),
          trig_product([2, 1, 1], [0.2, 0.1, 0])]
    for num, den in infinitesimal_stationarity(spec, fs):
        assert den > 0
        assert abs(num) < 1e-4 * den


def test_infinitesimal_stationarity_nu_general_sigma():
    # σ² ≠ 2λ and a non-trivial potential: the exponent must be 2λΦ/σ²
    spec = ModelSpec(K.SPHERICAL_LANGEVIN_LOCAL_NU, lam=0.7, sigma=1.6, potential=Potential.linear(2))
    fs = [monomial([0, 0, 2, 0]), monomial([0, 0, 1, 1]),
          from_callable(lambda x: np.cos(x[..., 1]) * x[..., 3]),
          from_callable(lambda x: np.sin(x[..., 0]) * np.sin(x[..., 1]) * x[..., 2])]
    for num, den in infinitesimal_stationarity(spec, fs, nodes=24):
        assert abs(num) < 1e-4 * den


# weak consistency

def test_weak_constant():
    rep = weak_consistency(ModelSpec(K.CLASSICAL_LANGEVIN, d=1), constant(2.0), [0.0, 1.0], 1e-3, 1000, 0)
    assert rep.mc_slope == 0.0 and rep.analytic_Lf == 0.0 and rep.passed


def test_weak_classical_velocity():
    spec = ModelSpec(K.CLASSICAL_LANGEVIN, d=1, lam=1.0)
    rep = weak_consistency(spec, coordinate(1, 2), [0.0, 1.0], 1e-3, 1_000_000, 5, control_variate=False)
    assert rep.analytic_Lf == pytest.approx(-1.0)
    assert abs(rep.mc_slope + 1.0) < 3 * rep.stderr
    assert rep.passed


def test_weak_nu_on_equator():
    spec = ModelSpec(K.SPHERICAL_LANGEVIN_LOCAL_NU, lam=1.0)
    x = [0.5, np.pi / 2, 0.4, 0.0]
    assert generator_apply(spec, coordinate(2, 4), x) == pytest.approx(-0.4, abs=1e-14)
    rep = weak_consistency(spec, coordinate(2, 4), x, 1e-3, 200_000, 2)
    assert rep.passed


def test_weak_detects_wrong_generator():
    # a drift error of 0.1 in the ν₂ equation is far outside the bound
    spec = ModelSpec(K.SPHERICAL_LANGEVIN_LOCAL_NU)
    f = coordinate(3, 4)
    x = np.array([0.5, 1.0, 0.2, 0.1])
    rep = weak_consistency(spec, f, x, 1e-3, 200_000, 2)
    assert abs(rep.mc_slope - (rep.analytic_Lf + 0.1)) > rep.tolerance


# conserved monitor

def _traj(states, times):
    return Trajectory(None, times, states, 0, Diagnostics())


def test_monitor_exact_great_circle():
    spec = ModelSpec(K.SPHERICAL_VELOCITY_AMBIENT, sigma=0.0)
    t = np.linspace(0, 5, 200)
    u, v = np.array([1.0, 0, 0]), np.array([0, 0.6, 0.8])
    xi = np.cos(t)[:, None] * u + np.sin(t)[:, None] * v
    om = -np.sin(t)[:, None] * u + np.cos(t)[:, None] * v
    rep = conserved_monitor(spec, _traj(np.hstack([xi, om]), t), invariant_tol=1e-12)
    assert rep["max_residual"] < 1e-14
    assert rep["invariants"]["angular_momentum_drift"] < 1e-14
    assert rep["passed"]


def test_monitor_cylinder_helix():
    from geolangevin.integrators import Scheme, SimConfig, simulate
    spec = ModelSpec(K.SPHERICAL_VELOCITY_AMBIENT, sigma=0.0, manifold=geo.cylinder(1.0))
    x0 = np.array([1.0, 0, 0, 0, 0.6, 0.8])
    tr = simulate(spec, SimConfig(dt=1e-3, steps=2000, stride=10, scheme=Scheme.HEUN), x0)[0]
    rep = conserved_monitor(spec, tr, invariant_tol=1e-8)
    assert rep["passed"], rep
    # the helix: ξ₃ grows linearly at rate ω₃
    np.testing.assert_allclose(tr.states[:, 2], 0.8 * tr.times, atol=1e-10)
    local = ModelSpec(K.CYLINDER_SV_LOCAL, sigma=0.0, r=1.0)
    trl = simulate(local, SimConfig(dt=1e-3, steps=2000, stride=10, scheme=Scheme.EULER_MARUYAMA),
                   np.array([0.0, 0.0, np.arcsin(0.8)]))[0]
    rep = conserved_monitor(local, trl, invariant_tol=1e-8)
    assert rep["passed"], rep


def test_monitor_flags_residual_growth():
    from geolangevin.integrators import Repair, SimConfig, simulate
    spec = ModelSpec(K.SPHERICAL_VELOCITY_AMBIENT, sigma=1.0)
    base = dict(dt=1e-2, steps=300, stride=1, seed=4)
    off = simulate(spec, SimConfig(**base, repair=Repair.OFF))[0]
    on = simulate(spec, SimConfig(**base))[0]
    assert not conserved_monitor(spec, off)["passed"]
    assert conserved_monitor(spec, on)["passed"]
