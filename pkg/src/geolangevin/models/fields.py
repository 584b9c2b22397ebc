"""Drift and diffusion fields of every model kind.

All ``fields`` methods take a batch of flat states ``X`` of shape (M, n) and
return ``(drift (M, n), diffusion (M, n, m))``.  Ambient kinds are stored in
Stratonovich form; local kinds have diffusion coefficients that do not
depend on noise-driven coordinates, so their Itô and Stratonovich forms agree.
"""
from __future__ import annotations

import numpy as np

from .. import charts as ch
from .. import geometry as geo
from .catalog import INTERVAL, LINE, PERIODIC, Block, ModelKind, Schema
from .spec import ModelSpec

REPAIR_TOL = 1e-14


def _unit_circle(theta):
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def _perp(theta):
    return np.stack([-np.sin(theta), np.cos(theta)], axis=-1)


def _normalize(v, radius=1.0):
    return v * (radius / np.sqrt(np.einsum("...i,...i->...", v, v)))[..., None]


def _sphere_psi_grad(spec: ModelSpec, theta: np.ndarray) -> np.ndarray:
    if spec.potential.is_zero:
        return np.zeros_like(theta)
    return ch.chart_potential(spec.chart, spec.potential).grad(theta)


_EYES: dict[int, np.ndarray] = {}


def _eye(n: int) -> np.ndarray:
    if n not in _EYES:
        _EYES[n] = np.eye(n)
        _EYES[n].flags.writeable = False
    return _EYES[n]


class Model:
    """Base class; subclasses implement one ModelKind."""

    kind: ModelKind
    ambient = False
    ito_equal = True

    def is_ambient(self, spec: ModelSpec) -> bool:
        return self.ambient

    def allows_euler(self, spec: ModelSpec) -> bool:
        return self.ito_equal

    def schema(self, spec: ModelSpec) -> Schema:
        raise NotImplementedError

    def noise_dim(self, spec: ModelSpec) -> int:
        raise NotImplementedError

    def fields(self, spec: ModelSpec, X: np.ndarray):
        raise NotImplementedError

    def interior(self, spec: ModelSpec, X: np.ndarray) -> np.ndarray:
        """Mask of states strictly inside the chart domain."""
        return np.ones(X.shape[:-1], dtype=bool)

    def residual_names(self, spec: ModelSpec) -> tuple[str, ...]:
        return ()

    def residuals(self, spec: ModelSpec, X: np.ndarray) -> np.ndarray:
        return np.zeros(X.shape[:-1] + (0,))

    def repair(self, spec: ModelSpec, X: np.ndarray) -> np.ndarray:
        return X

    def embed(self, spec: ModelSpec, X: np.ndarray) -> dict[str, np.ndarray]:
        """Ambient coordinates (xi, omega[, mu]) of the states."""
        raise NotImplementedError

    def counterpart(self, spec: ModelSpec) -> ModelSpec | None:
        """Ambient model whose solutions are the images of this one under ``embed``."""
        return None

    def default_state(self, spec: ModelSpec) -> np.ndarray:
        return np.zeros(self.schema(spec).size)


def embed_flat(model: Model, spec: ModelSpec, X: np.ndarray) -> np.ndarray:
    e = model.embed(spec, X)
    return np.concatenate([e[k] for k in ("xi", "omega", "mu") if k in e], axis=-1)


# flat space

class ClassicalLangevin(Model):
    kind = ModelKind.CLASSICAL_LANGEVIN

    def schema(self, spec):
        return Schema((Block.vector("xi", spec.d), Block.vector("omega", spec.d)))

    def noise_dim(self, spec):
        return spec.d

    def fields(self, spec, X):
        d = spec.d
        xi, om = X[:, :d], X[:, d:]
        a = np.concatenate([om, -spec.lam * om - spec.potential.grad(xi)], axis=1)
        B = np.zeros((X.shape[0], 2 * d, d))
        B[:, d:, :] = spec.sigma * np.eye(d)
        return a, B

    def embed(self, spec, X):
        return {"xi": X[:, :spec.d], "omega": X[:, spec.d:]}

    def counterpart(self, spec):
        return ModelSpec(ModelKind.GEOMETRIC_LANGEVIN_AMBIENT, spec.lam, spec.sigma,
                         potential=spec.potential, manifold=geo.euclidean(spec.d))


class CircleLangevin(Model):
    kind = ModelKind.CIRCLE_LANGEVIN

    def schema(self, spec):
        return Schema((Block("alpha", ("alpha",), (PERIODIC,)), Block("v", ("v",), (LINE,))))

    def noise_dim(self, spec):
        return 1

    def fields(self, spec, X):
        alpha, v = X[:, 0], X[:, 1]
        dpsi = _sphere_psi_grad(spec, alpha[:, None])[:, 0]
        a = np.stack([v, -spec.lam * v - dpsi], axis=1)
        B = np.zeros((X.shape[0], 2, 1))
        B[:, 1, 0] = spec.sigma
        return a, B

    def embed(self, spec, X):
        return {"xi": _unit_circle(X[:, 0]), "omega": X[:, 1:2] * _perp(X[:, 0])}

    def counterpart(self, spec):
        return ModelSpec(ModelKind.GEOMETRIC_LANGEVIN_AMBIENT, spec.lam, spec.sigma,
                         potential=spec.potential, manifold=geo.sphere(2))


# ambient manifold kinds

def _manifold_start(m: geo.ImplicitManifold) -> np.ndarray:
    if m.name in ("euclidean", "plane"):
        return np.zeros(m.ambient_dim)
    if m.name in ("sphere", "cylinder"):
        x = np.zeros(m.ambient_dim)
        x[0] = m.param("radius", 1.0)
        return x
    if m.name == "ellipsoid":
        x = np.zeros(m.ambient_dim)
        x[0] = m.param("a1")
        return x
    return geo.project_to_manifold(m, np.ones(m.ambient_dim) / np.sqrt(m.ambient_dim))


def _tangent_unit(m: geo.ImplicitManifold, xi: np.ndarray) -> np.ndarray:
    P = geo.project_tangent(m, xi)
    j = int(np.argmax(np.diag(P)))
    return _normalize(P[:, j])


class GeometricLangevin(Model):
    kind = ModelKind.GEOMETRIC_LANGEVIN_AMBIENT
    ambient = True
    ito_equal = True

    def schema(self, spec):
        n = spec.manifold.ambient_dim
        return Schema((Block.vector("xi", n), Block.vector("omega", n)))

    def noise_dim(self, spec):
        return spec.manifold.ambient_dim

    def _parts(self, spec, X):
        """Position, velocity, Π_M, Π_M∇Φ and F; rank-one shortcut when k = 1."""
        m = spec.manifold
        n = m.ambient_dim
        xi, om = X[:, :n], X[:, n:2 * n]
        g = spec.potential.grad(xi)
        q = m.hessian_forms(xi, om)
        if m.codim == 1:
            nv = m.constraints[0].gradient(xi)
            inv = 1.0 / np.einsum("mi,mi->m", nv, nv)
            F = (q[:, 0] * inv)[:, None] * nv
            Pg = g - (np.einsum("mi,mi->m", nv, g) * inv)[:, None] * nv
            P = _eye(n) - (inv[:, None] * nv)[:, :, None] * nv[:, None, :]
            return n, xi, om, P, Pg, F
        J = m.gradients(xi)
        P = geo.projector_from_jacobian(J)
        F = geo.forcing_from_forms(J, q)
        return n, xi, om, P, np.einsum("mij,mj->mi", P, g), F

    def fields(self, spec, X):
        n, xi, om, P, Pg, F = self._parts(spec, X)
        a = np.concatenate([om, -spec.lam * om - F - Pg], axis=1)
        B = np.zeros((X.shape[0], 2 * n, n))
        B[:, n:, :] = spec.sigma * P
        return a, B

    def residual_names(self, spec):
        k = spec.manifold.codim
        return tuple(f"constraint_{j + 1}" for j in range(k)) + tuple(f"tangency_{j + 1}" for j in range(k))

    def residuals(self, spec, X):
        m = spec.manifold
        n = m.ambient_dim
        xi, om = X[:, :n], X[:, n:2 * n]
        if m.codim == 1:
            tang = np.einsum("mn,mn->m", m.constraints[0].gradient(xi), om)[:, None]
        else:
            tang = np.einsum("mkn,mn->mk", m.gradients(xi), om)
        return np.abs(np.concatenate([m.values(xi), tang], axis=1))

    def repair(self, spec, X):
        m = spec.manifold
        n = m.ambient_dim
        out = X.copy()
        xi = geo.project_to_manifold(m, X[:, :n], tol=REPAIR_TOL)
        om = X[:, n:2 * n]
        out[:, :n] = xi
        if m.codim == 1:
            nv = m.constraints[0].gradient(xi)
            out[:, n:2 * n] = om - (np.einsum("mi,mi->m", nv, om) / np.einsum("mi,mi->m", nv, nv))[:, None] * nv
        else:
            P = geo.projector_from_jacobian(m.gradients(xi))
            out[:, n:2 * n] = np.einsum("mij,mj->mi", P, om)
        return out

    def embed(self, spec, X):
        n = spec.manifold.ambient_dim
        return {"xi": X[:, :n], "omega": X[:, n:2 * n]}

    def default_state(self, spec):
        xi = _manifold_start(spec.manifold)
        return np.concatenate([xi, np.zeros_like(xi)])


class SphericalVelocity(GeometricLangevin):
    kind = ModelKind.SPHERICAL_VELOCITY_AMBIENT
    ito_equal = False

    def fields(self, spec, X):
        # Π_{S_r}[ω]Π_M = Π_M − ω⊗(Π_Mω)/r²
        n, xi, om, P, Pg, F = self._parts(spec, X)
        r2 = spec.r ** 2
        Pom = np.einsum("mij,mj->mi", P, om)
        PS = P - om[:, :, None] * Pom[:, None, :] / r2
        PSg = Pg - np.einsum("mi,mi->m", om, Pg)[:, None] * om / r2
        a = np.concatenate([om, -F - PSg], axis=1)
        B = np.zeros((X.shape[0], 2 * n, n))
        B[:, n:, :] = spec.sigma * PS
        return a, B

    def residual_names(self, spec):
        return super().residual_names(spec) + ("radius",)

    def residuals(self, spec, X):
        n = spec.manifold.ambient_dim
        om = X[:, n:2 * n]
        rad = np.abs(np.einsum("mi,mi->m", om, om) - spec.r ** 2)
        return np.concatenate([super().residuals(spec, X), rad[:, None]], axis=1)

    def repair(self, spec, X):
        out = super().repair(spec, X)
        n = spec.manifold.ambient_dim
        out[:, n:2 * n] = _normalize(out[:, n:2 * n], spec.r)
        return out

    def default_state(self, spec):
        xi = _manifold_start(spec.manifold)
        return np.concatenate([xi, spec.r * _tangent_unit(spec.manifold, xi)])


# fiber lay-down kinds

def _project_out(v, om):
    """(I − ω⊗ω)v for unit ω."""
    return v - np.einsum("mi,mi->m", om, v)[:, None] * om


class BasicFiber(Model):
    kind = ModelKind.BASIC_FIBER_AMBIENT
    ambient = True
    ito_equal = False

    def schema(self, spec):
        return Schema((Block.vector("xi", spec.d), Block.vector("omega", spec.d)))

    def noise_dim(self, spec):
        return spec.d

    def fields(self, spec, X):
        d = spec.d
        xi, om = X[:, :d], X[:, d:2 * d]
        PS = geo.sphere_velocity_projector(om, 1.0, check=False)
        a = np.concatenate([om, -np.einsum("mij,mj->mi", PS, spec.potential.grad(xi))], axis=1)
        B = np.zeros((X.shape[0], 2 * d, d))
        B[:, d:, :] = spec.sigma * PS
        return a, B

    def residual_names(self, spec):
        return ("radius",)

    def residuals(self, spec, X):
        om = X[:, spec.d:2 * spec.d]
        return np.abs(np.einsum("mi,mi->m", om, om) - 1.0)[:, None]

    def repair(self, spec, X):
        out = X.copy()
        out[:, spec.d:2 * spec.d] = _normalize(X[:, spec.d:2 * spec.d])
        return out

    def embed(self, spec, X):
        d = spec.d
        return {"xi": X[:, :d], "omega": X[:, d:2 * d]}

    def default_state(self, spec):
        x = np.zeros(2 * spec.d)
        x[spec.d] = 1.0
        return x


class SmoothFiber(Model):
    kind = ModelKind.SMOOTH_FIBER_AMBIENT
    ambient = True
    ito_equal = False

    def schema(self, spec):
        d = spec.d
        return Schema((Block.vector("xi", d), Block.vector("omega", d), Block.vector("mu", d)))

    def noise_dim(self, spec):
        return spec.d

    def fields(self, spec, X):
        d = spec.d
        xi, om, mu = X[:, :d], X[:, d:2 * d], X[:, 2 * d:]
        g = spec.potential.grad(xi)
        PS = geo.sphere_velocity_projector(om, 1.0, check=False)
        mu_g = np.einsum("mi,mi->m", mu, g)
        mu2 = np.einsum("mi,mi->m", mu, mu)
        a = np.concatenate([
            om,
            -np.einsum("mij,mj->mi", PS, g) + mu,
            (mu_g - mu2)[:, None] * om - spec.lam * mu,
        ], axis=1)
        B = np.zeros((X.shape[0], 3 * d, d))
        B[:, 2 * d:, :] = spec.sigma * PS
        return a, B

    def residual_names(self, spec):
        return ("radius", "mu_orthogonality")

    def residuals(self, spec, X):
        d = spec.d
        om, mu = X[:, d:2 * d], X[:, 2 * d:]
        return np.abs(np.stack([np.einsum("mi,mi->m", om, om) - 1.0,
                                np.einsum("mi,mi->m", om, mu)], axis=1))

    def repair(self, spec, X):
        d = spec.d
        out = X.copy()
        om = _normalize(X[:, d:2 * d])
        out[:, d:2 * d] = om
        out[:, 2 * d:] = _project_out(X[:, 2 * d:], om)
        return out

    def embed(self, spec, X):
        d = spec.d
        return {"xi": X[:, :d], "omega": X[:, d:2 * d], "mu": X[:, 2 * d:]}

    def default_state(self, spec):
        x = np.zeros(3 * spec.d)
        x[spec.d] = 1.0
        return x


class BasicFiber2D(Model):
    kind = ModelKind.BASIC_FIBER_2D_ALPHA

    def schema(self, spec):
        return Schema((Block.vector("xi", 2), Block("theta", ("theta",), (PERIODIC,))))

    def noise_dim(self, spec):
        return 1

    def fields(self, spec, X):
        th = X[:, 2]
        g = spec.potential.grad(X[:, :2])
        a = np.concatenate([_unit_circle(th), -np.einsum("mi,mi->m", _perp(th), g)[:, None]], axis=1)
        B = np.zeros((X.shape[0], 3, 1))
        B[:, 2, 0] = spec.sigma
        return a, B

    def embed(self, spec, X):
        return {"xi": X[:, :2], "omega": _unit_circle(X[:, 2])}

    def counterpart(self, spec):
        return ModelSpec(ModelKind.BASIC_FIBER_AMBIENT, spec.lam, spec.sigma, d=2, potential=spec.potential)


class SmoothFiber2D(Model):
    kind = ModelKind.SMOOTH_FIBER_2D_ALPHA

    def schema(self, spec):
        return Schema((Block.vector("xi", 2), Block("theta", ("theta",), (PERIODIC,)),
                       Block("nu", ("nu",), (LINE,))))

    def noise_dim(self, spec):
        return 1

    def fields(self, spec, X):
        th, nu = X[:, 2], X[:, 3]
        g = spec.potential.grad(X[:, :2])
        a = np.concatenate([
            _unit_circle(th),
            (-np.einsum("mi,mi->m", _perp(th), g) + nu)[:, None],
            (-spec.lam * nu)[:, None],
        ], axis=1)
        B = np.zeros((X.shape[0], 4, 1))
        B[:, 3, 0] = spec.sigma
        return a, B

    def embed(self, spec, X):
        th = X[:, 2]
        return {"xi": X[:, :2], "omega": _unit_circle(th), "mu": X[:, 3:4] * _perp(th)}

    def counterpart(self, spec):
        return ModelSpec(ModelKind.SMOOTH_FIBER_AMBIENT, spec.lam, spec.sigma, d=2, potential=spec.potential)


class SmoothFiberLocal(Model):
    kind = ModelKind.SMOOTH_FIBER_LOCAL

    def schema(self, spec):
        d = spec.d
        kinds = (PERIODIC,) + (INTERVAL,) * (d - 2)
        return Schema((Block.vector("xi", d),
                       Block("theta", tuple(f"theta_{j + 1}" for j in range(d - 1)), kinds),
                       Block.vector("nu", d - 1)))

    def noise_dim(self, spec):
        return spec.d - 1

    def interior(self, spec, X):
        return spec.chart.interior_mask(X[:, spec.d:2 * spec.d - 1])

    def fields(self, spec, X):
        d = spec.d
        xi, th, nu = X[:, :d], X[:, d:2 * d - 1], X[:, 2 * d - 1:]
        tau, frame, sg, delta = ch.frame_derivatives(d - 1, th)
        gn = np.einsum("ma,maj->mj", spec.potential.grad(xi), frame)     # ∇Φ·n_j
        dnu = (np.einsum("minj,mi,mn->mj", delta, gn, nu)
               - np.einsum("minj,mi,mn->mj", delta, nu, nu)
               - spec.lam * nu)
        a = np.concatenate([tau, sg * (nu - gn), dnu], axis=1)
        B = np.zeros((X.shape[0], 3 * d - 2, d - 1))
        B[:, 2 * d - 1:, :] = spec.sigma * np.eye(d - 1)
        return a, B

    def embed(self, spec, X):
        d = spec.d
        tau, frame = ch.spherical_parametrization(d - 1, X[:, d:2 * d - 1], eps=0.0)
        return {"xi": X[:, :d], "omega": tau, "mu": np.einsum("maj,mj->ma", frame, X[:, 2 * d - 1:])}

    def counterpart(self, spec):
        return ModelSpec(ModelKind.SMOOTH_FIBER_AMBIENT, spec.lam, spec.sigma, d=spec.d, potential=spec.potential)

    def default_state(self, spec):
        d = spec.d
        x = np.zeros(3 * d - 2)
        x[d + 1:2 * d - 1] = np.pi / 2
        return x


# spherical chart kinds on S²

_THETA = Block("theta", ("theta_1", "theta_2"), (PERIODIC, INTERVAL))


class _SphereLocal(Model):
    def interior(self, spec, X):
        return np.sin(X[:, 1]) > ch.EPS_CHART

    def default_state(self, spec):
        x = np.zeros(self.schema(spec).size)
        x[1] = np.pi / 2
        return x


class SphericalLangevinLocal(_SphereLocal):
    kind = ModelKind.SPHERICAL_LANGEVIN_LOCAL

    def schema(self, spec):
        return Schema((_THETA, Block.vector("kappa", 2)))

    def noise_dim(self, spec):
        return 2

    def fields(self, spec, X):
        th2, k1, k2 = X[:, 1], X[:, 2], X[:, 3]
        s, c = np.sin(th2), np.cos(th2)
        dpsi = _sphere_psi_grad(spec, X[:, :2])
        a = np.stack([
            k1, k2,
            -spec.lam * k1 - 2 * (c / s) * k1 * k2 - dpsi[:, 0] / s ** 2,
            -spec.lam * k2 + s * c * k1 ** 2 - dpsi[:, 1],
        ], axis=1)
        B = np.zeros((X.shape[0], 4, 2))
        B[:, 2, 0] = spec.sigma / s
        B[:, 3, 1] = spec.sigma
        return a, B

    def embed(self, spec, X):
        th = X[:, :2]
        return {"xi": spec.chart.tau(th), "omega": np.einsum("mai,mi->ma", spec.chart.dtau(th), X[:, 2:])}

    def counterpart(self, spec):
        return ModelSpec(ModelKind.GEOMETRIC_LANGEVIN_AMBIENT, spec.lam, spec.sigma,
                         potential=spec.potential, manifold=geo.sphere(3))


class SphericalLangevinNu(SphericalLangevinLocal):
    kind = ModelKind.SPHERICAL_LANGEVIN_LOCAL_NU

    def schema(self, spec):
        return Schema((_THETA, Block.vector("nu", 2)))

    def fields(self, spec, X):
        th2, n1, n2 = X[:, 1], X[:, 2], X[:, 3]
        s = np.sin(th2)
        cot = np.cos(th2) / s
        dpsi = _sphere_psi_grad(spec, X[:, :2])
        a = np.stack([
            n1 / s, n2,
            -spec.lam * n1 - cot * n1 * n2 - dpsi[:, 0] / s,
            -spec.lam * n2 + cot * n1 ** 2 - dpsi[:, 1],
        ], axis=1)
        B = np.zeros((X.shape[0], 4, 2))
        B[:, 2, 0] = spec.sigma
        B[:, 3, 1] = spec.sigma
        return a, B

    def embed(self, spec, X):
        tau, frame = ch.spherical_parametrization(2, X[:, :2], eps=0.0)
        return {"xi": tau, "omega": np.einsum("maj,mj->ma", frame, X[:, 2:])}


class SphericalBM(_SphereLocal):
    kind = ModelKind.SPHERICAL_BM_LOCAL

    def schema(self, spec):
        return Schema((_THETA,))

    def noise_dim(self, spec):
        return 2

    def fields(self, spec, X):
        th2 = X[:, 1]
        s = np.sin(th2)
        a = np.stack([np.zeros_like(th2), 0.5 * spec.sigma ** 2 * np.cos(th2) / s], axis=1)
        B = np.zeros((X.shape[0], 2, 2))
        B[:, 0, 0] = spec.sigma / s
        B[:, 1, 1] = spec.sigma
        return a, B

    def embed(self, spec, X):
        return {"xi": spec.chart.tau(X[:, :2])}


class SphereSV(_SphereLocal):
    kind = ModelKind.SPHERE_SV_LOCAL

    def schema(self, spec):
        return Schema((_THETA, Block("alpha", ("alpha",), (PERIODIC,))))

    def noise_dim(self, spec):
        return 1

    def fields(self, spec, X):
        th2, al = X[:, 1], X[:, 2]
        r = spec.r
        s, c = np.sin(th2), np.cos(th2)
        ca, sa = np.cos(al), np.sin(al)
        dpsi = _sphere_psi_grad(spec, X[:, :2])
        a = np.stack([
            r * ca / s,
            r * sa,
            r * ca * c / s + (sa / s) * dpsi[:, 0] / r - ca * dpsi[:, 1] / r,
        ], axis=1)
        B = np.zeros((X.shape[0], 3, 1))
        B[:, 2, 0] = spec.sigma / r
        return a, B

    def embed(self, spec, X):
        tau, frame = ch.spherical_parametrization(2, X[:, :2], eps=0.0)
        w = spec.r * _unit_circle(X[:, 2])
        return {"xi": tau, "omega": np.einsum("maj,mj->ma", frame, w)}

    def counterpart(self, spec):
        return ModelSpec(ModelKind.SPHERICAL_VELOCITY_AMBIENT, sigma=spec.sigma, r=spec.r,
                         potential=spec.potential, manifold=geo.sphere(3))


class CylinderSV(Model):
    kind = ModelKind.CYLINDER_SV_LOCAL

    def schema(self, spec):
        return Schema((Block("alpha", ("alpha",), (PERIODIC,)), Block("xi_3", ("xi_3",), (LINE,)),
                       Block("theta", ("theta",), (PERIODIC,))))

    def noise_dim(self, spec):
        return 1

    def fields(self, spec, X):
        r = spec.r
        th = X[:, 2]
        dpsi = _sphere_psi_grad(spec, X[:, :2])
        # The angle drift carries a minus sign: it is the planar fiber form
        # −τ⊥·∇Ψ rescaled by 1/r (checked against the ambient equation).
        a = np.concatenate([r * _unit_circle(th),
                            (-np.einsum("mi,mi->m", _perp(th), dpsi) / r)[:, None]], axis=1)
        B = np.zeros((X.shape[0], 3, 1))
        B[:, 2, 0] = spec.sigma / r
        return a, B

    def embed(self, spec, X):
        al, th = X[:, 0], X[:, 2]
        xi = np.stack([np.cos(al), np.sin(al), X[:, 1]], axis=1)
        om = spec.r * np.stack([-np.cos(th) * np.sin(al), np.cos(th) * np.cos(al), np.sin(th)], axis=1)
        return {"xi": xi, "omega": om}

    def counterpart(self, spec):
        return ModelSpec(ModelKind.SPHERICAL_VELOCITY_AMBIENT, sigma=spec.sigma, r=spec.r,
                         potential=spec.potential, manifold=geo.cylinder(1.0))
