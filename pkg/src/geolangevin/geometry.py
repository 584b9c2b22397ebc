"""Implicitly defined submanifolds M = {f_1 = ... = f_k = 0} of R^N.

Every routine broadcasts over leading axes so the integrators can evaluate a
whole ensemble at once; public functions also accept a single point.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NoConvergence, OffSphere, RankDeficient
from .potentials import Potential

EPS_CON = 1e-8
TOL_RANK = 1e-10
FD_STEP = 1e-5

ArrayFn = Callable[[np.ndarray], np.ndarray]


class FiniteDifferenceWarning(UserWarning):
    """A constraint or chart falls back to finite-difference derivatives."""


def fd_gradient(fn: ArrayFn, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Central-difference gradient of a scalar field, batched over x[..., :]."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape)
    for i in range(x.shape[-1]):
        e = np.zeros(x.shape[-1])
        e[i] = h
        out[..., i] = (fn(x + e) - fn(x - e)) / (2 * h)
    return out


def fd_jacobian(fn: ArrayFn, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Central-difference Jacobian: result[..., a, i] = ∂fn_a/∂x_i."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.shape[-1]):
        e = np.zeros(x.shape[-1])
        e[i] = h
        cols.append((np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2 * h))
    return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class Constraint:
    """One scalar constraint f with optional analytic gradient and Hessian."""

    value: ArrayFn
    grad: ArrayFn | None = None
    hess: ArrayFn | None = None
    fd_step: float = FD_STEP
    # Set when the Hessian does not depend on ξ; enables cheaper forms ω·Hω.
    hess_const: np.ndarray | None = None

    @property
    def uses_fd(self) -> bool:
        return self.grad is None or self.hess is None

    def gradient(self, x: np.ndarray) -> np.ndarray:
        if self.grad is not None:
            return self.grad(x)
        return fd_gradient(self.value, x, self.fd_step)

    def hessian(self, x: np.ndarray) -> np.ndarray:
        if self.hess is not None:
            return self.hess(x)
        h = fd_jacobian(self.gradient, x, self.fd_step)
        return 0.5 * (h + np.swapaxes(h, -1, -2))


@dataclass(frozen=True)
class ImplicitManifold:
    name: str
    ambient_dim: int
    constraints: tuple[Constraint, ...]
    # Parameters of built-ins, kept for config echo and closed-form shortcuts.
    params: tuple[tuple[str, float], ...] = ()

    def __post_init__(self) -> None:
        if self.ambient_dim - len(self.constraints) < 1:
            raise ValueError("manifold dimension N - k must be at least 1")
        if self.uses_fd:
            warnings.warn(f"manifold {self.name!r} uses finite-difference constraint derivatives",
                          FiniteDifferenceWarning, stacklevel=3)

    @property
    def codim(self) -> int:
        return len(self.constraints)

    @property
    def dim(self) -> int:
        return self.ambient_dim - self.codim

    @property
    def uses_fd(self) -> bool:
        return any(c.uses_fd for c in self.constraints)

    def param(self, key: str, default: float | None = None) -> float | None:
        return dict(self.params).get(key, default)

    def values(self, xi: np.ndarray) -> np.ndarray:
        """Constraint values, shape (..., k)."""
        if not self.constraints:
            return np.zeros(np.shape(xi)[:-1] + (0,))
        if len(self.constraints) == 1:
            return self.constraints[0].value(xi)[..., None]
        return np.stack([c.value(xi) for c in self.constraints], axis=-1)

    def gradients(self, xi: np.ndarray) -> np.ndarray:
        """Unchecked Jacobian, shape (..., k, N)."""
        if not self.constraints:
            return np.zeros(np.shape(xi)[:-1] + (0, self.ambient_dim))
        if len(self.constraints) == 1:
            return self.constraints[0].gradient(xi)[..., None, :]
        return np.stack([c.gradient(xi) for c in self.constraints], axis=-2)

    def hessian_forms(self, xi: np.ndarray, omega: np.ndarray) -> np.ndarray:
        """Quadratic forms ω·∇²f_j(ξ)ω, shape (..., k)."""
        cols = []
        for c in self.constraints:
            if c.hess_const is not None:
                cols.append(np.einsum("...i,ij,...j->...", omega, c.hess_const, omega))
            else:
                cols.append(np.einsum("...i,...ij,...j->...", omega, c.hessian(xi), omega))
        if not cols:
            return np.zeros(np.shape(xi)[:-1] + (0,))
        return np.stack(cols, axis=-1)

    def hessians(self, xi: np.ndarray) -> np.ndarray:
        """Constraint Hessians, shape (..., k, N, N)."""
        n = self.ambient_dim
        if not self.constraints:
            return np.zeros(np.shape(xi)[:-1] + (0, n, n))
        if len(self.constraints) == 1:
            return self.constraints[0].hessian(xi)[..., None, :, :]
        return np.stack([c.hessian(xi) for c in self.constraints], axis=-3)


# built-in manifolds

def _const_hessian(mat: np.ndarray) -> ArrayFn:
    def hess(x):
        x = np.asarray(x)
        return np.broadcast_to(mat, x.shape[:-1] + mat.shape)
    return hess


def euclidean(d: int) -> ImplicitManifold:
    """The whole space R^d (no constraints, Π = I, F = 0)."""
    return ImplicitManifold("euclidean", d, (), (("d", d),))


def plane(d: int) -> ImplicitManifold:
    """R^d embedded in R^{d+1} as {ξ_{d+1} = 0}."""
    n = d + 1
    e = np.zeros(n)
    e[-1] = 1.0
    con = Constraint(
        value=lambda x: np.asarray(x)[..., -1],
        grad=lambda x: np.broadcast_to(e, np.shape(x)).copy(),
        hess=_const_hessian(np.zeros((n, n))),
        hess_const=np.zeros((n, n)),
    )
    return ImplicitManifold("plane", n, (con,), (("d", d),))


def sphere(ambient_dim: int = 3, radius: float = 1.0) -> ImplicitManifold:
    """S^{N-1}_ρ = {|ξ|² − ρ² = 0}."""
    rho2 = float(radius) ** 2
    con = Constraint(
        value=lambda x: np.einsum("...i,...i->...", x, x) - rho2,
        grad=lambda x: 2.0 * np.asarray(x, dtype=float),
        hess=_const_hessian(2.0 * np.eye(ambient_dim)),
        hess_const=2.0 * np.eye(ambient_dim),
    )
    return ImplicitManifold("sphere", ambient_dim, (con,), (("radius", float(radius)),))


def cylinder(radius: float = 1.0) -> ImplicitManifold:
    """S¹_ρ × R = {ξ₁² + ξ₂² − ρ² = 0} in R³."""
    rho2 = float(radius) ** 2
    h = np.diag([2.0, 2.0, 0.0])

    def grad(x):
        x = np.asarray(x, dtype=float)
        g = 2.0 * x
        g[..., 2] = 0.0
        return g

    con = Constraint(
        value=lambda x: x[..., 0] ** 2 + x[..., 1] ** 2 - rho2,
        grad=grad,
        hess=_const_hessian(h),
        hess_const=h,
    )
    return ImplicitManifold("cylinder", 3, (con,), (("radius", float(radius)),))


def ellipsoid(axes: Sequence[float]) -> ImplicitManifold:
    """{Σ ξ_i²/a_i² − 1 = 0}; the non-symmetric test surface."""
    a2 = np.asarray(axes, dtype=float) ** -2
    con = Constraint(
        value=lambda x: (np.asarray(x) ** 2) @ a2 - 1.0,
        grad=lambda x: 2.0 * np.asarray(x, dtype=float) * a2,
        hess=_const_hessian(np.diag(2.0 * a2)),
        hess_const=np.diag(2.0 * a2),
    )
    return ImplicitManifold("ellipsoid", len(a2), (con,),
                            tuple((f"a{i + 1}", float(a)) for i, a in enumerate(axes)))


MANIFOLDS = {
    "euclidean": euclidean,
    "plane": plane,
    "sphere": sphere,
    "cylinder": cylinder,
    "ellipsoid": ellipsoid,
}


def from_constraints(name: str, ambient_dim: int, values: Sequence[ArrayFn],
                     grads: Sequence[ArrayFn | None] | None = None,
                     hessians: Sequence[ArrayFn | None] | None = None) -> ImplicitManifold:
    """User manifold; missing derivatives fall back to finite differences."""
    k = len(values)
    grads = list(grads) if grads is not None else [None] * k
    hessians = list(hessians) if hessians is not None else [None] * k
    cons = tuple(Constraint(v, g, h) for v, g, h in zip(values, grads, hessians))
    return ImplicitManifold(name, ambient_dim, cons)


# projections and forcing

def _gram_solve(J: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve (J Jᵀ) c = rhs for rhs of shape (..., k) or (..., k, m)."""
    G = J @ np.swapaxes(J, -1, -2)
    if G.shape[-1] == 0:
        return np.zeros_like(rhs)
    if G.shape[-1] == 1:
        if rhs.ndim == J.ndim - 1:
            return rhs / G[..., 0, :]
        return rhs / G
    if rhs.ndim == J.ndim - 1:
        return np.linalg.solve(G, rhs[..., None])[..., 0]
    return np.linalg.solve(G, rhs)


def _check_rank(J: np.ndarray, tol: float = TOL_RANK) -> None:
    if J.shape[-2] == 0:
        return
    G = J @ np.swapaxes(J, -1, -2)
    smallest = np.linalg.eigvalsh(G)[..., 0]
    if np.any(~(smallest > tol)):
        raise RankDeficient(f"smallest eigenvalue of J Jᵀ is {np.min(smallest):.3e} <= {tol:.1e}")


def jacobian(m: ImplicitManifold, xi: np.ndarray, check: bool = True) -> np.ndarray:
    """k×N constraint Jacobian at ξ; raises RankDeficient if rank < k."""
    J = m.gradients(np.asarray(xi, dtype=float))
    if check:
        _check_rank(J)
    return J


def projector_from_jacobian(J: np.ndarray) -> np.ndarray:
    n = J.shape[-1]
    return np.eye(n) - np.swapaxes(J, -1, -2) @ _gram_solve(J, J)


def project_tangent(m: ImplicitManifold, xi: np.ndarray, check: bool = True) -> np.ndarray:
    """Orthogonal projection Π = I − Jᵀ(JJᵀ)⁻¹J onto T_ξM."""
    return projector_from_jacobian(jacobian(m, xi, check))


def tangential_gradient(m: ImplicitManifold, phi: Potential, xi: np.ndarray,
                        check: bool = True) -> np.ndarray:
    """grad_M Φ = Π_M[ξ]∇Φ(ξ)."""
    xi = np.asarray(xi, dtype=float)
    J = jacobian(m, xi, check)
    g = phi.grad(xi)
    return g - np.einsum("...kn,...k->...n", J, _gram_solve(J, np.einsum("...kn,...n->...k", J, g)))


def forcing_from_forms(J: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Jᵀ(JJᵀ)⁻¹q for precomputed Hessian forms q_j = ω·∇²f_j ω."""
    return np.einsum("...kn,...k->...n", J, _gram_solve(J, q))


def forcing_from_parts(J: np.ndarray, H: np.ndarray, omega: np.ndarray) -> np.ndarray:
    return forcing_from_forms(J, np.einsum("...i,...kij,...j->...k", omega, H, omega))


def forcing_term(m: ImplicitManifold, xi: np.ndarray, omega: np.ndarray,
                 check: bool = True) -> np.ndarray:
    """F(ξ,ω) = Jᵀ(JJᵀ)⁻¹(ω·∇²f_j(ξ)ω)_j, the normal force keeping (ξ,ω) on TM."""
    xi = np.asarray(xi, dtype=float)
    J = jacobian(m, xi, check)
    return forcing_from_forms(J, m.hessian_forms(xi, np.asarray(omega, dtype=float)))


def sphere_velocity_projector(omega: np.ndarray, r: float, check: bool = True,
                              tol: float = EPS_CON) -> np.ndarray:
    """Π_{S_r}[ω] = I − ω⊗ω/r²."""
    omega = np.asarray(omega, dtype=float)
    if check:
        dev = np.abs(np.einsum("...i,...i->...", omega, omega) - r * r)
        if np.any(dev > tol):
            raise OffSphere(f"| |ω|² − r² | = {np.max(dev):.3e} exceeds {tol:.1e}")
    n = omega.shape[-1]
    return np.eye(n) - omega[..., :, None] * omega[..., None, :] / (r * r)


def project_to_manifold(m: ImplicitManifold, point: np.ndarray, tol: float = 1e-12,
                        max_iter: int = 50, capture_radius: float = 1.0,
                        return_iterations: bool = False):
    """Newton projection along the normal directions Jᵀc until |f_j| ≤ tol.

    Each iteration solves J Jᵀ c = f for the correction ξ ← ξ − Jᵀc, so the
    point moves only within the normal space at the current iterate.
    """
    x = np.array(point, dtype=float)
    f = m.values(x)
    if np.any(np.abs(f) > capture_radius):
        raise NoConvergence(f"point is outside the capture radius (|f| = {np.max(np.abs(f)):.3e})")
    it = 0
    while np.any(np.abs(f) > tol):
        if it >= max_iter:
            raise NoConvergence(f"Newton projection stalled at |f| = {np.max(np.abs(f)):.3e}")
        J = m.gradients(x)
        x = x - np.einsum("...kn,...k->...n", J, _gram_solve(J, f))
        f = m.values(x)
        it += 1
    return (x, it) if return_iterations else x


@dataclass
class AmbientState:
    """Phase-space point (ξ, ω[, μ]) in embedded coordinates."""

    xi: np.ndarray
    omega: np.ndarray
    mu: np.ndarray | None = None
    time: float = 0.0

    def __post_init__(self) -> None:
        self.xi = np.asarray(self.xi, dtype=float)
        self.omega = np.asarray(self.omega, dtype=float)
        if self.mu is not None:
            self.mu = np.asarray(self.mu, dtype=float)
        if self.time < 0:
            raise ValueError("time must be nonnegative")

    def as_vector(self) -> np.ndarray:
        parts = [self.xi.ravel(), self.omega.ravel()]
        if self.mu is not None:
            parts.append(self.mu.ravel())
        return np.concatenate(parts)


@dataclass(frozen=True)
class Residuals:
    constraint: np.ndarray
    tangency: np.ndarray
    radius: float | None = None
    mu_orthogonality: float | None = None
    mu_unit_speed: float | None = None

    def as_vector(self) -> np.ndarray:
        extra = [v for v in (self.radius, self.mu_orthogonality, self.mu_unit_speed) if v is not None]
        return np.concatenate([self.constraint, self.tangency, np.asarray(extra, dtype=float)])

    def max(self) -> float:
        return float(np.max(self.as_vector()))


def tangency_residuals(m: ImplicitManifold, state: AmbientState, r: float | None = None) -> Residuals:
    """Distances of a state from TM (and from S_rM / the μ-bundle when applicable)."""
    xi, om = state.xi, state.omega
    J = m.gradients(xi)
    radius = None if r is None else float(abs(om @ om - r * r))
    mu_orth = mu_unit = None
    if state.mu is not None:
        mu_orth = float(abs(om @ state.mu))
        mu_unit = float(abs(om @ om - 1.0))
    return Residuals(np.abs(m.values(xi)), np.abs(J @ om), radius, mu_orth, mu_unit)
