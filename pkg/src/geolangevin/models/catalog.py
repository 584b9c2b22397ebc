"""Model kinds, state schemas and the human-readable catalog."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np

LINE = "line"
PERIODIC = "periodic"
INTERVAL = "interval"


class ModelKind(str, enum.Enum):
    CLASSICAL_LANGEVIN = "classical_langevin"
    CIRCLE_LANGEVIN = "circle_langevin"
    GEOMETRIC_LANGEVIN_AMBIENT = "geometric_langevin_ambient"
    SPHERICAL_LANGEVIN_LOCAL = "spherical_langevin_local"
    SPHERICAL_LANGEVIN_LOCAL_NU = "spherical_langevin_local_nu"
    SPHERICAL_BM_LOCAL = "spherical_bm_local"
    BASIC_FIBER_AMBIENT = "basic_fiber_ambient"
    BASIC_FIBER_2D_ALPHA = "basic_fiber_2d_alpha"
    SMOOTH_FIBER_AMBIENT = "smooth_fiber_ambient"
    SMOOTH_FIBER_LOCAL = "smooth_fiber_local"
    SMOOTH_FIBER_2D_ALPHA = "smooth_fiber_2d_alpha"
    SPHERICAL_VELOCITY_AMBIENT = "spherical_velocity_ambient"
    CYLINDER_SV_LOCAL = "cylinder_sv_local"
    SPHERE_SV_LOCAL = "sphere_sv_local"
    SWARM = "swarm"


@dataclass(frozen=True)
class Block:
    """Named group of state coordinates with per-coordinate domain kinds."""

    name: str
    names: tuple[str, ...]
    kinds: tuple[str, ...]

    @classmethod
    def vector(cls, name: str, n: int, kind: str = LINE, labels: tuple[str, ...] | None = None) -> "Block":
        labels = labels or tuple(f"{name}_{i + 1}" for i in range(n))
        return cls(name, labels, (kind,) * n)

    @property
    def size(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class Schema:
    blocks: tuple[Block, ...]

    @cached_property
    def names(self) -> tuple[str, ...]:
        return tuple(n for b in self.blocks for n in b.names)

    @cached_property
    def kinds(self) -> tuple[str, ...]:
        return tuple(k for b in self.blocks for k in b.kinds)

    @property
    def size(self) -> int:
        return len(self.names)

    @cached_property
    def slices(self) -> dict[str, slice]:
        out, start = {}, 0
        for b in self.blocks:
            out[b.name] = slice(start, start + b.size)
            start += b.size
        return out

    @cached_property
    def periodic(self) -> np.ndarray:
        return np.array([k == PERIODIC for k in self.kinds])

    def index(self, name: str) -> int:
        return self.names.index(name)

    def block(self, x: np.ndarray, name: str) -> np.ndarray:
        return x[..., self.slices[name]]

    def wrap(self, x: np.ndarray) -> np.ndarray:
        """Reduce periodic coordinates to [0, 2π)."""
        if not self.periodic.any():
            return x
        out = np.array(x, dtype=float, copy=True)
        out[..., self.periodic] = np.mod(out[..., self.periodic], 2 * np.pi)
        return out

    def to_dict(self) -> list[dict]:
        return [{"block": b.name, "coords": list(b.names), "domains": list(b.kinds)} for b in self.blocks]


@dataclass(frozen=True)
class KindInfo:
    kind: ModelKind
    ambient: bool
    summary: str
    equation: str
    parameters: tuple[str, ...]


CATALOG: dict[ModelKind, KindInfo] = {k.kind: k for k in (
    KindInfo(ModelKind.CLASSICAL_LANGEVIN, False,
             "classical Langevin equation on R^d x R^d",
             "dxi = omega dt; domega = -lambda omega dt - grad Phi(xi) dt + sigma dW",
             ("lambda", "sigma", "d", "potential")),
    KindInfo(ModelKind.CIRCLE_LANGEVIN, False,
             "Langevin equation on the circle R/2piZ x R",
             "dalpha = v dt; dv = -lambda v dt - dPsi/dalpha dt + sigma dW, Psi(alpha) = Phi(cos alpha, sin alpha)",
             ("lambda", "sigma", "potential")),
    KindInfo(ModelKind.GEOMETRIC_LANGEVIN_AMBIENT, True,
             "geometric Langevin equation on the tangent bundle TM (Stratonovich, Ito-equal)",
             "dxi = omega dt; domega = -lambda omega dt - F(xi,omega) dt - Pi_M grad Phi dt + sigma Pi_M o dW",
             ("lambda", "sigma", "manifold", "potential")),
    KindInfo(ModelKind.SPHERICAL_LANGEVIN_LOCAL, False,
             "geometric Langevin equation on S^2 in spherical chart coordinates (theta, kappa = dtheta/dt)",
             "dkappa1 = (-lambda kappa1 - 2 cot(theta2) kappa1 kappa2 - dPsi/dtheta1 / sin^2 theta2) dt + sigma/sin(theta2) dW1; "
             "dkappa2 = (-lambda kappa2 + sin(theta2)cos(theta2) kappa1^2 - dPsi/dtheta2) dt + sigma dW2",
             ("lambda", "sigma", "potential")),
    KindInfo(ModelKind.SPHERICAL_LANGEVIN_LOCAL_NU, False,
             "geometric Langevin equation on S^2 in orthonormal-frame velocity coordinates nu",
             "dtheta1 = nu1/sin(theta2) dt; dtheta2 = nu2 dt; dnu1 = (-lambda nu1 - cot(theta2) nu1 nu2 - dPsi/dtheta1 / sin theta2) dt + sigma dW1; "
             "dnu2 = (-lambda nu2 + cot(theta2) nu1^2 - dPsi/dtheta2) dt + sigma dW2",
             ("lambda", "sigma", "potential")),
    KindInfo(ModelKind.SPHERICAL_BM_LOCAL, False,
             "Brownian motion on S^2 in spherical chart coordinates",
             "dtheta1 = sigma/sin(theta2) dW1; dtheta2 = (sigma^2/2) cot(theta2) dt + sigma dW2",
             ("sigma",)),
    KindInfo(ModelKind.BASIC_FIBER_AMBIENT, True,
             "basic fiber lay-down model on R^d x S^{d-1} (Stratonovich)",
             "dxi = omega dt; domega = -(I - omega omega^T) grad Phi dt + sigma (I - omega omega^T) o dW",
             ("sigma", "d", "potential")),
    KindInfo(ModelKind.BASIC_FIBER_2D_ALPHA, False,
             "basic fiber lay-down model in the plane, direction angle form",
             "dxi = tau(theta) dt; dtheta = -tau_perp(theta).grad Phi dt + sigma dW",
             ("sigma", "potential")),
    KindInfo(ModelKind.SMOOTH_FIBER_AMBIENT, True,
             "smooth fiber lay-down model on R^d x TS^{d-1} (Stratonovich)",
             "dxi = omega dt; domega = (-(I - omega omega^T) grad Phi + mu) dt; "
             "dmu = ((mu.grad Phi) omega - lambda mu - |mu|^2 omega) dt + sigma (I - omega omega^T) o dW",
             ("lambda", "sigma", "d", "potential")),
    KindInfo(ModelKind.SMOOTH_FIBER_LOCAL, False,
             "smooth fiber lay-down model with the direction in spherical coordinates tau^(d-1)",
             "dxi = tau(theta) dt; dtheta_j = sqrt(g^jj)(nu_j - grad Phi.n_j) dt; "
             "dnu_j = (sum_in Delta_inj (grad Phi.n_i) nu_n - sum_in Delta_inj nu_i nu_n - lambda nu_j) dt + sigma dW_j",
             ("lambda", "sigma", "d", "potential")),
    KindInfo(ModelKind.SMOOTH_FIBER_2D_ALPHA, False,
             "smooth fiber lay-down model in the plane, direction angle form",
             "dxi = tau(theta) dt; dtheta = (-tau_perp(theta).grad Phi + nu) dt; dnu = -lambda nu dt + sigma dW",
             ("lambda", "sigma", "potential")),
    KindInfo(ModelKind.SPHERICAL_VELOCITY_AMBIENT, True,
             "geometric Langevin equation with spherical velocity on S_rM (Stratonovich)",
             "dxi = omega dt; domega = -F(xi,omega) dt - Pi_Sr Pi_M grad Phi dt + sigma Pi_Sr Pi_M o dW",
             ("sigma", "r", "manifold", "potential")),
    KindInfo(ModelKind.CYLINDER_SV_LOCAL, False,
             "spherical-velocity equation on the unit cylinder, coordinates (alpha, xi3, theta)",
             "d(alpha, xi3) = r tau(theta) dt; dtheta = -(1/r) tau_perp(theta).grad Psi(alpha,xi3) dt + (sigma/r) dW",
             ("sigma", "r", "potential")),
    KindInfo(ModelKind.SPHERE_SV_LOCAL, False,
             "spherical-velocity equation on S^2, coordinates (theta1, theta2, alpha)",
             "dtheta1 = r cos(alpha)/sin(theta2) dt; dtheta2 = r sin(alpha) dt; "
             "dalpha = (r cos(alpha) cot(theta2) + (1/r) sin(alpha)/sin(theta2) dPsi/dtheta1 - (1/r) cos(alpha) dPsi/dtheta2) dt + (sigma/r) dW",
             ("sigma", "r", "potential")),
    KindInfo(ModelKind.SWARM, True,
             "self-propelled interacting swarm with roosting potential (ambient or planar angle form)",
             "Psi_i = Phi(xi_i) + (1/K) sum_{j != i} U(|xi_j - xi_i|); dxi_i = omega_i dt; "
             "domega_i = -Pi_Sr[omega_i] grad Psi_i dt + sigma Pi_Sr[omega_i] o dW_i",
             ("sigma", "r", "potential", "swarm")),
)}
