"""Model parameter containers."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Callable

import numpy as np

from .. import charts as ch
from .. import geometry as geo
from ..errors import ConfigError
from ..potentials import Potential
from .catalog import ModelKind


@dataclass(frozen=True)
class Interaction:
    """Pair potential U(s) of the distance s, stored via U and U'(s)/s.

    ``min_distance`` is the smallest admissible distance; pairs closer than
    this raise ParticleCollision.  Interactions smooth at the origin
    (``quadratic``) use 0.
    """

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    dvalue_over_s: Callable[[np.ndarray], np.ndarray]
    min_distance: float = 1e-12
    params: tuple[tuple[str, float], ...] = ()

    @classmethod
    def none(cls) -> "Interaction":
        return cls("none", np.zeros_like, np.zeros_like, 0.0)

    @classmethod
    def quadratic(cls, strength: float = 1.0) -> "Interaction":
        c = float(strength)
        return cls("quadratic", lambda s: c * s * s, lambda s: np.full_like(s, 2 * c), 0.0,
                   (("strength", c),))

    @classmethod
    def morse(cls, c_rep: float, l_rep: float, c_att: float, l_att: float) -> "Interaction":
        """U(s) = C_r e^{−s/l_r} − C_a e^{−s/l_a}."""
        def value(s):
            return c_rep * np.exp(-s / l_rep) - c_att * np.exp(-s / l_att)

        def dvs(s):
            return (-c_rep / l_rep * np.exp(-s / l_rep) + c_att / l_att * np.exp(-s / l_att)) / s

        return cls("morse", value, dvs, 1e-12,
                   (("c_rep", c_rep), ("l_rep", l_rep), ("c_att", c_att), ("l_att", l_att)))

    @classmethod
    def inverse_power(cls, strength: float, power: float) -> "Interaction":
        """U(s) = c / s^p, singular at the origin."""
        c, p = float(strength), float(power)
        return cls("inverse_power", lambda s: c * s ** -p, lambda s: -p * c * s ** (-p - 2), 1e-12,
                   (("strength", c), ("power", p)))

    @classmethod
    def from_config(cls, block: dict[str, Any] | None) -> "Interaction":
        if not block:
            return cls.none()
        kind = block.get("kind", "none")
        if kind == "none":
            return cls.none()
        if kind == "quadratic":
            return cls.quadratic(block.get("strength", 1.0))
        if kind == "morse":
            return cls.morse(block["c_rep"], block["l_rep"], block["c_att"], block["l_att"])
        if kind == "inverse_power":
            return cls.inverse_power(block["strength"], block["power"])
        raise ConfigError(f"unknown interaction kind {kind!r}")

    def to_config(self) -> dict[str, Any]:
        return {"kind": self.name, **dict(self.params)}


SWARM_FORMS = ("ambient", "planar")


@dataclass(frozen=True)
class SwarmSpec:
    """K particles at speed r; ``form`` selects the ambient or planar angle SDE.

    ``smooth`` adds the second-order angular velocity μ per particle (ambient
    form only) with friction ``lam``.
    """

    K: int
    roosting: Potential = field(default_factory=Potential.zero)
    interaction: Interaction = field(default_factory=Interaction.none)
    r: float = 1.0
    sigma: float = 1.0
    d: int = 2
    form: str = "ambient"
    smooth: bool = False
    lam: float = 1.0

    def __post_init__(self) -> None:
        if self.K < 1:
            raise ConfigError("swarm needs at least one particle")
        if self.form not in SWARM_FORMS:
            raise ConfigError(f"swarm form must be one of {SWARM_FORMS}")
        if self.form == "planar" and self.d != 2:
            raise ConfigError("planar swarm form requires d = 2")
        if self.form == "planar" and self.smooth:
            raise ConfigError("smooth swarm variant is available in ambient form only")
        if self.r <= 0 or self.sigma < 0 or self.lam < 0:
            raise ConfigError("swarm needs r > 0, sigma >= 0, lambda >= 0")
        self.roosting.check_dim(self.d)


_SPHERE_LOCAL = {
    ModelKind.SPHERICAL_LANGEVIN_LOCAL,
    ModelKind.SPHERICAL_LANGEVIN_LOCAL_NU,
    ModelKind.SPHERICAL_BM_LOCAL,
    ModelKind.SPHERE_SV_LOCAL,
}


@dataclass(frozen=True)
class ModelSpec:
    """One SDE model with its parameters.

    ``d`` is the Euclidean dimension of the position for the flat and fiber
    kinds; for manifold kinds it is filled in from the manifold or chart.
    Missing manifolds/charts default to the unit sphere S² (or the natural
    chart of the kind).
    """

    kind: ModelKind
    lam: float = 1.0
    sigma: float = 1.0
    r: float = 1.0
    d: int = 2
    potential: Potential = field(default_factory=Potential.zero)
    manifold: geo.ImplicitManifold | None = None
    chart: ch.Chart | None = None
    swarm: SwarmSpec | None = None

    def __post_init__(self) -> None:
        kind = ModelKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if not (self.lam >= 0 and self.sigma >= 0):
            raise ConfigError("lambda and sigma must be nonnegative")
        if not self.r > 0:
            raise ConfigError("r must be positive")
        K = ModelKind
        if kind in (K.GEOMETRIC_LANGEVIN_AMBIENT, K.SPHERICAL_VELOCITY_AMBIENT):
            if self.manifold is None:
                object.__setattr__(self, "manifold", geo.sphere(3))
            object.__setattr__(self, "d", self.manifold.dim)
        elif kind in _SPHERE_LOCAL:
            if self.chart is None:
                object.__setattr__(self, "chart", ch.sphere_chart())
            object.__setattr__(self, "d", 2)
        elif kind == K.CYLINDER_SV_LOCAL:
            if self.chart is None:
                object.__setattr__(self, "chart", ch.cylinder_chart())
            object.__setattr__(self, "d", 2)
        elif kind == K.CIRCLE_LANGEVIN:
            if self.chart is None:
                object.__setattr__(self, "chart", ch.circle_chart())
            object.__setattr__(self, "d", 1)
        elif kind in (K.BASIC_FIBER_2D_ALPHA, K.SMOOTH_FIBER_2D_ALPHA):
            if self.d != 2:
                raise ConfigError(f"{kind.value} is planar (d = 2)")
        elif kind in (K.SMOOTH_FIBER_LOCAL, K.BASIC_FIBER_AMBIENT, K.SMOOTH_FIBER_AMBIENT):
            if self.d < 2:
                raise ConfigError(f"{kind.value} needs d >= 2")
            if kind == K.SMOOTH_FIBER_LOCAL and self.chart is None:
                object.__setattr__(self, "chart", ch.spherical_chart(self.d - 1))
        elif kind == K.CLASSICAL_LANGEVIN:
            if self.d < 1:
                raise ConfigError("classical_langevin needs d >= 1")
        elif kind == K.SWARM:
            if self.swarm is None:
                raise ConfigError("swarm kind requires a swarm block")
            object.__setattr__(self, "d", self.swarm.d)
        if kind != K.SWARM:
            self.potential.check_dim(self.potential_dim)

    @property
    def potential_dim(self) -> int:
        """Dimension of the Euclidean space on which Φ is evaluated."""
        K = ModelKind
        if self.kind in (K.GEOMETRIC_LANGEVIN_AMBIENT, K.SPHERICAL_VELOCITY_AMBIENT):
            return self.manifold.ambient_dim
        if self.kind in _SPHERE_LOCAL or self.kind == K.CYLINDER_SV_LOCAL:
            return 3
        if self.kind == K.CIRCLE_LANGEVIN:
            return 2
        return self.d

    def with_(self, **changes) -> "ModelSpec":
        return replace(self, **changes)
