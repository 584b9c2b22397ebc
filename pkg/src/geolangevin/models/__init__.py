"""Catalog of SDE models: drift/diffusion fields in ambient and local form."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from ..errors import ChartBoundary, ConfigError, OffManifold
from ..geometry import EPS_CON, AmbientState
from .catalog import CATALOG, INTERVAL, LINE, PERIODIC, Block, KindInfo, ModelKind, Schema
from .fields import (BasicFiber, BasicFiber2D, CircleLangevin, ClassicalLangevin, CylinderSV,
                     GeometricLangevin, Model, SmoothFiber, SmoothFiber2D, SmoothFiberLocal,
                     SphereSV, SphericalBM, SphericalLangevinLocal, SphericalLangevinNu,
                     SphericalVelocity, embed_flat)
from .spec import Interaction, ModelSpec, SwarmSpec
from .swarm import Swarm, effective_gradients, effective_potentials

MODELS: dict[ModelKind, Model] = {m.kind: m for m in (
    ClassicalLangevin(), CircleLangevin(), GeometricLangevin(), SphericalLangevinLocal(),
    SphericalLangevinNu(), SphericalBM(), BasicFiber(), BasicFiber2D(), SmoothFiber(),
    SmoothFiberLocal(), SmoothFiber2D(), SphericalVelocity(), CylinderSV(), SphereSV(), Swarm(),
)}


def get_model(kind: ModelKind | str) -> Model:
    return MODELS[ModelKind(kind)]


@dataclass(frozen=True)
class Fields:
    """Drift and diffusion at one state; ``interpretation`` names the calculus."""

    drift: np.ndarray
    diffusion: np.ndarray
    interpretation: str = "stratonovich"
    ito_equal: bool = False


@dataclass
class LocalState:
    coords: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        self.coords = np.asarray(self.coords, dtype=float)


def _as_batch(state, n: int) -> np.ndarray:
    if isinstance(state, AmbientState):
        x = state.as_vector()
    elif isinstance(state, LocalState):
        x = state.coords
    else:
        x = np.asarray(state, dtype=float)
    if x.shape[-1] != n:
        raise ConfigError(f"state has {x.shape[-1]} coordinates, schema needs {n}")
    return x.reshape(1, n) if x.ndim == 1 else x


def _fields(spec: ModelSpec, X: np.ndarray, single: bool) -> Fields:
    model = get_model(spec.kind)
    a, B = model.fields(spec, X)
    if single:
        a, B = a[0], B[0]
    return Fields(a, B, "stratonovich", model.ito_equal and model.allows_euler(spec))


def ambient_fields(spec: ModelSpec, state, tol: float = EPS_CON) -> Fields:
    """Stratonovich drift and diffusion of an ambient kind at ``state``."""
    model = get_model(spec.kind)
    if not model.is_ambient(spec):
        raise ConfigError(f"{spec.kind.value} is not an ambient model")
    X = _as_batch(state, model.schema(spec).size)
    res = model.residuals(spec, X)
    if res.size and np.max(res) > tol:
        raise OffManifold(f"state is {np.max(res):.3e} away from the state space")
    return _fields(spec, X, np.ndim(getattr(state, "xi", state)) == 1)


def local_fields(spec: ModelSpec, state) -> Fields:
    """Drift and diffusion of a chart-coordinate (or flat) kind at ``state``."""
    model = get_model(spec.kind)
    if model.is_ambient(spec):
        raise ConfigError(f"{spec.kind.value} is an ambient model")
    X = _as_batch(state, model.schema(spec).size)
    if not np.all(model.interior(spec, X)):
        raise ChartBoundary("state is within the chart-boundary guard")
    coords = state.coords if isinstance(state, LocalState) else np.asarray(state)
    return _fields(spec, X, coords.ndim == 1)


def swarm_fields(spec: ModelSpec, states) -> tuple[np.ndarray, np.ndarray]:
    """Per-particle (drift, diffusion), shapes (K, q) and (K, q, m_p)."""
    if spec.kind != ModelKind.SWARM:
        raise ConfigError("swarm_fields needs a swarm model")
    model = MODELS[ModelKind.SWARM]
    X = _as_batch(states, model.schema(spec).size)
    a, B = model.particle_fields(spec, X)
    if np.ndim(states) == 1 or isinstance(states, (AmbientState, LocalState)):
        return a[0], B[0]
    return a, B


def belt_transform(traj, v_b: float, e) -> Any:
    """Belt coordinates γ_t = ξ_t + v_b t e for every position block entry."""
    if not 0.0 <= v_b <= 1.0:
        raise ConfigError("belt speed v_b must lie in [0, 1]")
    e = np.asarray(e, dtype=float)
    if "xi" not in traj.schema.slices:
        raise ConfigError("trajectory has no position block xi")
    sl = traj.schema.slices["xi"]
    width = sl.stop - sl.start
    if width % e.size:
        raise ConfigError("belt direction dimension does not match the position block")
    shift = np.tile(e, width // e.size)
    states = np.array(traj.states, copy=True)
    states[:, sl] += v_b * np.asarray(traj.times)[:, None] * shift
    return replace(traj, states=states)


def state_from_names(spec: ModelSpec, values: dict[str, float]) -> np.ndarray:
    """Flat state from a mapping of coordinate names (missing ones use defaults)."""
    model = get_model(spec.kind)
    schema = model.schema(spec)
    x = model.default_state(spec).copy()
    for k, v in values.items():
        if k not in schema.names:
            raise ConfigError(f"unknown coordinate {k!r} for {spec.kind.value}")
        x[schema.index(k)] = float(v)
    return x


__all__ = [
    "CATALOG", "MODELS", "Block", "Fields", "Interaction", "KindInfo", "LocalState", "Model",
    "ModelKind", "ModelSpec", "Schema", "SwarmSpec", "ambient_fields", "belt_transform",
    "effective_gradients", "effective_potentials", "embed_flat", "get_model", "local_fields",
    "state_from_names", "swarm_fields", "INTERVAL", "LINE", "PERIODIC",
]
