"""Time stepping, noise streams and ensemble simulation.

Noise: trajectory ``i`` of a run with seed ``s`` draws from a Philox
generator keyed by ``SeedSequence([s, i])``.  The stream depends only on
``(s, i)``, so results do not change with ensemble size or chunking.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ChartBoundary, ConfigError, NumericalBlowup, OffManifold
from .geometry import EPS_CON, AmbientState
from .models import Fields, Model, ModelSpec, Schema, get_model

OVERFLOW_GUARD = 1e12
_SEED_LIMIT = 2 ** 64


class Scheme(str, enum.Enum):
    EULER_MARUYAMA = "euler_maruyama"
    HEUN = "heun_stratonovich"


class Repair(str, enum.Enum):
    OFF = "off"
    EVERY_STEP = "project-every-step"
    WHEN_RESIDUAL = "project-when-residual"


@dataclass(frozen=True)
class SimConfig:
    dt: float
    steps: int
    stride: int = 1
    seed: int = 0
    trajectories: int = 1
    repair: Repair = Repair.EVERY_STEP
    repair_threshold: float = 1e-10
    scheme: Scheme = Scheme.HEUN

    def __post_init__(self) -> None:
        object.__setattr__(self, "repair", Repair(self.repair))
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.steps < 1 or self.stride < 1 or self.trajectories < 1:
            raise ConfigError("steps, stride and trajectories must be at least 1")
        if not 0 <= self.seed < _SEED_LIMIT:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if not self.repair_threshold > 0:
            raise ConfigError("repair threshold must be positive")


class NoiseSource:
    """Standard normal stream for one (seed, index) pair."""

    def __init__(self, seed: int, index: int):
        if not 0 <= seed < _SEED_LIMIT:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        self.seed = int(seed)
        self.index = int(index)
        self._gen = np.random.Generator(np.random.Philox(np.random.SeedSequence([self.seed, self.index])))

    def normals(self, *shape: int) -> np.ndarray:
        return self._gen.standard_normal(shape)

    def increments(self, dt: float, *shape: int) -> np.ndarray:
        """Brownian increments ΔW ~ N(0, dt)."""
        return np.sqrt(dt) * self._gen.standard_normal(shape)


def derive_stream(seed: int, index: int) -> NoiseSource:
    return NoiseSource(seed, index)


# single steps

def em_step(fields, state, dt: float, dW, periodic: np.ndarray | None = None) -> np.ndarray:
    """x + b dt + B ΔW; ``periodic`` (boolean mask) wraps those coordinates to [0, 2π)."""
    if isinstance(fields, Fields):
        drift, diffusion = fields.drift, fields.diffusion
    else:
        drift, diffusion = fields
    x = np.asarray(state, dtype=float) + np.asarray(drift) * dt + np.asarray(diffusion) @ np.asarray(dW)
    if periodic is not None and np.any(periodic):
        x = x.copy()
        x[..., periodic] = np.mod(x[..., periodic], 2 * np.pi)
    return x


def _apply(B: np.ndarray, dW: np.ndarray) -> np.ndarray:
    if B.shape[2] == 1:
        return B[:, :, 0] * dW
    return np.einsum("mij,mj->mi", B, dW)


def euler_batch(model: Model, spec: ModelSpec, X: np.ndarray, dt: float, dW: np.ndarray) -> np.ndarray:
    a, B = model.fields(spec, X)
    return X + a * dt + _apply(B, dW)


def heun_batch(model: Model, spec: ModelSpec, X: np.ndarray, dt: float, dW: np.ndarray) -> np.ndarray:
    """Stratonovich Heun: Euler predictor, trapezoidal corrector, shared ΔW."""
    a0, B0 = model.fields(spec, X)
    Xp = X + a0 * dt + _apply(B0, dW)
    a1, B1 = model.fields(spec, Xp)
    return X + 0.5 * (a0 + a1) * dt + 0.5 * _apply(B0 + B1, dW)


STEPPERS = {Scheme.EULER_MARUYAMA: euler_batch, Scheme.HEUN: heun_batch}


def heun_projected_step(spec: ModelSpec, state, dt: float, dW, repair: bool = True):
    """One Heun step of an ambient kind followed by the model's repair map."""
    model = get_model(spec.kind)
    if not model.is_ambient(spec):
        raise ConfigError(f"{spec.kind.value} is not an ambient model")
    if isinstance(state, AmbientState):
        x = state.as_vector()
    else:
        x = np.asarray(state, dtype=float)
    X = heun_batch(model, spec, x[None], dt, np.asarray(dW, dtype=float)[None])
    if repair:
        X = model.repair(spec, X)
    if not isinstance(state, AmbientState):
        return X[0]
    n = state.xi.size
    mu = X[0, 2 * n:3 * n] if state.mu is not None else None
    return AmbientState(X[0, :n].reshape(state.xi.shape), X[0, n:2 * n].reshape(state.omega.shape),
                        mu, state.time + dt)


def step_batch(model: Model, spec: ModelSpec, X: np.ndarray, dt: float, dW: np.ndarray,
               scheme: Scheme, repair: bool) -> np.ndarray:
    X = STEPPERS[Scheme(scheme)](model, spec, X, dt, dW)
    return model.repair(spec, X) if repair else X


# trajectories

@dataclass
class Diagnostics:
    residual_names: tuple[str, ...] = ()
    max_residual: float = 0.0
    # In project-every-step mode this is sampled at output steps only.
    max_residual_before_repair: float = 0.0
    sample_residuals: np.ndarray | None = None
    repairs: int = 0
    events: list[dict] = field(default_factory=list)
    truncated: bool = False
    finite_difference_derivatives: bool = False

    def to_dict(self) -> dict:
        return {
            "residual_names": list(self.residual_names),
            "max_residual": self.max_residual,
            "max_residual_before_repair": self.max_residual_before_repair,
            "repairs": self.repairs,
            "events": self.events,
            "truncated": self.truncated,
            "finite_difference_derivatives": self.finite_difference_derivatives,
        }


@dataclass
class Trajectory:
    """Samples at times 0, stride·dt, 2·stride·dt, ...; angles kept unwrapped."""

    schema: Schema
    times: np.ndarray
    states: np.ndarray
    index: int = 0
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    def wrapped_states(self) -> np.ndarray:
        return self.schema.wrap(self.states)

    def column(self, name: str) -> np.ndarray:
        return self.states[:, self.schema.index(name)]

    def __len__(self) -> int:
        return len(self.times)


def check_initial(model: Model, spec: ModelSpec, X: np.ndarray, tol: float = EPS_CON) -> None:
    res = model.residuals(spec, X)
    if res.size and np.max(res) > tol:
        raise OffManifold(f"initial state is {np.max(res):.3e} away from the state space")
    if not np.all(model.interior(spec, X)):
        raise ChartBoundary("initial state lies within the chart-boundary guard")


def initial_batch(model: Model, spec: ModelSpec, initial, count: int) -> np.ndarray:
    n = model.schema(spec).size
    if initial is None:
        x0 = model.default_state(spec)
    else:
        x0 = initial.as_vector() if isinstance(initial, AmbientState) else np.asarray(initial, dtype=float)
    if x0.shape[-1] != n:
        raise ConfigError(f"initial state has {x0.shape[-1]} coordinates, model needs {n}")
    if x0.ndim == 1:
        return np.tile(x0, (count, 1))
    if x0.shape[0] != count:
        raise ConfigError("one initial state per trajectory required")
    return x0.copy()


class _NoiseBuffer:
    """Per-trajectory streams drawn in chunks of consecutive steps."""

    def __init__(self, streams: Sequence[NoiseSource], m: int, dt: float, steps: int):
        self.streams, self.m, self.scale = streams, m, np.sqrt(dt)
        M = len(streams)
        self.chunk = int(max(1, min(4096, steps, 2_000_000 // max(1, M * m))))
        self.buf = np.empty((M, self.chunk, m))
        self.pos = self.chunk
        self.remaining = steps

    def next(self) -> np.ndarray:
        if self.pos == self.chunk:
            c = min(self.chunk, self.remaining)
            for i, s in enumerate(self.streams):
                self.buf[i, :c] = s.normals(c, self.m)
            self.pos = 0
        self.remaining -= 1
        out = self.buf[:, self.pos] * self.scale
        self.pos += 1
        return out


def simulate(spec: ModelSpec, cfg: SimConfig, initial=None) -> list[Trajectory]:
    """Integrate ``cfg.trajectories`` independent paths as one vectorized ensemble.

    A path that leaves the chart interior is frozen at its last interior
    sample and returned truncated, with a ``chart_boundary`` event.
    """
    model = get_model(spec.kind)
    schema = model.schema(spec)
    if cfg.scheme == Scheme.EULER_MARUYAMA and not model.allows_euler(spec):
        raise ConfigError(f"Euler–Maruyama is not consistent with the Stratonovich form of "
                          f"{spec.kind.value}; use heun_stratonovich")
    M = cfg.trajectories
    X = initial_batch(model, spec, initial, M)
    check_initial(model, spec, X)
    stepper = STEPPERS[cfg.scheme]
    ambient = model.is_ambient(spec)
    nres = len(model.residual_names(spec))
    noise = _NoiseBuffer([derive_stream(cfg.seed, i) for i in range(M)],
                         model.noise_dim(spec), cfg.dt, cfg.steps)

    S = cfg.steps // cfg.stride + 1
    out = np.empty((M, S, schema.size))
    out[:, 0] = X
    sample_res = np.zeros((M, S, nres))
    if nres:
        sample_res[:, 0] = model.residuals(spec, X)
    window = np.zeros((M, nres))
    max_pre = np.zeros(M)
    repairs = np.zeros(M, dtype=np.int64)
    alive = np.ones(M, dtype=bool)
    last = np.zeros(M, dtype=np.int64)          # index of last valid sample
    events: list[list[dict]] = [[] for _ in range(M)]
    dt = cfg.dt
    check_interior = not ambient and not np.all(model.interior(spec, X[:1] * np.nan))

    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        for step in range(1, cfg.steps + 1):
            dW = noise.next()
            Xn = stepper(model, spec, X, dt, dW)
            sampled = step % cfg.stride == 0
            if nres and cfg.repair == Repair.EVERY_STEP:
                if sampled:
                    max_pre = np.maximum(max_pre, np.where(alive, model.residuals(spec, Xn).max(axis=1), 0.0))
                Xn = model.repair(spec, Xn)
                repairs += alive
            elif nres and cfg.repair == Repair.WHEN_RESIDUAL:
                pre = model.residuals(spec, Xn).max(axis=1)
                max_pre = np.maximum(max_pre, np.where(alive, pre, 0.0))
                hit = pre > cfg.repair_threshold
                if hit.any():
                    Xn[hit] = model.repair(spec, Xn[hit])
                    repairs += hit & alive
            if check_interior:
                inside = model.interior(spec, Xn)
                leaving = alive & ~inside
                if leaving.any():
                    for i in np.flatnonzero(leaving):
                        events[i].append({"type": "chart_boundary", "step": step, "time": step * dt})
                    alive &= inside
                    if not alive.any():
                        break
            if all_alive := alive.all():
                ok = np.abs(Xn).max() <= OVERFLOW_GUARD
            else:
                ok = np.abs(Xn[alive]).max() <= OVERFLOW_GUARD
            if not ok:
                bad = alive & ~np.all(np.abs(Xn) <= OVERFLOW_GUARD, axis=1)
                i = int(np.flatnonzero(bad)[0])
                raise NumericalBlowup(f"trajectory {i} exceeded {OVERFLOW_GUARD:g} at step {step}")
            X = Xn if all_alive else np.where(alive[:, None], Xn, X)
            if nres:
                res = model.residuals(spec, X)
                window = np.maximum(window, res if all_alive else np.where(alive[:, None], res, 0.0))
            if sampled:
                k = step // cfg.stride
                out[:, k] = X
                sample_res[:, k] = window
                window[:] = 0.0
                last = np.where(alive, k, last)

    trajs = []
    for i in range(M):
        n_i = int(last[i]) + 1
        res_i = sample_res[i, :n_i]
        diag = Diagnostics(
            residual_names=model.residual_names(spec),
            max_residual=float(res_i.max()) if nres else 0.0,
            max_residual_before_repair=float(max_pre[i]),
            sample_residuals=res_i.max(axis=1) if nres else np.zeros(n_i),
            repairs=int(repairs[i]),
            events=events[i],
            truncated=bool(events[i]),
            finite_difference_derivatives=bool(spec.manifold is not None and spec.manifold.uses_fd),
        )
        times = np.arange(n_i) * (cfg.stride * dt)
        trajs.append(Trajectory(schema, times, out[i, :n_i].copy(), i, diag))
    return trajs
