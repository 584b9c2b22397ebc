"""Closed-form stationary laws and histogram / moment comparisons."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .. import charts as ch
from ..errors import InsufficientSamples, NoKnownStationary
from ..models import INTERVAL, LINE, PERIODIC, ModelKind, ModelSpec, get_model
from .generator import generator_values
from .testfunctions import TestFunction

FREE = "free"   # coordinate on which the density does not depend (uniform factor)


@dataclass(frozen=True)
class StationaryDensity:
    """Unnormalized log-density over the model's own coordinates.

    ``supports`` gives, per coordinate, one of periodic / interval / line /
    free.  ``scales`` are Gaussian-like widths for line coordinates when the
    law fixes them (None when they depend on the potential).
    """

    spec: ModelSpec
    names: tuple[str, ...]
    supports: tuple[str, ...]
    log_density: Callable[[np.ndarray], np.ndarray]
    scales: tuple[float | None, ...] = ()

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return np.exp(self.log_density(np.asarray(X, dtype=float)))


def _require_positive(spec: ModelSpec, *names: str) -> None:
    vals = {"lambda": spec.lam, "sigma": spec.sigma}
    bad = [k for k in names if not vals[k] > 0]
    if bad:
        raise NoKnownStationary(f"stationary law needs positive {', '.join(bad)}")


def stationary_law(spec: ModelSpec) -> StationaryDensity:
    """Known invariant densities (others raise NoKnownStationary).

    Langevin-type kinds use exp(−2λΦ/σ²)·exp(−λ|v|²/σ²); with σ² = 2λ this is
    the familiar exp(−Φ − |v|²/2).
    """
    K = ModelKind
    model = get_model(spec.kind)
    schema = model.schema(spec)
    names, kinds = schema.names, schema.kinds
    lam, sig = spec.lam, spec.sigma

    if spec.kind == K.CLASSICAL_LANGEVIN:
        _require_positive(spec, "lambda", "sigma")
        d = spec.d

        def logp(X):
            return (-2 * lam / sig ** 2 * spec.potential.value(X[:, :d])
                    - lam / sig ** 2 * np.einsum("mi,mi->m", X[:, d:], X[:, d:]))
        vel = sig / np.sqrt(2 * lam)
        return StationaryDensity(spec, names, kinds, logp, (None,) * d + (vel,) * d)

    if spec.kind in (K.SPHERICAL_LANGEVIN_LOCAL_NU, K.SPHERICAL_LANGEVIN_LOCAL):
        _require_positive(spec, "lambda", "sigma")
        pot = ch.chart_potential(spec.chart, spec.potential)
        kappa = spec.kind == K.SPHERICAL_LANGEVIN_LOCAL

        def logp(X):
            s = np.sin(X[:, 1])
            v1 = X[:, 2] * s if kappa else X[:, 2]
            out = (-2 * lam / sig ** 2 * pot.value(X[:, :2])
                   - lam / sig ** 2 * (v1 ** 2 + X[:, 3] ** 2) + np.log(s))
            # κ₁ = ν₁/sinθ₂ contributes the Jacobian sinθ₂ once more
            return out + np.log(s) if kappa else out
        vel = sig / np.sqrt(2 * lam)
        return StationaryDensity(spec, names, kinds, logp, (None, None, None if kappa else vel, vel))

    if spec.kind == K.BASIC_FIBER_AMBIENT:
        d = spec.d

        def logp(X):
            return -(d - 1) * spec.potential.value(X[:, :d])
        return StationaryDensity(spec, names, kinds[:d] + (FREE,) * d, logp, (None,) * (2 * d))

    if spec.kind == K.BASIC_FIBER_2D_ALPHA:
        def logp(X):
            return -spec.potential.value(X[:, :2])
        return StationaryDensity(spec, names, kinds, logp, (None,) * 3)

    if spec.kind == K.SPHERE_SV_LOCAL:
        pot = ch.chart_potential(spec.chart, spec.potential)
        r2 = spec.r ** 2

        def logp(X):
            return -pot.value(X[:, :2]) / r2 + np.log(np.sin(X[:, 1]))
        return StationaryDensity(spec, names, kinds, logp, (None,) * 3)

    raise NoKnownStationary(f"no closed-form stationary law for {spec.kind.value}")


def stationary_density(spec: ModelSpec, state) -> float | np.ndarray:
    """Unnormalized stationary density at one state (float) or a batch."""
    law = stationary_law(spec)
    x = np.asarray(state, dtype=float)
    vals = law(x[None] if x.ndim == 1 else x)
    return float(vals[0]) if x.ndim == 1 else vals


# quadrature helpers

def _nodes(kind: str, lo: float, hi: float, n: int):
    if kind == PERIODIC:
        w = (hi - lo) / n
        return lo + w * (np.arange(n) + 0.5), np.full(n, w)
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1), half * w


def _default_bounds(kind: str) -> tuple[float, float] | None:
    if kind == PERIODIC:
        return 0.0, 2 * np.pi
    if kind == INTERVAL:
        return 0.0, np.pi
    return None


def _tensor_grid(axes):
    pts = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    wts = np.meshgrid(*[a[1] for a in axes], indexing="ij")
    return np.stack([p.ravel() for p in pts], axis=1), np.prod(np.stack([w.ravel() for w in wts]), axis=0)


def _line_bounds(law: StationaryDensity, i: int, samples: np.ndarray | None, width: float = 8.0):
    if law.scales and law.scales[i] is not None:
        return -width * law.scales[i], width * law.scales[i]
    if samples is None:
        raise ValueError(f"bounds for coordinate {law.names[i]!r} must be supplied")
    lo, hi = float(samples[:, i].min()), float(samples[:, i].max())
    pad = 0.5 * (hi - lo)
    return lo - pad, hi + pad


def marginal(law: StationaryDensity, index: int, points: np.ndarray,
             bounds: dict[int, tuple[float, float]], nodes: int = 24) -> np.ndarray:
    """Unnormalized marginal density of one coordinate at ``points``."""
    n = len(law.names)
    others = [j for j in range(n) if j != index and law.supports[j] != FREE]
    axes = [_nodes(law.supports[j], *bounds[j], nodes) for j in others]
    grid, w = _tensor_grid(axes) if axes else (np.zeros((1, 0)), np.ones(1))
    X = np.zeros((grid.shape[0], n))
    X[:, others] = grid
    out = np.empty(len(points))
    for k, p in enumerate(points):
        X[:, index] = p
        out[k] = np.exp(law.log_density(X)) @ w
    return out


# sample statistics

def batch_means_ess(x: np.ndarray) -> float:
    """Effective sample size of a time-ordered chain by nonoverlapping batch means."""
    x = np.asarray(x, dtype=float)
    L = x.size
    b = int(np.floor(np.sqrt(L)))
    a = L // b
    if a < 2:
        return float(L)
    means = x[:a * b].reshape(a, b).mean(axis=1)
    var = x.var()
    var_b = b * means.var(ddof=1)
    if var_b <= 0 or var <= 0:
        return float(L)
    return float(min(L, L * var / var_b))


def collect_samples(trajectories, burn_in: float = 0.2) -> list[np.ndarray]:
    """Post-burn-in states (periodic coordinates wrapped) of each trajectory."""
    out = []
    for tr in trajectories:
        states = tr.wrapped_states()
        start = int(np.ceil(burn_in * len(states)))
        out.append(states[start:])
    return out


@dataclass
class MarginalStats:
    name: str
    tv_distance: float
    ess: float
    sample_mean: float | None = None
    sample_var: float | None = None
    target_mean: float | None = None
    target_var: float | None = None
    var_rel_error: float | None = None
    passed: bool = True


@dataclass
class StationaryReport:
    marginals: list[MarginalStats] = field(default_factory=list)
    n_samples: int = 0
    tv_threshold: float = 0.02
    var_rtol: float | None = None
    passed: bool = True

    @property
    def tv_distance(self) -> float:
        return max((m.tv_distance for m in self.marginals), default=0.0)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "n_samples": self.n_samples,
            "tv_distance": self.tv_distance,
            "tv_threshold": self.tv_threshold,
            "var_rtol": self.var_rtol,
            "marginals": [vars(m) for m in self.marginals],
        }


def stationary_test(samples, spec: ModelSpec, grid: dict[str, int | Sequence[float]],
                    tv_threshold: float = 0.02, var_rtol: float | None = 0.05,
                    min_samples: int = 1000, nodes: int = 24) -> StationaryReport:
    """Compare sample marginals with the normalized analytic marginals.

    ``samples`` is one time-ordered array (S, n) or a list of them (one per
    trajectory), already past burn-in.  ``grid`` maps coordinate names to a
    bin count or explicit bin edges.  Periodic coordinates must be wrapped.
    """
    chains = [np.asarray(samples)] if isinstance(samples, np.ndarray) else [np.asarray(s) for s in samples]
    chains = [c for c in chains if len(c)]
    total = sum(len(c) for c in chains)
    if total < min_samples:
        raise InsufficientSamples(f"{total} samples, need at least {min_samples}")
    law = stationary_law(spec)
    allx = np.concatenate(chains)
    n = len(law.names)
    bounds = {}
    for j in range(n):
        if law.supports[j] == FREE:
            continue
        bounds[j] = _default_bounds(law.supports[j]) or _line_bounds(law, j, allx)
    report = StationaryReport(n_samples=total, tv_threshold=tv_threshold, var_rtol=var_rtol)
    for name, bins in grid.items():
        i = law.names.index(name)
        if law.supports[i] == FREE:
            raise ValueError(f"coordinate {name!r} is not covered by the stationary density")
        kind = law.supports[i]
        col = allx[:, i]
        if np.ndim(bins) == 0:
            lo, hi = _default_bounds(kind) or (float(col.min()), float(col.max()))
            edges = np.linspace(lo, hi, int(bins) + 1)
        else:
            edges = np.asarray(bins, dtype=float)
        counts, _ = np.histogram(col, edges)
        p_hat = counts / max(counts.sum(), 1)
        gl_x, gl_w = np.polynomial.legendre.leggauss(6)
        probs = np.empty(len(edges) - 1)
        for k in range(len(edges) - 1):
            a, b = edges[k], edges[k + 1]
            pts = a + 0.5 * (b - a) * (gl_x + 1)
            probs[k] = marginal(law, i, pts, bounds, nodes) @ (0.5 * (b - a) * gl_w)
        probs /= probs.sum()
        tv = 0.5 * float(np.abs(p_hat - probs).sum())
        ess = float(sum(batch_means_ess(c[:, i]) for c in chains))
        stats = MarginalStats(name, tv, ess, passed=tv < tv_threshold)
        if kind != PERIODIC:
            mx, mw = _nodes(kind, *bounds[i], 128)
            dens = marginal(law, i, mx, bounds, nodes) * mw
            dens /= dens.sum()
            mean = float(dens @ mx)
            var = float(dens @ (mx - mean) ** 2)
            stats.sample_mean, stats.sample_var = float(col.mean()), float(col.var(ddof=1))
            stats.target_mean, stats.target_var = mean, var
            stats.var_rel_error = abs(stats.sample_var - var) / var
            if var_rtol is not None:
                stats.passed = stats.passed and stats.var_rel_error <= var_rtol
        report.marginals.append(stats)
    report.passed = all(m.passed for m in report.marginals)
    return report


def infinitesimal_stationarity(spec: ModelSpec, test_functions: Sequence[TestFunction],
                               nodes: int = 64,
                               bounds: dict[str, tuple[float, float]] | None = None):
    """(∫ Lf ρ, ∫ |Lf| ρ) over a tensor grid for each test function.

    Periodic coordinates use the rectangle rule; interval and line
    coordinates use Gauss–Legendre nodes, which avoid the chart singularities
    at the interval ends.  ``bounds`` truncates line coordinates.
    """
    law = stationary_law(spec)
    axes = []
    for j, kind in enumerate(law.supports):
        if kind == FREE:
            raise ValueError("quadrature over uniform (free) blocks is not supported")
        b = (bounds or {}).get(law.names[j]) or _default_bounds(kind)
        if b is None:
            b = _line_bounds(law, j, None)
        axes.append(_nodes(kind, *b, nodes))
    X, w = _tensor_grid(axes)
    rho = law(X) * w
    out = []
    for f in test_functions:
        L = generator_values(spec, f, X)
        out.append((float(L @ rho), float(np.abs(L) @ rho)))
    return out
