"""Monte Carlo check that one-step expectation slopes match the generator."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from ..integrators import Scheme, derive_stream, step_batch
from ..models import ModelSpec, get_model
from .generator import generator_values
from .testfunctions import TestFunction

# Absolute allowance for rounding in (f(X_h) − f(x))/h; it matters only when
# the one-step bias is exactly linear in h and the calibrated bound is tight.
SLOPE_ROUNDOFF = 1e-10
# Richardson halving estimates the O(h) bias only to leading order; the factor
# leaves room for the O(h²) remainder, which would otherwise decide the outcome
# for noise-free coordinates whose error equals the estimate.
BIAS_SAFETY = 2.0


@dataclass(frozen=True)
class WeakReport:
    """One-step slope (E f(X_h) − f(x))/h against Lf(x).

    The slope has a first-order bias in h, both from the Taylor remainder
    (h/2)L²f and from the scheme.  ``c_bias`` is calibrated from the same
    samples by Richardson halving: each replica also takes one step of h/2
    driven by the first half of its Brownian increment, and
    C_bias = 2·BIAS_SAFETY·(|slope(h) − slope(h/2)| + 3·stderr of that difference)/h.

    With ``control_variate`` the zero-mean term ∇f(x)·B(x)ΔW/h is subtracted
    from every sample; the expected slope is unchanged but its O(h^{-1/2})
    noise is removed.
    """

    name: str
    mc_slope: float
    analytic_Lf: float
    stderr: float
    slope_half: float
    c_bias: float
    h: float
    n: int
    passed: bool
    control_variate: bool = True

    @property
    def tolerance(self) -> float:
        return self.c_bias * self.h + 3 * self.stderr + SLOPE_ROUNDOFF

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tolerance"] = self.tolerance
        return d


def _default_scheme(model, spec) -> Scheme:
    return Scheme.EULER_MARUYAMA if model.allows_euler(spec) and not model.is_ambient(spec) else Scheme.HEUN


def _mean_se(s: float, s2: float, n: int) -> tuple[float, float]:
    mean = s / n
    var = max(s2 / n - mean ** 2, 0.0) * n / max(n - 1, 1)
    return mean, float(np.sqrt(var / n))


def weak_consistency(spec: ModelSpec, f: TestFunction | Sequence[TestFunction], state, h: float,
                     n: int, seed: int, scheme: Scheme | str | None = None, repair: bool = True,
                     control_variate: bool = True,
                     block: int = 100_000) -> WeakReport | list[WeakReport]:
    """Estimate one-step slopes from ``n`` replicas started at ``state``.

    Replicas are processed in blocks; block b draws from stream (seed, b), so
    the estimate does not depend on how blocks are scheduled.
    """
    fs = [f] if isinstance(f, TestFunction) else list(f)
    model = get_model(spec.kind)
    scheme = Scheme(scheme) if scheme is not None else _default_scheme(model, spec)
    x0 = np.asarray(state, dtype=float)
    m = model.noise_dim(spec)
    do_repair = repair and model.is_ambient(spec)
    lf = [float(generator_values(spec, g, x0[None])[0]) for g in fs]
    f0 = [float(g.value(x0[None])[0]) for g in fs]
    B0 = model.fields(spec, x0[None])[1][0]
    cv = [g.grad(x0[None])[0] @ B0 if control_variate else np.zeros(m) for g in fs]
    sums = np.zeros((len(fs), 6))  # Σd, Σd², Σd_half, Σd_half², Σ(d − d_half), Σ(d − d_half)²
    done, b = 0, 0
    while done < n:
        size = min(block, n - done)
        z = derive_stream(seed, b).normals(size, 2, m)
        dw1 = np.sqrt(h / 2) * z[:, 0]
        dw = dw1 + np.sqrt(h / 2) * z[:, 1]
        X0 = np.tile(x0, (size, 1))
        with np.errstate(invalid="ignore", divide="ignore"):
            Xh = step_batch(model, spec, X0, h, dw, scheme, do_repair)
            Xq = step_batch(model, spec, X0, h / 2, dw1, scheme, do_repair)
        for i, g in enumerate(fs):
            d = (g.value(Xh) - f0[i] - dw @ cv[i]) / h
            dq = (g.value(Xq) - f0[i] - dw1 @ cv[i]) / (h / 2)
            diff = d - dq
            sums[i] += (d.sum(), (d * d).sum(), dq.sum(), (dq * dq).sum(), diff.sum(), (diff * diff).sum())
        done += size
        b += 1
    reports = []
    for i, g in enumerate(fs):
        mean, stderr = _mean_se(sums[i, 0], sums[i, 1], n)
        half, _ = _mean_se(sums[i, 2], sums[i, 3], n)
        dmean, dse = _mean_se(sums[i, 4], sums[i, 5], n)
        c_bias = BIAS_SAFETY * 2.0 * (abs(dmean) + 3.0 * dse) / h
        passed = abs(mean - lf[i]) <= c_bias * h + 3 * stderr + SLOPE_ROUNDOFF
        reports.append(WeakReport(g.name, float(mean), lf[i], stderr, float(half), float(c_bias),
                                  h, n, bool(passed), control_variate))
    return reports[0] if isinstance(f, TestFunction) else reports


@dataclass(frozen=True)
class TerminalReport:
    """E f(X_T) at step dt, with the same coupled-halving bias calibration."""

    name: str
    mean: float
    stderr: float
    mean_half: float
    c_bias: float
    dt: float
    T: float
    n: int
    boundary_hits: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def terminal_expectation(spec: ModelSpec, f: TestFunction, state, T: float, dt: float, n: int,
                         seed: int, scheme: Scheme | str | None = None, repair: bool = True,
                         block: int = 20_000) -> TerminalReport:
    """Monte Carlo E f(X_T) from ``state``, run at dt and at dt/2 on the same Brownian paths.

    Paths that leave a chart interior are frozen and counted in ``boundary_hits``.
    """
    model = get_model(spec.kind)
    scheme = Scheme(scheme) if scheme is not None else _default_scheme(model, spec)
    x0 = np.asarray(state, dtype=float)
    m = model.noise_dim(spec)
    do_repair = repair and model.is_ambient(spec)
    steps = int(round(T / dt))
    if not np.isclose(steps * dt, T):
        raise ValueError("T must be a multiple of dt")
    check = not model.is_ambient(spec)
    sums = np.zeros(5)
    hits = 0
    done, b = 0, 0
    while done < n:
        size = min(block, n - done)
        stream = derive_stream(seed, b)
        Xf = np.tile(x0, (size, 1))
        Xq = Xf.copy()
        alive = np.ones(size, dtype=bool)
        with np.errstate(invalid="ignore", divide="ignore"):
            for _ in range(steps):
                z = stream.normals(size, 2, m) * np.sqrt(dt / 2)
                nf = step_batch(model, spec, Xf, dt, z[:, 0] + z[:, 1], scheme, do_repair)
                nq = step_batch(model, spec, Xq, dt / 2, z[:, 0], scheme, do_repair)
                nq = step_batch(model, spec, nq, dt / 2, z[:, 1], scheme, do_repair)
                if check:
                    alive &= model.interior(spec, nf) & model.interior(spec, nq)
                    Xf = np.where(alive[:, None], nf, Xf)
                    Xq = np.where(alive[:, None], nq, Xq)
                else:
                    Xf, Xq = nf, nq
        hits += int((~alive).sum())
        vf, vq = f.value(Xf), f.value(Xq)
        diff = vf - vq
        sums += (vf.sum(), (vf * vf).sum(), vq.sum(), diff.sum(), (diff * diff).sum())
        done += size
        b += 1
    s, s2, sq, sd, sd2 = sums
    mean = s / n
    var = max(s2 / n - mean ** 2, 0.0) * n / max(n - 1, 1)
    dmean = sd / n
    dvar = max(sd2 / n - dmean ** 2, 0.0) * n / max(n - 1, 1)
    c_bias = 2.0 * (abs(dmean) + 3.0 * np.sqrt(dvar / n)) / dt
    return TerminalReport(f.name, float(mean), float(np.sqrt(var / n)), float(sq / n), float(c_bias),
                          dt, T, n, hits)
