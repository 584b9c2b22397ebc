"""Kolmogorov generators: closed-form chart formulas and generic assembly.

The generic route builds Lf = b·∇f + ½ Σ_j [V_jᵀ ∇²f V_j + (DV_j V_j)·∇f]
from the Stratonovich drift b and diffusion columns V_j of any model; the
directional derivative DV_j V_j is a central difference along V_j, so it
only probes V_j on the state space itself.
"""
from __future__ import annotations

import numpy as np

from .. import charts as ch
from ..errors import ChartBoundary
from ..models import ModelKind, ModelSpec, get_model
from ..potentials import Potential
from .testfunctions import TestFunction

DIRECTIONAL_STEP = 1e-6

ANALYTIC_KINDS = (
    ModelKind.SPHERICAL_LANGEVIN_LOCAL,
    ModelKind.CYLINDER_SV_LOCAL,
    ModelKind.SPHERE_SV_LOCAL,
)


def _batch(state) -> tuple[np.ndarray, bool]:
    x = np.asarray(state, dtype=float)
    return (x[None], True) if x.ndim == 1 else (x, False)


def stratonovich_generator(spec: ModelSpec, f: TestFunction, X: np.ndarray,
                           correction: bool = True, step: float = DIRECTIONAL_STEP) -> np.ndarray:
    """Generic generator from the model's drift and diffusion, batched over X (M, n)."""
    model = get_model(spec.kind)
    a, B = model.fields(spec, X)
    gf = f.gradient(X)
    Hf = f.hessian(X)
    L = np.einsum("mi,mi->m", a, gf) + 0.5 * np.einsum("mik,mij,mkj->m", Hf, B, B)
    if correction:
        for j in range(B.shape[2]):
            v = B[:, :, j]
            if not np.any(v):
                continue
            _, Bp = model.fields(spec, X + step * v)
            _, Bm = model.fields(spec, X - step * v)
            dv = (Bp[:, :, j] - Bm[:, :, j]) / (2 * step)
            L += 0.5 * np.einsum("mi,mi->m", dv, gf)
    return L


def langevin_chart_generator(chart: ch.Chart, phi: Potential, lam: float, sigma: float,
                             f: TestFunction, X: np.ndarray) -> np.ndarray:
    """Geometric Langevin generator in chart coordinates X = (q, v), q, v ∈ R^d.

    Lf = v^j ∂_{q_j}f − Γ^j_{nm} v^n v^m ∂_{v_j}f − g^{ij} ∂_iΨ ∂_{v_j}f
         − λ v^j ∂_{v_j}f + ½σ² g^{ij} ∂_{v_i}∂_{v_j}f,  Ψ = Φ∘τ.
    """
    d = chart.dim
    q, v = X[:, :d], X[:, d:2 * d]
    g_inv = ch.metric(chart, q).g_inv
    gam = ch.christoffel(chart, q)
    dpsi = ch.chart_potential(chart, phi).grad(q)
    gf = f.gradient(X)
    Hf = f.hessian(X)
    fq, fv = gf[:, :d], gf[:, d:2 * d]
    fvv = Hf[:, d:2 * d, d:2 * d]
    accel = (-np.einsum("mjnk,mn,mk->mj", gam, v, v)
             - np.einsum("mij,mi->mj", g_inv, dpsi)
             - lam * v)
    return (np.einsum("mj,mj->m", v, fq) + np.einsum("mj,mj->m", accel, fv)
            + 0.5 * sigma ** 2 * np.einsum("mij,mij->m", g_inv, fvv))


def cylinder_sv_generator(spec: ModelSpec, f: TestFunction, X: np.ndarray) -> np.ndarray:
    """Spherical-velocity generator on the unit cylinder in (α, ξ₃, θ).

    Lf = r cosθ ∂_αf + r sinθ ∂_{ξ₃}f − (1/r)(−sinθ ∂_αΨ + cosθ ∂_{ξ₃}Ψ) ∂_θf
         + σ²/(2r²) ∂_θ²f.
    """
    r, s = spec.r, spec.sigma
    th = X[:, 2]
    dpsi = ch.chart_potential(spec.chart, spec.potential).grad(X[:, :2])
    gf = f.gradient(X)
    Hf = f.hessian(X)
    perp_grad = -np.sin(th) * dpsi[:, 0] + np.cos(th) * dpsi[:, 1]
    return (r * np.cos(th) * gf[:, 0] + r * np.sin(th) * gf[:, 1]
            - perp_grad / r * gf[:, 2] + s ** 2 / (2 * r ** 2) * Hf[:, 2, 2])


def sphere_sv_generator(spec: ModelSpec, f: TestFunction, X: np.ndarray) -> np.ndarray:
    """Spherical-velocity generator on S² in (θ₁, θ₂, α).

    Lf = r cosα/sinθ₂ ∂_{θ₁}f + r sinα ∂_{θ₂}f
         + [r cosα cotθ₂ + (1/r)(sinα/sinθ₂)∂_{θ₁}Ψ − (1/r)cosα ∂_{θ₂}Ψ] ∂_αf
         + σ²/(2r²) ∂_α²f.
    """
    r, s = spec.r, spec.sigma
    th2, al = X[:, 1], X[:, 2]
    dpsi = ch.chart_potential(spec.chart, spec.potential).grad(X[:, :2])
    gf = f.gradient(X)
    Hf = f.hessian(X)
    sin2 = np.sin(th2)
    coef_alpha = (r * np.cos(al) * np.cos(th2) / sin2
                  + np.sin(al) / sin2 * dpsi[:, 0] / r - np.cos(al) * dpsi[:, 1] / r)
    return (r * np.cos(al) / sin2 * gf[:, 0] + r * np.sin(al) * gf[:, 1]
            + coef_alpha * gf[:, 2] + s ** 2 / (2 * r ** 2) * Hf[:, 2, 2])


def analytic_generator(spec: ModelSpec, f: TestFunction, X: np.ndarray) -> np.ndarray:
    if spec.kind == ModelKind.SPHERICAL_LANGEVIN_LOCAL:
        return langevin_chart_generator(spec.chart, spec.potential, spec.lam, spec.sigma, f, X)
    if spec.kind == ModelKind.CYLINDER_SV_LOCAL:
        return cylinder_sv_generator(spec, f, X)
    if spec.kind == ModelKind.SPHERE_SV_LOCAL:
        return sphere_sv_generator(spec, f, X)
    raise ValueError(f"no closed-form generator for {spec.kind.value}")


def generator_values(spec: ModelSpec, f: TestFunction, X: np.ndarray, method: str = "auto") -> np.ndarray:
    """Batched Lf; ``method`` is 'auto', 'analytic' or 'generic'."""
    model = get_model(spec.kind)
    X = np.asarray(X, dtype=float)
    if not np.all(model.interior(spec, X)):
        raise ChartBoundary("generator requested within the chart-boundary guard")
    if method == "auto":
        method = "analytic" if spec.kind in ANALYTIC_KINDS else "generic"
    if method == "analytic":
        return analytic_generator(spec, f, X)
    if method == "generic":
        return stratonovich_generator(spec, f, X)
    raise ValueError(f"unknown generator method {method!r}")


def generator_apply(spec: ModelSpec, f: TestFunction, state, method: str = "auto"):
    """Lf at one state (float) or a batch of states (array)."""
    X, single = _batch(state)
    L = generator_values(spec, f, X, method)
    return float(L[0]) if single else L
