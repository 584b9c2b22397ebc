"""Invariant monitoring along trajectories."""
from __future__ import annotations

import numpy as np

from ..models import ModelKind, ModelSpec, get_model


def conserved_monitor(spec: ModelSpec, traj, max_residual: float = 1e-8,
                      invariant_tol: float | None = None) -> dict:
    """Maximum state-space residuals and, for force-free deterministic runs,
    drift of the first integrals.

    Sphere (spherical velocity, σ=0, Φ=0): ξ×ω is constant along great circles.
    Cylinder (ambient or local, σ=0, Φ=0): ω₃ and |(ω₁, ω₂)| are constant on helices.
    """
    model = get_model(spec.kind)
    X = np.asarray(traj.states, dtype=float)
    names = model.residual_names(spec)
    res = model.residuals(spec, X)
    report: dict = {"residuals": {n: float(res[:, k].max()) for k, n in enumerate(names)}}
    report["max_residual"] = float(res.max()) if res.size else 0.0
    passed = report["max_residual"] < max_residual
    free = spec.sigma == 0 and spec.potential.is_zero
    inv: dict[str, float] = {}
    if free and spec.kind in (ModelKind.SPHERICAL_VELOCITY_AMBIENT, ModelKind.CYLINDER_SV_LOCAL):
        emb = model.embed(spec, X)
        xi, om = emb["xi"], emb["omega"]
        on_sphere = spec.kind == ModelKind.SPHERICAL_VELOCITY_AMBIENT and spec.manifold.name == "sphere" \
            and spec.manifold.ambient_dim == 3
        on_cylinder = spec.kind == ModelKind.CYLINDER_SV_LOCAL or spec.manifold.name == "cylinder"
        if on_sphere:
            L = np.cross(xi, om)
            inv["angular_momentum_drift"] = float(np.linalg.norm(L - L[0], axis=1).max())
        elif on_cylinder:
            inv["omega3_drift"] = float(np.abs(om[:, 2] - om[0, 2]).max())
            sp = np.hypot(om[:, 0], om[:, 1])
            inv["angular_speed_drift"] = float(np.abs(sp - sp[0]).max())
    report["invariants"] = inv
    if invariant_tol is not None and inv:
        passed = passed and max(inv.values()) < invariant_tol
    report["passed"] = bool(passed)
    return report
