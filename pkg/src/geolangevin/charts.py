"""Local parametrizations τ: U ⊂ R^d → R^N and the geometry they induce.

Built-in charts have analytic first and second derivatives.  The spherical
chart τ^(n) is stored as a product table: every component of τ^(n) is a
product of univariate factors cos θ_k, sin θ_k or 1, so derivatives follow
from the product rule without symbolic algebra.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ChartBoundary, SingularMetric
from .geometry import FD_STEP, FiniteDifferenceWarning, fd_jacobian
from .potentials import Potential

EPS_CHART = 1e-6
TOL_METRIC = 1e-12

PERIODIC = "periodic"
INTERVAL = "interval"   # open interval (0, π) with a 1/sin singularity at the ends
LINE = "line"


@dataclass(frozen=True)
class Chart:
    """Parametrization with derivative evaluators, batched over s[..., :].

    ``dtau(s)[..., a, i] = ∂τ_a/∂s_i`` and
    ``d2tau(s)[..., a, i, j] = ∂²τ_a/∂s_i∂s_j``.
    """

    name: str
    dim: int
    ambient_dim: int
    tau: Callable[[np.ndarray], np.ndarray]
    dtau: Callable[[np.ndarray], np.ndarray]
    d2tau: Callable[[np.ndarray], np.ndarray]
    domain: tuple[str, ...]
    fd_derivatives: bool = False

    def check_interior(self, s: np.ndarray, eps: float = EPS_CHART) -> None:
        s = np.asarray(s, dtype=float)
        for i, kind in enumerate(self.domain):
            if kind == INTERVAL:
                si = np.sin(s[..., i])
                if np.any(~(si > eps)):
                    raise ChartBoundary(f"{self.name} coordinate {i + 1} is within {eps:g} of the chart boundary")

    def interior_mask(self, s: np.ndarray, eps: float = EPS_CHART) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        ok = np.ones(s.shape[:-1], dtype=bool)
        for i, kind in enumerate(self.domain):
            if kind == INTERVAL:
                ok &= np.sin(s[..., i]) > eps
        return ok


def chart_from_map(name: str, dim: int, ambient_dim: int,
                   tau: Callable[[np.ndarray], np.ndarray],
                   domain: tuple[str, ...] | None = None, h: float = FD_STEP) -> Chart:
    """User chart with finite-difference derivatives (flagged with a warning)."""
    warnings.warn(f"chart {name!r} uses finite-difference derivatives", FiniteDifferenceWarning,
                  stacklevel=2)

    def dtau(s):
        return fd_jacobian(tau, s, h)

    def d2tau(s):
        d2 = fd_jacobian(dtau, s, h)
        return 0.5 * (d2 + np.swapaxes(d2, -1, -2))

    return Chart(name, dim, ambient_dim, tau, dtau, d2tau, domain or (LINE,) * dim, True)


# spherical parametrization τ^(n): S^n ⊂ R^{n+1}

# factor codes
_ONE, _COS, _SIN = 0, 1, 2


def _factor_table(n: int) -> np.ndarray:
    """codes[c, k]: factor of component c contributed by θ_{k+1}."""
    codes = np.zeros((n + 1, n), dtype=int)
    codes[0, 0], codes[1, 0] = _COS, _SIN
    for m in range(2, n + 1):
        codes[m, m - 1] = _COS
        codes[:m, m - 1] = _SIN
    return codes


def _factor_values(codes: np.ndarray, theta: np.ndarray, order: int) -> np.ndarray:
    """Value (order 0), first or second derivative of every factor."""
    c, s = np.cos(theta)[..., None, :], np.sin(theta)[..., None, :]
    table = {
        0: (1.0, c, s),
        1: (0.0, -s, c),
        2: (0.0, -c, -s),
    }[order]
    shape = theta.shape[:-1] + codes.shape
    out = np.empty(shape)
    for code, val in enumerate(table):
        out = np.where(codes == code, val, out)
    return out


def _spherical_derivatives(n: int, theta: np.ndarray, order: int = 2):
    """(τ, ∂τ, ∂²τ) of the recursive sphere chart; entries above ``order`` are None."""
    theta = np.asarray(theta, dtype=float)
    codes = _factor_table(n)
    f0 = _factor_values(codes, theta, 0)
    tau = np.prod(f0, axis=-1)
    if order == 0:
        return tau, None, None
    f1 = _factor_values(codes, theta, 1)
    f2 = _factor_values(codes, theta, 2) if order > 1 else None
    dt = np.empty(theta.shape[:-1] + (n + 1, n))
    d2 = np.empty(theta.shape[:-1] + (n + 1, n, n)) if order > 1 else None
    for i in range(n):
        fi = f0.copy()
        fi[..., i] = f1[..., i]
        dt[..., i] = np.prod(fi, axis=-1)
        if order < 2:
            continue
        for j in range(i, n):
            fij = f0.copy()
            if i == j:
                fij[..., i] = f2[..., i]
            else:
                fij[..., i] = f1[..., i]
                fij[..., j] = f1[..., j]
            d2[..., i, j] = d2[..., j, i] = np.prod(fij, axis=-1)
    return tau, dt, d2


def spherical_chart(n: int) -> Chart:
    """Recursive chart τ^(1)=(cosθ₁, sinθ₁), τ^(n)=(τ^(n−1) sinθ_n, cosθ_n)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    domain = (PERIODIC,) + (INTERVAL,) * (n - 1)
    return Chart(
        name=f"sphere{n}", dim=n, ambient_dim=n + 1,
        tau=lambda s: _spherical_derivatives(n, s, 0)[0],
        dtau=lambda s: _spherical_derivatives(n, s, 1)[1],
        d2tau=lambda s: _spherical_derivatives(n, s)[2],
        domain=domain,
    )


def sphere_chart() -> Chart:
    """S² chart τ(θ₁,θ₂) = (cosθ₁ sinθ₂, sinθ₁ sinθ₂, cosθ₂)."""
    c = spherical_chart(2)
    return Chart("sphere", 2, 3, c.tau, c.dtau, c.d2tau, c.domain)


def circle_chart() -> Chart:
    c = spherical_chart(1)
    return Chart("circle", 1, 2, c.tau, c.dtau, c.d2tau, c.domain)


def cylinder_chart(radius: float = 1.0) -> Chart:
    """(α, ξ₃) ↦ (ρ cosα, ρ sinα, ξ₃)."""
    rho = float(radius)

    def tau(s):
        s = np.asarray(s, dtype=float)
        return np.stack([rho * np.cos(s[..., 0]), rho * np.sin(s[..., 0]), s[..., 1]], axis=-1)

    def dtau(s):
        s = np.asarray(s, dtype=float)
        out = np.zeros(s.shape[:-1] + (3, 2))
        out[..., 0, 0] = -rho * np.sin(s[..., 0])
        out[..., 1, 0] = rho * np.cos(s[..., 0])
        out[..., 2, 1] = 1.0
        return out

    def d2tau(s):
        s = np.asarray(s, dtype=float)
        out = np.zeros(s.shape[:-1] + (3, 2, 2))
        out[..., 0, 0, 0] = -rho * np.cos(s[..., 0])
        out[..., 1, 0, 0] = -rho * np.sin(s[..., 0])
        return out

    return Chart("cylinder", 2, 3, tau, dtau, d2tau, (PERIODIC, LINE))


def plane_chart(d: int) -> Chart:
    """Identity chart of R^d ≅ {ξ_{d+1} = 0} ⊂ R^{d+1}."""
    emb = np.eye(d + 1, d)

    def tau(s):
        s = np.asarray(s, dtype=float)
        return s @ emb.T

    def dtau(s):
        s = np.asarray(s, dtype=float)
        return np.broadcast_to(emb, s.shape[:-1] + emb.shape).copy()

    def d2tau(s):
        s = np.asarray(s, dtype=float)
        return np.zeros(s.shape[:-1] + (d + 1, d, d))

    return Chart(f"plane{d}", d, d + 1, tau, dtau, d2tau, (LINE,) * d)


CHARTS: dict[str, Callable[..., Chart]] = {
    "sphere": sphere_chart,
    "circle": circle_chart,
    "cylinder": cylinder_chart,
}


# induced geometry

@dataclass(frozen=True)
class MetricData:
    g: np.ndarray
    g_inv: np.ndarray
    at: np.ndarray


def gram(dt: np.ndarray) -> np.ndarray:
    return np.swapaxes(dt, -1, -2) @ dt


def _checked_inverse(g: np.ndarray) -> np.ndarray:
    eig = np.linalg.eigvalsh(g)
    if np.any(~(eig[..., 0] > TOL_METRIC * np.maximum(1.0, eig[..., -1]))):
        raise SingularMetric(f"metric not positive definite (smallest eigenvalue {np.min(eig[..., 0]):.3e})")
    return np.linalg.inv(g)


def metric(c: Chart, s: np.ndarray) -> MetricData:
    """g_ij = ∂_iτ · ∂_jτ and its inverse."""
    s = np.asarray(s, dtype=float)
    g = gram(c.dtau(s))
    g_inv = _checked_inverse(g)
    eye = np.eye(c.dim)
    if np.max(np.abs(g @ g_inv - eye)) > 1e-10 * max(1.0, float(np.max(np.abs(g)) * np.max(np.abs(g_inv)))):
        raise SingularMetric("metric inverse failed verification")
    return MetricData(g, g_inv, s)


def christoffel(c: Chart, s: np.ndarray) -> np.ndarray:
    """Γ^i_{nm} = Σ_j g^{ij} ∂_jτ · ∂_n∂_mτ, indexed as out[..., i, n, m]."""
    s = np.asarray(s, dtype=float)
    dt, d2 = c.dtau(s), c.d2tau(s)
    g_inv = _checked_inverse(gram(dt))
    a = np.einsum("...aj,...anm->...jnm", dt, d2)
    return np.einsum("...ij,...jnm->...inm", g_inv, a)


def christoffel_from_metric(c: Chart, s: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Γ^i_{nm} = ½ g^{ij}(∂_m g_jn + ∂_n g_jm − ∂_j g_nm) with FD metric derivatives.

    Uses only τ's first derivatives, so it is independent of ``christoffel``.
    """
    s = np.asarray(s, dtype=float)
    d = c.dim
    g_inv = _checked_inverse(gram(c.dtau(s)))
    dg = np.empty(s.shape[:-1] + (d, d, d))  # dg[..., j, n, m] = ∂_m g_jn
    for m in range(d):
        e = np.zeros(d)
        e[m] = h
        dg[..., m] = (gram(c.dtau(s + e)) - gram(c.dtau(s - e))) / (2 * h)
    lower = 0.5 * (dg + np.swapaxes(dg, -1, -2) - np.moveaxis(dg, -1, -3))
    # lower[..., j, n, m] = ½(∂_m g_jn + ∂_n g_jm − ∂_j g_nm)
    return np.einsum("...ij,...jnm->...inm", g_inv, lower)


def spherical_parametrization(n: int, theta: np.ndarray, eps: float = EPS_CHART):
    """τ^(n)(θ) and the spherical unit vectors n_j = ∂_jτ/|∂_jτ| as columns."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1] != n:
        raise ValueError(f"expected {n} angles, got {theta.shape[-1]}")
    if n > 1 and np.any(~(np.sin(theta[..., 1:]) > eps)):
        raise ChartBoundary("polar angle within the chart-boundary guard")
    tau, dt, _ = _spherical_derivatives(n, theta, 1)
    return tau, dt / np.linalg.norm(dt, axis=-2, keepdims=True)


def frame_derivatives(n: int, theta: np.ndarray):
    """τ, the unit frame n_j, √g^{jj} = 1/|∂_jτ| and Δ_{inj}, batched."""
    tau, dt, d2 = _spherical_derivatives(n, theta)
    norms = np.linalg.norm(dt, axis=-2)                       # |∂_jτ|
    frame = dt / norms[..., None, :]
    # Δ_{inj} = (1/|∂_iτ|)(∂_i∂_nτ · n_j − δ_nj ∂_i∂_nτ · n_n)/|∂_nτ|
    proj = np.einsum("...ain,...aj->...inj", d2, frame) / norms[..., None, :, None]
    diag = np.einsum("...inn->...in", proj)
    eye = np.eye(n)
    delta = (proj - diag[..., :, :, None] * eye) / norms[..., :, None, None]
    return tau, frame, 1.0 / norms, delta


def delta_coefficients(theta: np.ndarray, d: int, eps: float = EPS_CHART) -> np.ndarray:
    """Δ_{inj} = √g^{ii} ∂_{θ_i} n_n · n_j for the chart τ^(d−1) of S^{d−1}."""
    theta = np.asarray(theta, dtype=float)
    n = d - 1
    if theta.shape[-1] != n:
        raise ValueError(f"expected {n} angles, got {theta.shape[-1]}")
    if n > 1 and np.any(~(np.sin(theta[..., 1:]) > eps)):
        raise ChartBoundary("polar angle within the chart-boundary guard")
    return frame_derivatives(n, theta)[3]


@dataclass(frozen=True)
class ChartPotential:
    """Ψ = Φ∘τ with partials ∂_jΨ = ∂_jτ · ∇Φ(τ(s))."""

    chart: Chart
    phi: Potential

    def value(self, s: np.ndarray) -> np.ndarray:
        return self.phi.value(self.chart.tau(np.asarray(s, dtype=float)))

    def grad(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.einsum("...ai,...a->...i", self.chart.dtau(s), self.phi.grad(self.chart.tau(s)))


def chart_potential(c: Chart, phi: Potential) -> ChartPotential:
    return ChartPotential(c, phi)
