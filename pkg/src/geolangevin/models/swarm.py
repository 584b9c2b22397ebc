"""Interacting self-propelled swarm: K fiber-type particles coupled through Ψ_i.

Particle i feels Ψ_i(ξ_i) = Φ(ξ_i) + (1/K) Σ_{j≠i} U(|ξ_j − ξ_i|), and each
particle has its own noise.  The state stacks all positions, then all
velocities (then all μ for the smooth variant), particle-major.
"""
from __future__ import annotations

import numpy as np

from ..errors import ParticleCollision
from .catalog import LINE, PERIODIC, Block, ModelKind, Schema
from .fields import Model, _normalize, _perp, _unit_circle
from .spec import ModelSpec, SwarmSpec


def effective_gradients(sw: SwarmSpec, xi: np.ndarray) -> np.ndarray:
    """∇Ψ_i(ξ_i) for positions xi of shape (M, K, d)."""
    g = sw.roosting.grad(xi)
    K = xi.shape[1]
    if K == 1 or sw.interaction.name == "none":
        return g
    diff = xi[:, :, None, :] - xi[:, None, :, :]          # ξ_i − ξ_j
    s = np.linalg.norm(diff, axis=-1)
    off = ~np.eye(K, dtype=bool)
    if sw.interaction.min_distance > 0 and np.any(s[:, off] < sw.interaction.min_distance):
        raise ParticleCollision(f"pair distance {np.min(s[:, off]):.3e} below "
                                f"{sw.interaction.min_distance:g}")
    w = np.where(off, sw.interaction.dvalue_over_s(np.where(off, s, 1.0)), 0.0)
    return g + np.einsum("mij,mijd->mid", w, diff) / K


def effective_potentials(sw: SwarmSpec, xi: np.ndarray) -> np.ndarray:
    """Ψ_i(ξ_i), shape (M, K)."""
    val = sw.roosting.value(xi)
    K = xi.shape[1]
    if K == 1 or sw.interaction.name == "none":
        return val
    s = np.linalg.norm(xi[:, :, None, :] - xi[:, None, :, :], axis=-1)
    off = ~np.eye(K, dtype=bool)
    u = np.where(off, sw.interaction.value(np.where(off, s, 1.0)), 0.0)
    return val + u.sum(axis=2) / K


class Swarm(Model):
    kind = ModelKind.SWARM
    ambient = True
    ito_equal = False

    def is_ambient(self, spec):
        return spec.swarm.form == "ambient"

    def allows_euler(self, spec):
        return spec.swarm.form == "planar"

    def _sizes(self, spec):
        sw = spec.swarm
        return sw.K, sw.d

    def schema(self, spec):
        sw = spec.swarm
        K, d = self._sizes(spec)

        def names(prefix, n):
            return tuple(f"{prefix}{p + 1}_{j + 1}" for p in range(K) for j in range(n))

        xi = Block("xi", names("xi", d), (LINE,) * (K * d))
        if sw.form == "planar":
            return Schema((xi, Block("theta", tuple(f"theta{p + 1}" for p in range(K)), (PERIODIC,) * K)))
        blocks = [xi, Block("omega", names("omega", d), (LINE,) * (K * d))]
        if sw.smooth:
            blocks.append(Block("mu", names("mu", d), (LINE,) * (K * d)))
        return Schema(tuple(blocks))

    def noise_dim(self, spec):
        K, d = self._sizes(spec)
        return K if spec.swarm.form == "planar" else K * d

    def particle_fields(self, spec, X):
        """Per-particle drift (M, K, q) and diffusion (M, K, q, m_p)."""
        sw = spec.swarm
        K, d = self._sizes(spec)
        M = X.shape[0]
        xi = X[:, :K * d].reshape(M, K, d)
        grad = effective_gradients(sw, xi)
        r = sw.r
        if sw.form == "planar":
            th = X[:, K * d:]
            a = np.concatenate([r * _unit_circle(th),
                                (-np.einsum("mki,mki->mk", _perp(th), grad) / r)[..., None]], axis=2)
            B = np.zeros((M, K, 3, 1))
            B[:, :, 2, 0] = sw.sigma / r
            return a, B
        om = X[:, K * d:2 * K * d].reshape(M, K, d)
        PS = np.eye(d) - om[..., :, None] * om[..., None, :] / r ** 2
        tang = -np.einsum("mkij,mkj->mki", PS, grad)
        if not sw.smooth:
            a = np.concatenate([om, tang], axis=2)
            B = np.zeros((M, K, 2 * d, d))
            B[:, :, d:, :] = sw.sigma * PS
            return a, B
        mu = X[:, 2 * K * d:].reshape(M, K, d)
        mu_g = np.einsum("mki,mki->mk", mu, grad)
        mu2 = np.einsum("mki,mki->mk", mu, mu)
        dmu = ((mu_g - mu2) / r ** 2)[..., None] * om - sw.lam * mu
        a = np.concatenate([om, tang + mu, dmu], axis=2)
        B = np.zeros((M, K, 3 * d, d))
        B[:, :, 2 * d:, :] = sw.sigma * PS
        return a, B

    def fields(self, spec, X):
        K, d = self._sizes(spec)
        M, n = X.shape
        a_p, B_p = self.particle_fields(spec, X)
        q, mp = B_p.shape[2], B_p.shape[3]
        if spec.swarm.form == "planar":
            blocks = [(0, d), (d, d + 1)]
            widths = [d, 1]
        else:
            nblk = q // d
            blocks = [(j * d, (j + 1) * d) for j in range(nblk)]
            widths = [d] * nblk
        a = np.concatenate([a_p[:, :, lo:hi].reshape(M, K * w) for (lo, hi), w in zip(blocks, widths)],
                           axis=1)
        B = np.zeros((M, n, K * mp))
        offset = 0
        for (lo, hi), w in zip(blocks, widths):
            for p in range(K):
                B[:, offset + p * w:offset + (p + 1) * w, p * mp:(p + 1) * mp] = B_p[:, p, lo:hi, :]
            offset += K * w
        return a, B

    def residual_names(self, spec):
        if spec.swarm.form == "planar":
            return ()
        return ("radius", "mu_orthogonality") if spec.swarm.smooth else ("radius",)

    def residuals(self, spec, X):
        sw = spec.swarm
        if sw.form == "planar":
            return np.zeros((X.shape[0], 0))
        K, d = self._sizes(spec)
        M = X.shape[0]
        om = X[:, K * d:2 * K * d].reshape(M, K, d)
        cols = [np.max(np.abs(np.einsum("mki,mki->mk", om, om) - sw.r ** 2), axis=1)]
        if sw.smooth:
            mu = X[:, 2 * K * d:].reshape(M, K, d)
            cols.append(np.max(np.abs(np.einsum("mki,mki->mk", om, mu)), axis=1))
        return np.stack(cols, axis=1)

    def repair(self, spec, X):
        sw = spec.swarm
        if sw.form == "planar":
            return X
        K, d = self._sizes(spec)
        M = X.shape[0]
        out = X.copy()
        om = _normalize(X[:, K * d:2 * K * d].reshape(M, K, d), sw.r)
        out[:, K * d:2 * K * d] = om.reshape(M, K * d)
        if sw.smooth:
            mu = X[:, 2 * K * d:].reshape(M, K, d)
            mu = mu - np.einsum("mki,mki->mk", mu, om)[..., None] * om / sw.r ** 2
            out[:, 2 * K * d:] = mu.reshape(M, K * d)
        return out

    def embed(self, spec, X):
        sw = spec.swarm
        K, d = self._sizes(spec)
        if sw.form == "planar":
            th = X[:, K * d:]
            return {"xi": X[:, :K * d], "omega": (sw.r * _unit_circle(th)).reshape(X.shape[0], K * d)}
        out = {"xi": X[:, :K * d], "omega": X[:, K * d:2 * K * d]}
        if sw.smooth:
            out["mu"] = X[:, 2 * K * d:]
        return out

    def counterpart(self, spec):
        if spec.swarm.form != "planar":
            return None
        sw = spec.swarm
        amb = SwarmSpec(sw.K, sw.roosting, sw.interaction, sw.r, sw.sigma, sw.d, "ambient")
        return ModelSpec(ModelKind.SWARM, swarm=amb)

    def default_state(self, spec):
        sw = spec.swarm
        K, d = self._sizes(spec)
        ang = 2 * np.pi * np.arange(K) / K
        xi = np.zeros((K, d))
        if K > 1:
            xi[:, 0], xi[:, 1] = 0.5 * np.cos(ang), 0.5 * np.sin(ang)
        if sw.form == "planar":
            return np.concatenate([xi.ravel(), np.zeros(K)])
        om = np.zeros((K, d))
        om[:, 0] = sw.r
        parts = [xi.ravel(), om.ravel()]
        if sw.smooth:
            parts.append(np.zeros(K * d))
        return np.concatenate(parts)
