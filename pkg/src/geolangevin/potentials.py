"""Scalar potentials on R^N with analytic gradients.

All evaluators broadcast over leading axes: ``x`` has shape ``(..., N)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import ConfigError

KINDS = ("zero", "quadratic", "linear", "polynomial")


@dataclass(frozen=True)
class Potential:
    """Potential Φ of one of four closed-form families.

    ``zero``        Φ = 0
    ``quadratic``   Φ = Σ c_i ξ_i²  (diagonal; ``coefficients`` = c)
    ``linear``      Φ = c·ξ_index
    ``polynomial``  Φ = Σ_t c_t Π_i ξ_i^{p_ti}
    """

    kind: str = "zero"
    coefficients: tuple[float, ...] = ()
    index: int = 0
    scale: float = 1.0
    terms: tuple[tuple[float, tuple[int, ...]], ...] = ()
    name: str = ""
    _powers: np.ndarray = field(init=False, repr=False, compare=False)
    _coefs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown potential kind {self.kind!r}")
        if self.kind == "polynomial":
            if not self.terms:
                raise ConfigError("polynomial potential needs at least one term")
            widths = {len(p) for _, p in self.terms}
            if len(widths) != 1:
                raise ConfigError("polynomial terms must share one dimension")
            powers = np.array([p for _, p in self.terms], dtype=int)
            if np.any(powers < 0):
                raise ConfigError("polynomial powers must be nonnegative")
            coefs = np.array([c for c, _ in self.terms], dtype=float)
        else:
            powers = np.zeros((0, 0), dtype=int)
            coefs = np.zeros(0)
        if self.kind == "linear" and self.index < 0:
            raise ConfigError("linear potential index must be nonnegative")
        object.__setattr__(self, "_powers", powers)
        object.__setattr__(self, "_coefs", coefs)
        if not self.name:
            object.__setattr__(self, "name", self.kind)

    # constructors

    @classmethod
    def zero(cls) -> "Potential":
        return cls("zero")

    @classmethod
    def quadratic(cls, coefficients: Sequence[float]) -> "Potential":
        return cls("quadratic", coefficients=tuple(float(c) for c in coefficients))

    @classmethod
    def squared_norm(cls, dim: int) -> "Potential":
        return cls("quadratic", coefficients=(1.0,) * dim, name="squared_norm")

    @classmethod
    def linear(cls, index: int, scale: float = 1.0) -> "Potential":
        return cls("linear", index=int(index), scale=float(scale))

    @classmethod
    def polynomial(cls, terms: Sequence[tuple[float, Sequence[int]]]) -> "Potential":
        return cls("polynomial", terms=tuple((float(c), tuple(int(p) for p in pw)) for c, pw in terms))

    @classmethod
    def from_config(cls, block: dict[str, Any]) -> "Potential":
        kind = block.get("kind", "zero")
        if kind == "zero":
            return cls.zero()
        if kind == "quadratic":
            return cls.quadratic(block["coefficients"])
        if kind == "linear":
            return cls.linear(block["index"], block.get("scale", 1.0))
        if kind == "polynomial":
            return cls.polynomial([(t["coef"], t["powers"]) for t in block["terms"]])
        raise ConfigError(f"unknown potential kind {kind!r}")

    def to_config(self) -> dict[str, Any]:
        if self.kind == "quadratic":
            return {"kind": "quadratic", "coefficients": list(self.coefficients)}
        if self.kind == "linear":
            return {"kind": "linear", "index": self.index, "scale": self.scale}
        if self.kind == "polynomial":
            return {"kind": "polynomial",
                    "terms": [{"coef": c, "powers": list(p)} for c, p in self.terms]}
        return {"kind": "zero"}

    # evaluation

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    @property
    def dim(self) -> int | None:
        """Required ambient dimension, or None if any dimension works."""
        if self.kind == "quadratic":
            return len(self.coefficients)
        if self.kind == "polynomial":
            return self._powers.shape[1]
        return None

    def check_dim(self, n: int) -> None:
        need = self.dim
        if need is not None and need != n:
            raise ConfigError(f"potential {self.name!r} is defined on R^{need}, model needs R^{n}")
        if self.kind == "linear" and self.index >= n:
            raise ConfigError(f"linear potential index {self.index} out of range for R^{n}")

    def value(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros(x.shape[:-1])
        if self.kind == "quadratic":
            return (x * x) @ np.asarray(self.coefficients)
        if self.kind == "linear":
            return self.scale * x[..., self.index]
        monomials = np.prod(x[..., None, :] ** self._powers, axis=-1)
        return monomials @ self._coefs

    def grad(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "quadratic":
            return 2.0 * x * np.asarray(self.coefficients)
        if self.kind == "linear":
            g = np.zeros_like(x)
            g[..., self.index] = self.scale
            return g
        out = np.empty_like(x)
        for i in range(x.shape[-1]):
            p = self._powers.copy()
            c = self._coefs * p[:, i]
            p[:, i] = np.maximum(p[:, i] - 1, 0)
            out[..., i] = np.prod(x[..., None, :] ** p, axis=-1) @ c
        return out
