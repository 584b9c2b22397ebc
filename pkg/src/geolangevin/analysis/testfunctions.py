"""Smooth test functions with analytic or finite-difference partials."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..errors import MissingPartials

H_FD = 1e-5
H_FD_HESS = 1e-4   # second differences of values only; larger step limits roundoff


@dataclass(frozen=True)
class TestFunction:
    """f(x) batched over x[..., :] with optional analytic partials.

    Missing partials are replaced by central differences (gradient step
    ``h_fd``; Hessian by differencing the gradient, or by second differences
    of values with step ``h_hess`` when no gradient is available) unless
    ``allow_fd`` is False, in which case MissingPartials is raised.
    """

    __test__ = False  # not a pytest class

    value: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray] | None = None
    hess: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = "f"
    h_fd: float = H_FD
    h_hess: float = H_FD_HESS
    allow_fd: bool = True

    def __call__(self, x):
        return self.value(np.asarray(x, dtype=float))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.grad is not None:
            return self.grad(x)
        if not self.allow_fd:
            raise MissingPartials(f"{self.name} has no gradient")
        out = np.empty(x.shape)
        for i in range(x.shape[-1]):
            e = np.zeros(x.shape[-1])
            e[i] = self.h_fd
            out[..., i] = (self.value(x + e) - self.value(x - e)) / (2 * self.h_fd)
        return out

    def hessian(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.hess is not None:
            return self.hess(x)
        if not self.allow_fd:
            raise MissingPartials(f"{self.name} has no Hessian")
        n = x.shape[-1]
        out = np.empty(x.shape + (n,))
        if self.grad is not None:
            for i in range(n):
                e = np.zeros(n)
                e[i] = self.h_fd
                out[..., :, i] = (self.grad(x + e) - self.grad(x - e)) / (2 * self.h_fd)
            return 0.5 * (out + np.swapaxes(out, -1, -2))
        h = self.h_hess
        f0 = self.value(x)
        eye = np.eye(n) * h
        for i in range(n):
            out[..., i, i] = (self.value(x + eye[i]) - 2 * f0 + self.value(x - eye[i])) / h ** 2
            for j in range(i + 1, n):
                pp = self.value(x + eye[i] + eye[j])
                pm = self.value(x + eye[i] - eye[j])
                mp = self.value(x - eye[i] + eye[j])
                mm = self.value(x - eye[i] - eye[j])
                out[..., i, j] = out[..., j, i] = (pp - pm - mp + mm) / (4 * h * h)
        return out

    @property
    def has_analytic_partials(self) -> bool:
        return self.grad is not None and self.hess is not None


def constant(c: float = 1.0) -> TestFunction:
    return TestFunction(
        value=lambda x: np.full(np.shape(x)[:-1], float(c)),
        grad=lambda x: np.zeros(np.shape(x)),
        hess=lambda x: np.zeros(np.shape(x) + (np.shape(x)[-1],)),
        name=f"const({c:g})",
    )


def monomial(powers: Sequence[int], coef: float = 1.0, name: str | None = None) -> TestFunction:
    """coef · Π_i x_i^{p_i} with exact partials."""
    p = np.asarray(powers, dtype=int)
    n = p.size

    def term(x, q, c):
        return c * np.prod(x ** np.maximum(q, 0), axis=-1)

    def value(x):
        return term(x, p, coef)

    def grad(x):
        out = np.empty(np.shape(x))
        for i in range(n):
            q = p.copy()
            q[i] -= 1
            out[..., i] = term(x, q, coef * p[i]) if p[i] > 0 else 0.0
        return out

    def hess(x):
        out = np.zeros(np.shape(x) + (n,))
        for i in range(n):
            for j in range(n):
                q = p.copy()
                q[i] -= 1
                c = coef * p[i]
                c *= q[j]
                q[j] -= 1
                if c != 0:
                    out[..., i, j] = term(x, q, c)
        return out

    label = name or "*".join(f"x{i + 1}^{k}" for i, k in enumerate(p) if k) or "1"
    return TestFunction(value, grad, hess, label)


def coordinate(i: int, n: int, name: str | None = None) -> TestFunction:
    p = np.zeros(n, dtype=int)
    p[i] = 1
    return monomial(p, name=name or f"x{i + 1}")


def squared_coordinate(i: int, n: int, name: str | None = None) -> TestFunction:
    p = np.zeros(n, dtype=int)
    p[i] = 2
    return monomial(p, name=name or f"x{i + 1}^2")


def coordinates_and_squares(names: Sequence[str]) -> list[TestFunction]:
    """The functions x_i and x_i² for every coordinate, labelled by name."""
    n = len(names)
    out = [coordinate(i, n, name=nm) for i, nm in enumerate(names)]
    out += [squared_coordinate(i, n, name=f"{nm}^2") for i, nm in enumerate(names)]
    return out


def from_callable(fn: Callable[[np.ndarray], np.ndarray], name: str = "f",
                  h_fd: float = H_FD, h_hess: float = H_FD_HESS) -> TestFunction:
    """Value-only test function; partials by finite differences."""
    return TestFunction(fn, name=name, h_fd=h_fd, h_hess=h_hess)


def trig_product(freqs: Sequence[int], phases: Sequence[float], name: str | None = None) -> TestFunction:
    """Π_i cos(k_i x_i + φ_i), a smooth periodic test function with exact partials."""
    k = np.asarray(freqs, dtype=float)
    ph = np.asarray(phases, dtype=float)
    n = k.size

    def parts(x):
        u = k * x + ph
        return np.cos(u), -k * np.sin(u), -k * k * np.cos(u)

    def prod_except(c, skip):
        keep = [i for i in range(n) if i not in skip]
        return np.prod(c[..., keep], axis=-1) if keep else np.ones(c.shape[:-1])

    def value(x):
        return np.prod(parts(x)[0], axis=-1)

    def grad(x):
        c, d1, _ = parts(x)
        return np.stack([d1[..., i] * prod_except(c, {i}) for i in range(n)], axis=-1)

    def hess(x):
        c, d1, d2 = parts(x)
        out = np.empty(np.shape(x) + (n,))
        for i in range(n):
            for j in range(n):
                if i == j:
                    out[..., i, i] = d2[..., i] * prod_except(c, {i})
                else:
                    out[..., i, j] = d1[..., i] * d1[..., j] * prod_except(c, {i, j})
        return out

    return TestFunction(value, grad, hess, name or f"cos{tuple(int(v) for v in k)}")
