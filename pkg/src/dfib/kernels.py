"""One-dimensional IB kernels and the tensor-product regularized delta function."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Kernel:
    """A compactly supported even kernel phi(r) with phi(r) = 0 for |r| >= half_width.

    ``value``, ``derivative`` and (optionally) ``second_derivative`` are
    vectorized callables of the signed offset ``r`` in grid units.
    """

    name: str
    half_width: int
    smoothness: int
    value: ArrayFn
    derivative: ArrayFn
    second_derivative: ArrayFn | None = None

    def phi(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(np.abs(r) < self.half_width, self.value(r), 0.0)

    def dphi(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(np.abs(r) < self.half_width, self.derivative(r), 0.0)

    def d2phi(self, r):
        if self.second_derivative is None:
            raise NotImplementedError(f"kernel {self.name!r} has no second derivative")
        r = np.asarray(r, dtype=float)
        return np.where(np.abs(r) < self.half_width, self.second_derivative(r), 0.0)


def _piecewise(r, pieces, odd=False):
    """Evaluate polynomial pieces on [k, k+1) in |r|; coefficients low-to-high."""
    a = np.abs(r)
    out = np.zeros_like(a)
    for k, coeffs in enumerate(pieces):
        mask = (a >= k) & (a < k + 1)
        out[mask] = np.polynomial.polynomial.polyval(a[mask], coeffs)
    return np.sign(r) * out if odd else out


def _poly_kernel(name, smoothness, pieces):
    P = np.polynomial.Polynomial
    polys = [P(c) for c in pieces]
    d1 = [p.deriv().coef for p in polys]
    d2 = [p.deriv(2).coef for p in polys]
    return Kernel(
        name=name,
        half_width=len(pieces),
        smoothness=smoothness,
        value=lambda r: _piecewise(r, pieces),
        derivative=lambda r: _piecewise(r, d1, odd=True),
        second_derivative=lambda r: _piecewise(r, d2),
    )


BSPLINE4 = _poly_kernel(
    "bspline4",
    2,
    [
        [2 / 3, 0.0, -1.0, 0.5],
        [4 / 3, -2.0, 1.0, -1 / 6],
    ],
)

BSPLINE6 = _poly_kernel(
    "bspline6",
    4,
    [
        [11 / 20, 0.0, -1 / 2, 0.0, 1 / 4, -1 / 12],
        [17 / 40, 5 / 8, -7 / 4, 5 / 4, -3 / 8, 1 / 24],
        [81 / 40, -27 / 8, 9 / 4, -3 / 4, 1 / 8, -1 / 120],
    ],
)


def _std4_value(r):
    a = np.abs(r)
    inner = a < 1
    out = np.zeros_like(a)
    ai = a[inner]
    out[inner] = (3 - 2 * ai + np.sqrt(1 + 4 * ai - 4 * ai**2)) / 8
    ao = a[~inner]
    out[~inner] = (5 - 2 * ao - np.sqrt(np.maximum(-7 + 12 * ao - 4 * ao**2, 0.0))) / 8
    return out


def _std4_derivative(r):
    a = np.abs(r)
    inner = a < 1
    out = np.zeros_like(a)
    ai = a[inner]
    out[inner] = (-2 + (2 - 4 * ai) / np.sqrt(1 + 4 * ai - 4 * ai**2)) / 8
    ao = a[~inner]
    out[~inner] = (-2 - (6 - 4 * ao) / np.sqrt(np.maximum(-7 + 12 * ao - 4 * ao**2, 1e-300))) / 8
    return np.sign(r) * out


def _std4_second(r):
    a = np.abs(r)
    inner = a < 1
    out = np.zeros_like(a)
    ai = a[inner]
    out[inner] = -1.0 / (1 + 4 * ai - 4 * ai**2) ** 1.5
    ao = a[~inner]
    out[~inner] = 1.0 / np.maximum(-7 + 12 * ao - 4 * ao**2, 1e-300) ** 1.5
    return out


STD4 = Kernel("std4", 2, 1, _std4_value, _std4_derivative, _std4_second)

_REGISTRY: dict[str, Kernel] = {k.name: k for k in (STD4, BSPLINE4, BSPLINE6)}
# user-supplied slots; their closed forms are not built in
PLUGGABLE = ("c3five", "c3six")


def register_kernel(name: str, value: ArrayFn, derivative: ArrayFn, half_width: int,
                    smoothness: int, second_derivative: ArrayFn | None = None) -> Kernel:
    """Install an externally supplied kernel, e.g. for the ``c3five``/``c3six`` slots."""
    if name in ("std4", "bspline4", "bspline6"):
        raise ValueError(f"kernel {name!r} is built in and cannot be replaced")
    kernel = Kernel(name, int(half_width), int(smoothness), value, derivative, second_derivative)
    _REGISTRY[name] = kernel
    return kernel


def get_kernel(name: str | Kernel) -> Kernel:
    if isinstance(name, Kernel):
        return name
    try:
        return _REGISTRY[name]
    except KeyError:
        if name in PLUGGABLE:
            raise KeyError(f"kernel {name!r} must be supplied with register_kernel() before use") from None
        raise KeyError(f"unknown kernel {name!r}; choose from {available_kernels()}") from None


def available_kernels() -> list[str]:
    return sorted(set(_REGISTRY) | set(PLUGGABLE))


def delta_h(kernel: Kernel, offset, h: float) -> np.ndarray:
    """delta_h(x) = h^-dim prod_a phi(x_a / h); ``offset`` has shape (..., dim)."""
    r = np.asarray(offset, dtype=float) / h
    dim = r.shape[-1]
    return np.prod(kernel.phi(r), axis=-1) / h**dim


def grad_delta_h(kernel: Kernel, offset, h: float) -> np.ndarray:
    """Gradient of delta_h with respect to its argument; shape (..., dim)."""
    r = np.asarray(offset, dtype=float) / h
    dim = r.shape[-1]
    vals = kernel.phi(r)
    ders = kernel.dphi(r)
    out = np.empty(r.shape)
    for a in range(dim):
        factors = vals.copy()
        factors[..., a] = ders[..., a]
        out[..., a] = np.prod(factors, axis=-1)
    return out / h ** (dim + 1)
