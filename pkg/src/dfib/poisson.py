"""FFT solvers for periodic scalar and vector Poisson problems on staggered grids.

The compact Laplacian is diagonalized by the discrete Fourier transform on
every subgrid with the same symbol, so one plan serves Cell, Node, Face and
Edge data alike.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .errors import NonZeroMeanRhs
from .grid import GridGeometry, StaggeredField

MEAN_TOL = 1e-11


@dataclass
class CostCounter:
    """Tallies of the two cost-dominating operations of an IB step."""

    poisson_solves: int = 0
    transfers: int = 0
    tracer_transfers: int = 0

    def reset(self):
        self.poisson_solves = 0
        self.transfers = 0
        self.tracer_transfers = 0

    def as_dict(self) -> dict:
        return {
            "poisson_solves": self.poisson_solves,
            "transfers": self.transfers,
            "tracer_transfers": self.tracer_transfers,
        }


def _count(counter: CostCounter | None, solves: int = 0, transfers: int = 0, tracer: int = 0):
    if counter is not None:
        counter.poisson_solves += solves
        counter.transfers += transfers
        counter.tracer_transfers += tracer


class SpectralPlan:
    """Cached wavenumber symbols for one periodic geometry.

    Uses real-to-complex transforms along the last axis. ``shift_fwd[a]`` is
    the symbol of the forward difference ``(v[i+1] - v[i]) / h`` along axis
    ``a``; the backward difference has the conjugate symbol.
    """

    def __init__(self, geometry: GridGeometry):
        self.geometry = geometry
        n, dim, h = geometry.n, geometry.dim, geometry.h
        freqs = [np.fft.fftfreq(n) * n] * (dim - 1) + [np.fft.rfftfreq(n) * n]
        theta = np.meshgrid(*[2 * np.pi * f / n for f in freqs], indexing="ij", sparse=True)
        self.shift_fwd = [(np.exp(1j * t) - 1.0) / h for t in theta]
        lam = sum(-4.0 / h**2 * np.sin(t / 2) ** 2 for t in theta)
        self.eigenvalues = np.broadcast_to(lam, tuple(len(f) for f in freqs)).copy()
        self.eigenvalues.flags.writeable = False
        inv = np.zeros_like(self.eigenvalues)
        nz = self.eigenvalues != 0
        inv[nz] = 1.0 / self.eigenvalues[nz]
        inv.flags.writeable = False
        self._inv_eigenvalues = inv
        # transform work in the standard n log n operation model
        self.work_units = 0.0

    @property
    def spectral_shape(self):
        return self.eigenvalues.shape

    def _tally(self):
        size = self.geometry.n**self.geometry.dim
        self.work_units += size * np.log2(size)

    def forward(self, arr: np.ndarray) -> np.ndarray:
        self._tally()
        return scipy.fft.rfftn(arr)

    def inverse(self, arr_hat: np.ndarray) -> np.ndarray:
        self._tally()
        return scipy.fft.irfftn(arr_hat, s=self.geometry.shape)

    def inverse_eigenvalues(self) -> np.ndarray:
        """1 / lambda(k) with the zero mode mapped to 0."""
        return self._inv_eigenvalues


def _prepare_rhs(arr: np.ndarray) -> np.ndarray:
    mean = arr.mean()
    scale = np.max(np.abs(arr)) if arr.size else 0.0
    if abs(mean) > MEAN_TOL * scale:
        raise NonZeroMeanRhs(
            f"right-hand side mean {mean:.3e} exceeds {MEAN_TOL:g} * max|rhs| = {MEAN_TOL * scale:.3e}"
        )
    return arr - mean


def _solve_component(arr: np.ndarray, plan: SpectralPlan, sign: float) -> np.ndarray:
    rhs_hat = plan.forward(_prepare_rhs(arr))
    return plan.inverse(sign * rhs_hat * plan.inverse_eigenvalues())


def solve_scalar_poisson(rhs: StaggeredField, plan: SpectralPlan,
                         counter: CostCounter | None = None) -> StaggeredField:
    """Zero-mean solution of ``L_h u = rhs``, componentwise for vector input.

    Raises NonZeroMeanRhs when a component of ``rhs`` has a mean beyond
    roundoff, since the periodic problem is then unsolvable.
    """
    _check_plan(rhs, plan)
    out = np.stack([_solve_component(c, plan, 1.0) for c in rhs.data])
    _count(counter, solves=rhs.data.shape[0])
    return rhs.with_data(out)


def solve_vector_poisson(rhs: StaggeredField, plan: SpectralPlan,
                         counter: CostCounter | None = None) -> StaggeredField:
    """Zero-mean solution of ``-L_h a = rhs`` for a vector field, one scalar solve per component."""
    _check_plan(rhs, plan)
    if not rhs.is_vector:
        raise ValueError("solve_vector_poisson takes a vector field")
    out = np.stack([_solve_component(c, plan, -1.0) for c in rhs.data])
    _count(counter, solves=rhs.data.shape[0])
    return rhs.with_data(out)


def _check_plan(field: StaggeredField, plan: SpectralPlan):
    if field.geometry != plan.geometry:
        raise ValueError("field and plan geometries differ")


@functools.lru_cache(maxsize=16)
def plan_for(geometry: GridGeometry) -> SpectralPlan:
    """Shared plan per geometry."""
    return SpectralPlan(geometry)
