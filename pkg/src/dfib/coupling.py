"""Lagrangian-Eulerian transfer operators.

Two adjoint pairs are provided:

* the conventional staggered-grid pair (``ibmac_spread`` /
  ``ibmac_interpolate``), which moves each component with the regularized
  delta function on its own face subgrid;
* the divergence-free pair (``dfib_spread`` / ``dfib_interpolate``), which
  interpolates a discrete vector potential with the gradient of the delta
  function and takes its continuum curl, and spreads with the adjoint of
  that map. Both require periodic Poisson solves.

In 2D the vector potential reduces to a streamfunction on the node grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fluid import check_div_free
from .grid import (GridGeometry, StaggeredField, Subgrid, curl_h, field_mean,
                   offsets)
from .kernels import Kernel, get_kernel
from .poisson import (CostCounter, SpectralPlan, _count, plan_for,
                      solve_scalar_poisson, solve_vector_poisson)

DFIB = "DFIB"
IBMAC = "IBMAC"
METHODS = (DFIB, IBMAC)


@dataclass(frozen=True)
class MarkerSet:
    """Marker positions (M, dim) and Lagrangian quadrature weights (M,)."""

    positions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        w = np.broadcast_to(np.asarray(self.weights, dtype=float), (pos.shape[0],)).copy()
        if not np.all(np.isfinite(pos)):
            raise ValueError("marker positions must be finite")
        if np.any(w <= 0):
            raise ValueError("marker weights must be positive")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def moved(self, positions) -> "MarkerSet":
        return MarkerSet(positions, self.weights)


@dataclass(frozen=True)
class VectorPotential:
    """Discrete potential (node streamfunction in 2D, edge field in 3D) plus mean flow."""

    field: StaggeredField
    u0: np.ndarray


class Stencils:
    """Kernel weights of a point set against every staggered location.

    The one-dimensional factors depend only on the axis and on whether the
    subgrid is shifted along it, so they are computed once and reused for
    every component and derivative direction.
    """

    def __init__(self, points, kernel: Kernel, geometry: GridGeometry):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.points.shape[1] != geometry.dim:
            raise ValueError("point dimension does not match the grid")
        self.kernel = kernel
        self.geometry = geometry
        self._cache = {}

    def __len__(self):
        return self.points.shape[0]

    def _axis(self, axis: int, offset: float):
        key = (axis, offset)
        if key not in self._cache:
            g, w = self.geometry, self.kernel.half_width
            s = self.points[:, axis] / g.h - offset
            j = np.floor(s).astype(np.int64)[:, None] + np.arange(1 - w, w + 1)
            r = j - s[:, None]
            self._cache[key] = (j % g.n, self.kernel.phi(r), self.kernel.dphi(r))
        return self._cache[key]

    def weights(self, offs, deriv_axis: int | None = None):
        """Flat grid indices and tensor-product weights, each shaped (M, (2w)^dim).

        Weights are ``prod_a phi(r_a)`` with factor ``deriv_axis`` replaced by
        ``phi'(r) / h``; i.e. ``h^dim delta_h`` or ``h^dim d(delta_h)/dx``
        evaluated at ``x - X``.
        """
        g = self.geometry
        m = len(self)
        flat = np.zeros((m, 1), dtype=np.int64)
        wts = np.ones((m, 1))
        for a, o in enumerate(offs):
            idx, phi, dphi = self._axis(a, o)
            fac = dphi / g.h if a == deriv_axis else phi
            flat = (flat[:, :, None] * g.n + idx[:, None, :]).reshape(m, -1)
            wts = (wts[:, :, None] * fac[:, None, :]).reshape(m, -1)
        return flat, wts

    def gather(self, arr: np.ndarray, offs, deriv_axis: int | None = None) -> np.ndarray:
        flat, wts = self.weights(offs, deriv_axis)
        return np.einsum("ij,ij->i", arr.ravel()[flat], wts)

    def scatter(self, values: np.ndarray, offs, deriv_axis: int | None = None) -> np.ndarray:
        g = self.geometry
        flat, wts = self.weights(offs, deriv_axis)
        out = np.bincount(flat.ravel(), weights=(wts * values[:, None]).ravel(),
                          minlength=g.n**g.dim)
        return out.reshape(g.shape)


def _stencils(points, kernel, geometry) -> Stencils:
    if isinstance(points, Stencils):
        return points
    if isinstance(points, MarkerSet):
        points = points.positions
    return Stencils(points, get_kernel(kernel), geometry)


def _forces(markers: MarkerSet, F) -> np.ndarray:
    F = np.asarray(F, dtype=float).reshape(len(markers), markers.dim)
    return F * markers.weights[:, None]


# -- conventional staggered-grid IB ------------------------------------------


def ibmac_spread(markers: MarkerSet, F, kernel, geometry: GridGeometry,
                 counter: CostCounter | None = None, stencils: Stencils | None = None) -> StaggeredField:
    """f(x) = sum_m F_m delta_h(x - X_m) ds_m on each face subgrid."""
    st = stencils or _stencils(markers, kernel, geometry)
    q = _forces(markers, F) / geometry.cell_volume
    data = np.stack([st.scatter(q[:, a], offsets(Subgrid.FACE, a, geometry.dim))
                     for a in range(geometry.dim)])
    _count(counter, transfers=geometry.dim)
    return StaggeredField(geometry, Subgrid.FACE, data)


def ibmac_interpolate(u: StaggeredField, points, kernel, counter: CostCounter | None = None,
                      tracer: bool = False) -> np.ndarray:
    """U(X) = sum_x u(x) delta_h(x - X) h^dim, component by component."""
    g = u.geometry
    st = _stencils(points, kernel, g)
    out = np.stack([st.gather(u.data[a], offsets(Subgrid.FACE, a, g.dim))
                    for a in range(g.dim)], axis=1)
    _count(counter, **{("tracer" if tracer else "transfers"): g.dim})
    return out


# -- divergence-free IB --------------------------------------------------------


def build_vector_potential(u: StaggeredField, plan: SpectralPlan | None = None,
                           counter: CostCounter | None = None, check: bool = True) -> VectorPotential:
    """Discrete potential whose discrete curl reproduces ``u - mean(u)``.

    3D: ``-L a = curl u`` on the edge grid (this also enforces div a = 0).
    2D: ``L psi = -curl u`` on the node grid, so that rot psi = u - u0.
    """
    if u.subgrid is not Subgrid.FACE:
        raise ValueError("velocity must live on the face grid")
    if check:
        check_div_free(u)
    plan = plan or plan_for(u.geometry)
    w = curl_h(u)
    if u.dim == 2:
        pot = solve_scalar_poisson(-w, plan, counter)
    else:
        pot = solve_vector_poisson(w, plan, counter)
    return VectorPotential(pot, field_mean(u))


def dfib_interpolate(potential: VectorPotential, points, kernel,
                     counter: CostCounter | None = None, tracer: bool = False) -> np.ndarray:
    """Divergence-free velocity U(X) = u0 + sum_x a(x) x (grad delta_h)(x - X) h^dim.

    Works at arbitrary points. In 2D ``a = (0, 0, psi)`` so that
    ``U = u0 + sum psi (-d2 delta_h, d1 delta_h) h^2``.
    """
    pot = potential.field
    g = pot.geometry
    st = _stencils(points, kernel, g)
    out = np.empty((len(st), g.dim))
    if g.dim == 2:
        psi, node = pot.scalar, offsets(Subgrid.NODE, 0, 2)
        out[:, 0] = -st.gather(psi, node, deriv_axis=1)
        out[:, 1] = st.gather(psi, node, deriv_axis=0)
        n_transfers = 2
    else:
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            out[:, i] = (st.gather(pot.data[j], offsets(Subgrid.EDGE, j, 3), deriv_axis=k)
                         - st.gather(pot.data[k], offsets(Subgrid.EDGE, k, 3), deriv_axis=j))
        n_transfers = 6
    _count(counter, **{("tracer" if tracer else "transfers"): n_transfers})
    return out + potential.u0


def dfib_spread(markers: MarkerSet, F, kernel, geometry: GridGeometry,
                plan: SpectralPlan | None = None, counter: CostCounter | None = None,
                stencils: Stencils | None = None) -> StaggeredField:
    """Divergence-free force spreading, the adjoint of ``dfib_interpolate``.

    Builds ``g = sum_m (grad delta_h)(x - X_m) x F_m ds_m`` (edge grid in 3D,
    node scalar in 2D), solves ``-L f = curl_h g`` componentwise, and adds
    the uniform mean force ``sum_m F_m ds_m / V``.
    """
    st = stencils or _stencils(markers, kernel, geometry)
    plan = plan or plan_for(geometry)
    q = _forces(markers, F)
    scale = 1.0 / geometry.cell_volume
    if geometry.dim == 2:
        node = offsets(Subgrid.NODE, 0, 2)
        g = (st.scatter(q[:, 1], node, deriv_axis=0) - st.scatter(q[:, 0], node, deriv_axis=1)) * scale
        gfield = StaggeredField(geometry, Subgrid.NODE, g[None])
        _count(counter, transfers=2)
    else:
        data = np.empty((3,) + geometry.shape)
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            e = offsets(Subgrid.EDGE, i, 3)
            data[i] = (st.scatter(q[:, k], e, deriv_axis=j) - st.scatter(q[:, j], e, deriv_axis=k)) * scale
        gfield = StaggeredField(geometry, Subgrid.EDGE, data)
        _count(counter, transfers=6)
    f = solve_vector_poisson(curl_h(gfield), plan, counter)
    f0 = q.sum(axis=0) / geometry.volume
    return f + f0


# -- method dispatch ---------------------------------------------------------


def spread(method: str, markers: MarkerSet, F, kernel, geometry: GridGeometry,
           plan: SpectralPlan | None = None, counter: CostCounter | None = None) -> StaggeredField:
    if method == DFIB:
        return dfib_spread(markers, F, kernel, geometry, plan, counter)
    if method == IBMAC:
        return ibmac_spread(markers, F, kernel, geometry, counter)
    raise ValueError(f"unknown method {method!r}")


def interpolate(method: str, u: StaggeredField, point_sets, kernel,
                plan: SpectralPlan | None = None, counter: CostCounter | None = None,
                tracer_flags=None) -> list[np.ndarray]:
    """Velocities at several point sets from one velocity field.

    For DFIB the potential is computed once and shared by every set.
    ``tracer_flags[i]`` marks sets whose transfers are tallied separately.
    """
    tracer_flags = tracer_flags or [False] * len(point_sets)
    if method == DFIB:
        pot = build_vector_potential(u, plan, counter)
        return [dfib_interpolate(pot, pts, kernel, counter, tracer=t)
                for pts, t in zip(point_sets, tracer_flags)]
    if method == IBMAC:
        return [ibmac_interpolate(u, pts, kernel, counter, tracer=t)
                for pts, t in zip(point_sets, tracer_flags)]
    raise ValueError(f"unknown method {method!r}")
