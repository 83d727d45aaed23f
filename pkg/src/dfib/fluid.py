"""Incompressible Navier-Stokes on the periodic staggered grid.

The momentum equation is advanced with Crank-Nicolson viscosity and an
explicitly supplied advection term. On a fully periodic grid the coupled
velocity-pressure system diagonalizes in Fourier space, so it is solved
exactly rather than by a fractional-step projection.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import MissingHistory, NonDivFreeInput, ZeroDt
from .grid import GridGeometry, StaggeredField, Subgrid, div_h, laplacian_h, norm_inf
from .poisson import CostCounter, SpectralPlan, _count, plan_for

DIV_TOL = 1e-11


@dataclass(frozen=True)
class FluidState:
    u: StaggeredField
    rho: float = 1.0
    mu: float = 0.1
    t: float = 0.0
    step_index: int = 0
    n_prev: StaggeredField | None = None

    def __post_init__(self):
        if self.u.subgrid is not Subgrid.FACE:
            raise ValueError("velocity must live on the face grid")
        if not (self.rho > 0 and self.mu > 0):
            raise ValueError("rho and mu must be positive")

    @property
    def geometry(self) -> GridGeometry:
        return self.u.geometry

    @classmethod
    def at_rest(cls, geometry: GridGeometry, rho: float, mu: float) -> "FluidState":
        return cls(StaggeredField.zeros(geometry, Subgrid.FACE), rho, mu)


def divergence_residual(u: StaggeredField) -> float:
    """max |div_h u| scaled by h, comparable to max |u|."""
    return norm_inf(div_h(u)) * u.geometry.h


def check_div_free(u: StaggeredField, tol: float = DIV_TOL):
    res = divergence_residual(u)
    if res > tol * max(norm_inf(u), 1e-300):
        raise NonDivFreeInput(f"h * max|div u| = {res:.3e} exceeds {tol:g} * max|u|")


def _avg_transverse(ub: np.ndarray, alpha: int, beta: int) -> np.ndarray:
    # four u_beta samples around each alpha-face point
    s = ub + np.roll(ub, 1, axis=alpha)
    return 0.25 * (s + np.roll(s, -1, axis=beta))


def _d2h(arr: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (np.roll(arr, -1, axis=axis) - np.roll(arr, 1, axis=axis)) / (2 * h)


def advection(u: StaggeredField) -> StaggeredField:
    """Skew-symmetric advection term N(u) on the face grid.

    For component ``a`` the advecting velocity is collocated on the
    ``a``-faces (the transverse components are four-point averages) and both
    the advective and conservative halves use wide ``2h`` central differences.
    """
    if u.subgrid is not Subgrid.FACE:
        raise ValueError("advection acts on face-centered velocity")
    dim, h = u.dim, u.geometry.h
    out = np.empty_like(u.data)
    for a in range(dim):
        ua = u.data[a]
        acc = np.zeros_like(ua)
        for b in range(dim):
            ub = ua if b == a else _avg_transverse(u.data[b], a, b)
            acc += ub * _d2h(ua, b, h) + _d2h(ub * ua, b, h)
        out[a] = 0.5 * acc
    return u.with_data(out)


def ns_step(state: FluidState, f_half: StaggeredField, dt: float, *,
            n_tilde: StaggeredField | None = None, plan: SpectralPlan | None = None,
            counter: CostCounter | None = None, check_input: bool = True):
    """Advance the velocity one step; returns ``(u_next, p_half)``.

    ``n_tilde`` is the advection term at the half step. When omitted it is the
    AB2 extrapolation ``3/2 N(u^n) - 1/2 N^{n-1}``, which needs the stored
    history ``state.n_prev``.
    """
    if not dt > 0:
        raise ZeroDt(f"time step must be positive, got {dt}")
    u = state.u
    g = u.geometry
    if f_half.subgrid is not Subgrid.FACE or f_half.geometry != g:
        raise ValueError("force density must be a face field on the fluid grid")
    if check_input:
        check_div_free(u)
    if n_tilde is None:
        if state.n_prev is None:
            raise MissingHistory("AB2 needs N^{n-1}; bootstrap the first step")
        n_tilde = 1.5 * advection(u) - 0.5 * state.n_prev
    plan = plan or plan_for(g)
    rho, mu = state.rho, state.mu

    rhs = (rho / dt) * u - rho * n_tilde + (0.5 * mu) * laplacian_h(u) + f_half
    rhs_hat = [plan.forward(c) for c in rhs.data]
    div_hat = sum(plan.shift_fwd[a] * rhs_hat[a] for a in range(g.dim))
    p_hat = div_hat * plan.inverse_eigenvalues()
    helmholtz = rho / dt - 0.5 * mu * plan.eigenvalues
    u_next = np.stack([
        plan.inverse((rhs_hat[a] + np.conj(plan.shift_fwd[a]) * p_hat) / helmholtz)
        for a in range(g.dim)
    ])
    p = plan.inverse(p_hat)
    # dim Helmholtz solves plus one pressure Poisson solve
    _count(counter, solves=g.dim + 1)
    return u.with_data(u_next), StaggeredField(g, Subgrid.CELL, p[None])


def advance(state: FluidState, u_next: StaggeredField, n_now: StaggeredField, dt: float) -> FluidState:
    """New state after a step, storing ``n_now`` as the AB2 history."""
    return replace(state, u=u_next, n_prev=n_now, t=state.t + dt, step_index=state.step_index + 1)


def kinetic_energy(u: StaggeredField) -> float:
    return 0.5 * float(np.sum(u.data**2)) * u.geometry.cell_volume
