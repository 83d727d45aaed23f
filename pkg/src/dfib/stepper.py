"""Second-order fluid-structure time integrator.

Each step moves the structure to a provisional half-step position, spreads
the elastic force from there, advances the fluid with Crank-Nicolson
viscosity and AB2 advection, and finally moves the structure with the
midpoint velocity. The very first step uses a midpoint Runge-Kutta
treatment of advection because AB2 needs one step of history.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .coupling import METHODS, MarkerSet, interpolate, spread
from .errors import MissingHistory
from .fluid import FluidState, advection, ns_step
from .kernels import Kernel, get_kernel
from .poisson import CostCounter, plan_for
from .structures import ForceModel


@dataclass(frozen=True)
class SimState:
    fluid: FluidState
    structure: object
    method: str
    kernel: Kernel
    force_model: ForceModel
    tracers: MarkerSet | None = None
    # tallies for the most recent step only
    counters: CostCounter = field(default_factory=CostCounter)
    # F*ds spread in the most recent step, per marker
    last_force: np.ndarray | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        object.__setattr__(self, "kernel", get_kernel(self.kernel))
        if self.structure.positions.shape[1] != self.fluid.geometry.dim:
            raise ValueError("structure and fluid dimensions differ")

    @property
    def t(self) -> float:
        return self.fluid.t

    @property
    def step_index(self) -> int:
        return self.fluid.step_index


def _point_sets(state: SimState):
    pts = [state.structure.positions]
    flags = [False]
    if state.tracers is not None:
        pts.append(state.tracers.positions)
        flags.append(True)
    return pts, flags


def _velocities(state, u, pts, flags, plan, counter):
    return interpolate(state.method, u, pts, state.kernel, plan, counter, flags)


def _half_step(state: SimState, dt: float, plan, counter):
    """Steps 1 and 2: provisional positions and the spread force density."""
    pts, flags = _point_sets(state)
    vel = _velocities(state, state.fluid.u, pts, flags, plan, counter)
    half = [x + 0.5 * dt * v for x, v in zip(pts, vel)]
    fds = state.force_model.force_times_ds(state.structure.moved(half[0]), state.t + 0.5 * dt)
    f = spread(state.method, MarkerSet(half[0], 1.0), fds, state.kernel,
               state.fluid.geometry, plan, counter)
    return pts, flags, half, fds, f


def _finish(state, dt, pts, flags, half, u_next, n_now, fds, plan, counter) -> SimState:
    """Step 4: move markers and tracers with the midpoint velocity."""
    u_mid = 0.5 * (u_next + state.fluid.u)
    vel = interpolate(state.method, u_mid, half, state.kernel, plan, counter, flags)
    new = [x + dt * v for x, v in zip(pts, vel)]
    tracers = state.tracers.moved(new[1]) if state.tracers is not None else None
    fluid = replace(state.fluid, u=u_next, n_prev=n_now, t=state.t + dt,
                    step_index=state.step_index + 1)
    return replace(state, fluid=fluid, structure=state.structure.moved(new[0]),
                   tracers=tracers, counters=counter, last_force=fds)


def step(state: SimState, dt: float) -> SimState:
    """One step of the main scheme; needs the AB2 history from a previous step."""
    if state.fluid.n_prev is None:
        raise MissingHistory("call rk2_bootstrap for the first step")
    plan = plan_for(state.fluid.geometry)
    counter = CostCounter()
    pts, flags, half, fds, f = _half_step(state, dt, plan, counter)
    n_now = advection(state.fluid.u)
    n_tilde = 1.5 * n_now - 0.5 * state.fluid.n_prev
    u_next, _ = ns_step(state.fluid, f, dt, n_tilde=n_tilde, plan=plan, counter=counter)
    return _finish(state, dt, pts, flags, half, u_next, n_now, fds, plan, counter)


def rk2_bootstrap(state: SimState, dt: float) -> SimState:
    """First step: the advection term is evaluated at a midpoint predictor.

    The predictor ``u*`` comes from a half step with advection frozen at
    ``u^n``; the full step then uses ``N(u*)``. The structure update is the
    same as in the main scheme. Stores ``N(u^n)`` for the following AB2 step.
    """
    plan = plan_for(state.fluid.geometry)
    counter = CostCounter()
    pts, flags, half, fds, f = _half_step(state, dt, plan, counter)
    n_now = advection(state.fluid.u)
    u_star, _ = ns_step(state.fluid, f, 0.5 * dt, n_tilde=n_now, plan=plan, counter=counter)
    u_next, _ = ns_step(state.fluid, f, dt, n_tilde=advection(u_star), plan=plan, counter=counter)
    return _finish(state, dt, pts, flags, half, u_next, n_now, fds, plan, counter)


def advance(state: SimState, dt: float) -> SimState:
    """Bootstrap on the first call, main scheme afterwards."""
    if state.fluid.n_prev is None:
        return rk2_bootstrap(state, dt)
    return step(state, dt)
