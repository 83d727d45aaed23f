"""Divergence-free immersed boundary method on periodic staggered grids."""

from .coupling import (DFIB, IBMAC, MarkerSet, VectorPotential, build_vector_potential,
                       dfib_interpolate, dfib_spread, ibmac_interpolate, ibmac_spread)
from .fluid import FluidState, advection, ns_step
from .grid import GridGeometry, StaggeredField, Subgrid, curl_h, div_h, grad_h, laplacian_h
from .kernels import available_kernels, get_kernel, register_kernel
from .poisson import CostCounter, SpectralPlan, plan_for, solve_scalar_poisson, solve_vector_poisson
from .stepper import SimState, advance, rk2_bootstrap, step
from .structures import (ClosedCurve, ForceModel, TriMesh, make_circle, make_ellipse,
                         make_icosphere, make_perturbed_circle)

__version__ = "0.1.0"
