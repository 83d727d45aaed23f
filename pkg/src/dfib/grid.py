"""Periodic staggered grids and the discrete vector-calculus operators on them.

Every grid function lives on one of four half-shifted subgrids of a uniform
periodic box ``[0, L]^dim`` with ``N`` cells per axis:

* ``CELL``  scalars at ``(i + 1/2) h`` in every direction,
* ``NODE``  scalars at ``i h`` in every direction,
* ``FACE``  vectors, component ``a`` at ``i h`` along axis ``a`` and
  ``(j + 1/2) h`` along the others,
* ``EDGE``  vectors, component ``a`` at ``(i + 1/2) h`` along axis ``a`` and
  ``j h`` along the others.

Arrays are indexed ``data[component, i_1, ..., i_dim]`` so that array axis
``k + 1`` is the physical axis ``x_{k+1}``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class Subgrid(enum.Enum):
    CELL = "cell"
    NODE = "node"
    FACE = "face"
    EDGE = "edge"

    @property
    def is_vector(self) -> bool:
        return self in (Subgrid.FACE, Subgrid.EDGE)


@dataclass(frozen=True)
class GridGeometry:
    dim: int
    n: int
    box_length: float = 1.0

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.n < 4:
            raise ValueError(f"need at least 4 cells per axis, got {self.n}")
        if not self.box_length > 0:
            raise ValueError("box_length must be positive")

    @property
    def h(self) -> float:
        return self.box_length / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def volume(self) -> float:
        return self.box_length**self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim


def n_components(subgrid: Subgrid, dim: int) -> int:
    return dim if subgrid.is_vector else 1


def offsets(subgrid: Subgrid, component: int, dim: int) -> tuple[float, ...]:
    """Position of sample ``i`` along each axis is ``(i + offset) * h``."""
    if subgrid is Subgrid.CELL:
        return (0.5,) * dim
    if subgrid is Subgrid.NODE:
        return (0.0,) * dim
    if subgrid is Subgrid.FACE:
        return tuple(0.0 if a == component else 0.5 for a in range(dim))
    return tuple(0.5 if a == component else 0.0 for a in range(dim))


@dataclass(frozen=True, eq=False)
class StaggeredField:
    """A grid function tagged with its subgrid.

    ``data`` always carries a leading component axis: length 1 for scalar
    subgrids and ``dim`` for vector subgrids.
    """

    geometry: GridGeometry
    subgrid: Subgrid
    data: np.ndarray

    def __post_init__(self):
        g = self.geometry
        want = (n_components(self.subgrid, g.dim),) + g.shape
        data = np.asarray(self.data, dtype=float)
        if data.shape != want:
            raise ValueError(f"{self.subgrid.value} field needs shape {want}, got {data.shape}")
        object.__setattr__(self, "data", data)

    @classmethod
    def zeros(cls, geometry: GridGeometry, subgrid: Subgrid) -> "StaggeredField":
        shape = (n_components(subgrid, geometry.dim),) + geometry.shape
        return cls(geometry, subgrid, np.zeros(shape))

    @classmethod
    def from_function(cls, geometry: GridGeometry, subgrid: Subgrid, func) -> "StaggeredField":
        """Sample ``func(component, *coords)`` at every point of the subgrid."""
        ncomp = n_components(subgrid, geometry.dim)
        data = np.empty((ncomp,) + geometry.shape)
        for c in range(ncomp):
            coords = coordinates(geometry, subgrid, c)
            data[c] = np.broadcast_to(func(c, *coords), geometry.shape)
        return cls(geometry, subgrid, data)

    @property
    def dim(self) -> int:
        return self.geometry.dim

    @property
    def is_vector(self) -> bool:
        return self.subgrid.is_vector

    @property
    def scalar(self) -> np.ndarray:
        if self.is_vector:
            raise ValueError("vector field has no single scalar component")
        return self.data[0]

    def with_data(self, data) -> "StaggeredField":
        return StaggeredField(self.geometry, self.subgrid, data)

    def _check_compatible(self, other: "StaggeredField"):
        if other.geometry != self.geometry or other.subgrid is not self.subgrid:
            raise ValueError("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, StaggeredField):
            self._check_compatible(other)
            return self.with_data(self.data + other.data)
        return self.with_data(self.data + np.reshape(other, (-1,) + (1,) * self.dim))

    def __sub__(self, other):
        if isinstance(other, StaggeredField):
            self._check_compatible(other)
            return self.with_data(self.data - other.data)
        return self.with_data(self.data - np.reshape(other, (-1,) + (1,) * self.dim))

    def __mul__(self, scale: float):
        return self.with_data(self.data * scale)

    __rmul__ = __mul__

    def __truediv__(self, scale: float):
        return self.with_data(self.data / scale)

    def __neg__(self):
        return self.with_data(-self.data)

    def __repr__(self):
        g = self.geometry
        return f"StaggeredField({self.subgrid.value}, dim={g.dim}, n={g.n}, L={g.box_length})"


def coordinates(geometry: GridGeometry, subgrid: Subgrid, component: int = 0):
    """Meshgrid of physical coordinates (indexing='ij') for one component."""
    h = geometry.h
    axes = [(np.arange(geometry.n) + o) * h for o in offsets(subgrid, component, geometry.dim)]
    return np.meshgrid(*axes, indexing="ij")


# -- one-dimensional staggered differences ---------------------------------


def _diff(arr: np.ndarray, axis: int, offset: float, h: float) -> np.ndarray:
    # offset 1/2 -> result at integer points (backward), 0 -> at half points (forward)
    if offset == 0.5:
        return (arr - np.roll(arr, 1, axis=axis)) / h
    return (np.roll(arr, -1, axis=axis) - arr) / h


def _diff_component(field: StaggeredField, comp: int, axis: int) -> np.ndarray:
    offs = offsets(field.subgrid, comp, field.dim)
    return _diff(field.data[comp], axis, offs[axis], field.geometry.h)


def grad_h(phi: StaggeredField) -> StaggeredField:
    """Cell -> Face or Node -> Edge."""
    if phi.is_vector:
        raise ValueError("grad_h takes a scalar field")
    target = Subgrid.FACE if phi.subgrid is Subgrid.CELL else Subgrid.EDGE
    data = np.stack([_diff_component(phi, 0, a) for a in range(phi.dim)])
    return StaggeredField(phi.geometry, target, data)


def div_h(v: StaggeredField) -> StaggeredField:
    """Face -> Cell or Edge -> Node."""
    if not v.is_vector:
        raise ValueError("div_h takes a vector field")
    target = Subgrid.CELL if v.subgrid is Subgrid.FACE else Subgrid.NODE
    total = sum(_diff_component(v, a, a) for a in range(v.dim))
    return StaggeredField(v.geometry, target, total[None])


def curl_h(v: StaggeredField) -> StaggeredField:
    """Discrete curl.

    3D: Face <-> Edge. 2D: Node scalar -> Face vector ``(D2 psi, -D1 psi)``,
    and Face vector -> Node scalar ``D1 v2 - D2 v1``.
    """
    g = v.geometry
    if v.subgrid is Subgrid.CELL:
        raise ValueError("curl_h is not defined on cell-centered fields")
    if g.dim == 2:
        if v.subgrid is Subgrid.NODE:
            d2 = _diff_component(v, 0, 1)
            d1 = _diff_component(v, 0, 0)
            return StaggeredField(g, Subgrid.FACE, np.stack([d2, -d1]))
        if v.subgrid is Subgrid.FACE:
            out = _diff_component(v, 1, 0) - _diff_component(v, 0, 1)
            return StaggeredField(g, Subgrid.NODE, out[None])
        raise ValueError("2D curl_h maps node scalars to faces and faces to node scalars")
    if not v.is_vector:
        raise ValueError("3D curl_h takes a vector field")
    target = Subgrid.EDGE if v.subgrid is Subgrid.FACE else Subgrid.FACE
    data = np.empty((3,) + g.shape)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        data[i] = _diff_component(v, k, j) - _diff_component(v, j, k)
    return StaggeredField(g, target, data)


def laplacian_h(field: StaggeredField) -> StaggeredField:
    """Compact (2 dim + 1)-point Laplacian, componentwise for vectors."""
    h2 = field.geometry.h ** 2
    data = field.data
    out = np.zeros_like(data)
    for a in range(field.dim):
        ax = a + 1
        out += np.roll(data, -1, axis=ax) - 2.0 * data + np.roll(data, 1, axis=ax)
    return field.with_data(out / h2)


def field_mean(field: StaggeredField) -> np.ndarray:
    """Per-component mean (the volume-weighted mean on a uniform grid)."""
    return field.data.reshape(field.data.shape[0], -1).mean(axis=1)


def inner(u: StaggeredField, v: StaggeredField) -> float:
    """Discrete inner product sum(u . v) h^dim."""
    u._check_compatible(v)
    return float(np.sum(u.data * v.data) * u.geometry.cell_volume)


def norm_inf(field: StaggeredField | np.ndarray) -> float:
    data = field.data if isinstance(field, StaggeredField) else np.asarray(field)
    return float(np.max(np.abs(data))) if data.size else 0.0


def norm_l2(field: StaggeredField | np.ndarray, h: float | None = None) -> float:
    """sqrt(sum |.|^2 h^dim); a bare array is one scalar component and needs ``h``."""
    if isinstance(field, StaggeredField):
        data, h, dim = field.data, field.geometry.h, field.dim
    else:
        data = np.asarray(field)
        dim = data.ndim
        if h is None:
            raise ValueError("norm_l2 of a bare array needs the mesh width")
    return float(np.sqrt(np.sum(data**2) * h**dim))


def restrict_2N_to_N(fine: StaggeredField, coarse_geometry: GridGeometry) -> StaggeredField:
    """Restrict a field from a 2N grid to an N grid on the same box.

    Along an axis where the samples sit at integer points the coarse location
    coincides with fine index ``2i`` and is sampled directly; along a
    half-shifted axis the coarse point lies midway between fine ``2i`` and
    ``2i + 1`` and the two are averaged.
    """
    fg = fine.geometry
    if (fg.dim != coarse_geometry.dim or fg.n != 2 * coarse_geometry.n
            or not np.isclose(fg.box_length, coarse_geometry.box_length)):
        raise ValueError("restriction needs a fine grid with exactly twice the cells on the same box")
    out = []
    for c in range(fine.data.shape[0]):
        arr = fine.data[c]
        for a, o in enumerate(offsets(fine.subgrid, c, fg.dim)):
            even = np.take(arr, np.arange(0, fg.n, 2), axis=a)
            if o == 0.5:
                odd = np.take(arr, np.arange(1, fg.n, 2), axis=a)
                arr = 0.5 * (even + odd)
            else:
                arr = even
        out.append(arr)
    return StaggeredField(coarse_geometry, fine.subgrid, np.stack(out))
