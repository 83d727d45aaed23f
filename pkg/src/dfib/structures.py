"""Immersed structures: closed curves, triangulated spheres, tracers and elastic forces."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coupling import MarkerSet
from .errors import DegenerateFace, DegenerateSegment


@dataclass(frozen=True)
class ClosedCurve:
    """Markers X_0..X_{M-1} around a closed curve; index M wraps to 0.

    ``ds`` is the uniform parameter spacing 2*pi/M and is also the marker
    quadrature weight used for spreading.
    """

    markers: MarkerSet

    def __post_init__(self):
        if len(self.markers) < 3:
            raise ValueError("a closed curve needs at least 3 markers")

    @property
    def M(self) -> int:
        return len(self.markers)

    @property
    def ds(self) -> float:
        return 2 * math.pi / self.M

    @property
    def positions(self) -> np.ndarray:
        return self.markers.positions

    def moved(self, positions) -> "ClosedCurve":
        return ClosedCurve(self.markers.moved(positions))

    @classmethod
    def from_positions(cls, positions) -> "ClosedCurve":
        positions = np.asarray(positions, dtype=float)
        return cls(MarkerSet(positions, 2 * math.pi / len(positions)))


@dataclass(frozen=True)
class TriMesh:
    """Triangulated closed surface; faces are counterclockwise seen from outside."""

    vertices: MarkerSet
    faces: np.ndarray
    level: int = 0

    def __post_init__(self):
        faces = np.asarray(self.faces, dtype=np.int64)
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise ValueError("faces must be an (F, 3) index array")
        object.__setattr__(self, "faces", faces)

    @property
    def positions(self) -> np.ndarray:
        return self.vertices.positions

    def moved(self, positions) -> "TriMesh":
        return TriMesh(self.vertices.moved(positions), self.faces, self.level)

    def edges(self) -> np.ndarray:
        e = np.concatenate([self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def edge_lengths(self) -> np.ndarray:
        e = self.edges()
        x = self.positions
        return np.linalg.norm(x[e[:, 0]] - x[e[:, 1]], axis=1)


# -- curve generators --------------------------------------------------------


def _params(M: int) -> np.ndarray:
    if M < 3:
        raise ValueError("M must be at least 3")
    return 2 * np.pi * np.arange(M) / M


def make_circle(geom, R: float, center=None, M: int = 64) -> ClosedCurve:
    """Circle of radius R; ``center`` defaults to the middle of the box."""
    s = _params(M)
    c = np.full(2, geom.box_length / 2) if center is None else np.asarray(center, dtype=float)
    pos = np.stack([c[0] + R * np.cos(s), c[1] + R * np.sin(s)], axis=1)
    return ClosedCurve.from_positions(pos)


def make_ellipse(geom, a_frac: float, b_frac: float, M: int) -> ClosedCurve:
    """L * (1/2 + a_frac cos s, 1/2 + b_frac sin s)."""
    s = _params(M)
    L = geom.box_length
    pos = L * np.stack([0.5 + a_frac * np.cos(s), 0.5 + b_frac * np.sin(s)], axis=1)
    return ClosedCurve.from_positions(pos)


def make_perturbed_circle(geom, R: float, eps0: float, p: int, M: int, center=None) -> ClosedCurve:
    """R (1 + eps0 cos(p s)) r_hat(s) about ``center`` (default: box middle)."""
    s = _params(M)
    c = np.full(2, geom.box_length / 2) if center is None else np.asarray(center, dtype=float)
    r = R * (1 + eps0 * np.cos(p * s))
    pos = np.stack([c[0] + r * np.cos(s), c[1] + r * np.sin(s)], axis=1)
    return ClosedCurve.from_positions(pos)


def markers_for_spacing(perimeter: float, h_s: float) -> int:
    """Marker count giving physical spacing close to ``h_s``."""
    return max(3, int(round(perimeter / h_s)))


def ellipse_perimeter(a: float, b: float) -> float:
    # Ramanujan's second approximation, plenty for picking M
    hh = ((a - b) / (a + b)) ** 2
    return math.pi * (a + b) * (1 + 3 * hh / (10 + math.sqrt(4 - 3 * hh)))


# -- icosphere ---------------------------------------------------------------


def _icosahedron():
    t = (1 + math.sqrt(5)) / 2
    v = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], dtype=float)
    f = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ])
    return v / np.linalg.norm(v, axis=1, keepdims=True), f


def _subdivide(v: np.ndarray, f: np.ndarray):
    edges = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    uniq, inv = np.unique(np.sort(edges, axis=1), axis=0, return_inverse=True)
    mid = v[uniq[:, 0]] + v[uniq[:, 1]]
    mid /= np.linalg.norm(mid, axis=1, keepdims=True)
    nf = len(f)
    m = (inv.ravel() + len(v)).reshape(3, nf)
    m01, m12, m20 = m
    a, b, c = f.T
    new_f = np.concatenate([
        np.stack([a, m01, m20], 1), np.stack([b, m12, m01], 1),
        np.stack([c, m20, m12], 1), np.stack([m01, m12, m20], 1),
    ])
    return np.concatenate([v, mid]), new_f


def make_icosphere(level: int, R: float, center=(0.5, 0.5, 0.5)) -> TriMesh:
    """Icosahedron refined ``level`` times; vertices projected to radius R each level.

    Quadrature weights are the per-vertex share of area, 1/3 of adjacent
    faces. They only matter for IBMAC/DFIB spreading of force densities;
    3D force models return F*ds directly.
    """
    if level < 0:
        raise ValueError("level must be non-negative")
    v, f = _icosahedron()
    for _ in range(level):
        v, f = _subdivide(v, f)
    pos = R * v + np.asarray(center, dtype=float)
    return TriMesh(MarkerSet(pos, _vertex_areas(pos, f)), f, level)


def _vertex_areas(pos, faces):
    a, b, c = (pos[faces[:, i]] for i in range(3))
    area = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    w = np.zeros(len(pos))
    for i in range(3):
        np.add.at(w, faces[:, i], area / 3)
    return w


def level_for_spacing(R: float, h_s: float, max_level: int = 7) -> int:
    """Refinement level whose mean edge length is closest to ``h_s``."""
    best, best_err = 0, math.inf
    v, f = _icosahedron()
    for level in range(max_level + 1):
        mesh = TriMesh(MarkerSet(R * v, 1.0), f, level)
        err = abs(mesh.edge_lengths().mean() - h_s)
        if err < best_err:
            best, best_err = level, err
        v, f = _subdivide(v, f)
    return best


# -- tracers -----------------------------------------------------------------


def make_tracers(shape_fn, M: int, multiplier: int) -> MarkerSet:
    """Forceless markers sampled ``multiplier`` times more densely than M.

    ``shape_fn(K)`` must return the structure's initial analytic shape
    sampled at K parameter-uniform points (e.g. ``lambda K: make_circle(g, R, M=K)``).
    """
    if multiplier < 1:
        raise ValueError("multiplier must be >= 1")
    shape = shape_fn(M * int(multiplier))
    return shape.markers if hasattr(shape, "markers") else shape.vertices


# -- forces ------------------------------------------------------------------


@dataclass(frozen=True)
class ForceModel:
    """Elastic law for the structure.

    kind: ``surface_tension_2d`` (gamma), ``springs`` (kappa, or K_c/tau/omega0
    for parametric stiffness) or ``surface_tension_3d`` (gamma).
    """

    kind: str
    params: dict = field(default_factory=dict)

    KINDS = ("surface_tension_2d", "springs", "surface_tension_3d", "none")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown force model {self.kind!r}")
        p = self.params
        if self.kind.startswith("surface") and not p.get("gamma", 0) > 0:
            raise ValueError("surface tension needs gamma > 0")
        if self.kind == "springs":
            if "K_c" in p:
                if not p["K_c"] > 0 or not abs(p.get("tau", 0.0)) < 1:
                    raise ValueError("parametric stiffness needs K_c > 0 and |tau| < 1")
            elif not p.get("kappa", 0) > 0:
                raise ValueError("springs need kappa > 0")

    def stiffness(self, t: float) -> float:
        p = self.params
        if "K_c" in p:
            return parametric_stiffness(t, p["K_c"], p.get("tau", 0.0), p.get("omega0", 0.0))
        return p["kappa"]

    def force_times_ds(self, structure, t: float) -> np.ndarray:
        """Per-marker F*ds at time ``t``; zero rows for ``none``."""
        if self.kind == "surface_tension_2d":
            return surface_tension_force_2d(structure, self.params["gamma"])
        if self.kind == "springs":
            return spring_force(structure, self.stiffness(t)) * structure.ds
        if self.kind == "surface_tension_3d":
            return surface_tension_force_3d(structure, self.params["gamma"])
        return np.zeros_like(structure.positions)


def surface_tension_force_2d(curve: ClosedCurve, gamma: float) -> np.ndarray:
    """F_m ds = gamma (t_{m+1/2} - t_{m-1/2}), the difference of unit tangents."""
    x = curve.positions
    d = np.roll(x, -1, axis=0) - x
    length = np.linalg.norm(d, axis=1)
    scale = np.max(np.abs(x)) if x.size else 1.0
    if np.any(length <= 1e-14 * max(scale, 1.0)):
        raise DegenerateSegment("adjacent markers coincide")
    t = d / length[:, None]
    return gamma * (t - np.roll(t, 1, axis=0))


def polygon_length(curve: ClosedCurve) -> float:
    x = curve.positions
    return float(np.linalg.norm(np.roll(x, -1, axis=0) - x, axis=1).sum())


def spring_force(curve: ClosedCurve, kappa: float) -> np.ndarray:
    """F_m = kappa / ds^2 (X_{m+1} - 2 X_m + X_{m-1})."""
    x = curve.positions
    return kappa / curve.ds**2 * (np.roll(x, -1, axis=0) - 2 * x + np.roll(x, 1, axis=0))


def spring_energy(curve: ClosedCurve, kappa: float) -> float:
    x = curve.positions
    d = np.roll(x, -1, axis=0) - x
    return 0.5 * kappa / curve.ds * float(np.sum(d**2))


def parametric_stiffness(t, K_c: float, tau: float, omega0: float):
    return K_c * (1 + 2 * tau * np.sin(omega0 * t))


def mesh_area(mesh: TriMesh) -> float:
    x = mesh.positions
    a, b, c = (x[mesh.faces[:, i]] for i in range(3))
    return 0.5 * float(np.linalg.norm(np.cross(b - a, c - a), axis=1).sum())


def surface_tension_force_3d(mesh: TriMesh, gamma: float) -> np.ndarray:
    """F_k ds_k = -gamma dA/dX_k for the total triangulated area A."""
    x = mesh.positions
    a, b, c = (x[mesh.faces[:, i]] for i in range(3))
    cr = np.cross(b - a, c - a)
    norm = np.linalg.norm(cr, axis=1)
    if np.any(norm <= 1e-14 * max(np.max(np.abs(x)), 1.0) ** 2):
        raise DegenerateFace("zero-area face")
    n = cr / norm[:, None]
    out = np.zeros_like(x)
    for idx, g in ((0, np.cross(b - c, n)), (1, np.cross(c - a, n)), (2, np.cross(a - b, n))):
        for k in range(3):
            out[:, k] -= 0.5 * gamma * np.bincount(mesh.faces[:, idx], g[:, k], minlength=len(x))
    return out
