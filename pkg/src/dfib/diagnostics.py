"""Measurements: enclosed area and volume, error norms, spline resampling, mode amplitudes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import SplineSingular
from .grid import StaggeredField, norm_inf, restrict_2N_to_N


def _positions(obj) -> np.ndarray:
    if hasattr(obj, "positions"):
        return np.asarray(obj.positions, dtype=float)
    return np.asarray(obj, dtype=float)


def polygon_area(curve) -> float:
    """Shoelace area of the marker polygon (orientation independent)."""
    x = _positions(curve)
    if len(x) < 3:
        raise ValueError("need at least 3 markers")
    xn = np.roll(x, -1, axis=0)
    return abs(0.5 * float(np.sum(x[:, 0] * xn[:, 1] - xn[:, 0] * x[:, 1])))


def periodic_spline(curve) -> CubicSpline:
    """Periodic cubic spline X(s) through the markers at s_m = 2 pi m / M."""
    x = _positions(curve)
    M = len(x)
    if M < 4:
        raise ValueError("spline needs at least 4 markers")
    s = 2 * np.pi * np.arange(M + 1) / M
    y = np.concatenate([x, x[:1]])
    try:
        spl = CubicSpline(s, y, bc_type="periodic", axis=0)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise SplineSingular(str(exc)) from exc
    if not np.all(np.isfinite(spl.c)):
        raise SplineSingular("non-finite spline coefficients")
    return spl


def spline_area(curve) -> float:
    """Area enclosed by the periodic cubic spline, integrated exactly.

    With x = sum_i a_i t^i and y = sum_j b_j t^j on a piece of width w,
    the integral of x y' - y x' is sum_ij a_i b_j (j - i) w^(i+j) / (i+j).
    """
    spl = periodic_spline(curve)
    a = spl.c[::-1, :, 0]  # (power, piece)
    b = spl.c[::-1, :, 1]
    w = np.diff(spl.x)
    i, j = np.meshgrid(np.arange(4), np.arange(4), indexing="ij")
    p = i + j
    coef = np.where(p > 0, (j - i) / np.maximum(p, 1), 0.0)
    total = np.einsum("ik,jk,ij,ijk->", a, b, coef, w[None, None, :] ** p[:, :, None])
    return abs(0.5 * float(total))


def resample_curve(curve, M_prime: int = 128) -> np.ndarray:
    """Parameter-uniform samples of the periodic spline through the markers."""
    spl = periodic_spline(curve)
    return spl(2 * np.pi * np.arange(M_prime) / M_prime)


def mesh_volume(mesh) -> float:
    """(1/6)|sum v0 . (v1 x v2)| over faces, origin as reference point."""
    x = _positions(mesh)
    f = mesh.faces
    v0, v1, v2 = x[f[:, 0]], x[f[:, 1]], x[f[:, 2]]
    return abs(float(np.einsum("ij,ij->i", v0, np.cross(v1, v2)).sum()) / 6.0)


def relative_error(value, reference) -> np.ndarray:
    """|value - reference| / reference (elementwise)."""
    return np.abs(np.asarray(value, dtype=float) - reference) / reference


def area_error(areas, reference=None) -> np.ndarray:
    """Normalized area errors of a time series; baseline is ``areas[0]`` unless given."""
    areas = np.asarray(areas, dtype=float)
    ref = areas[0] if reference is None else reference
    return relative_error(areas, ref)


volume_error = area_error


def perturbed_circle_area(R: float, eps: float) -> float:
    """Area of r = R (1 + eps cos(p s)) for any integer p >= 1."""
    return np.pi * R**2 * (1 + 0.5 * eps**2)


def mode_amplitude(curve, p: int, R: float) -> float:
    """Amplitude eps of the cos(p s) mode in r(s) = R (1 + eps cos(p s)).

    Radii are measured from the marker centroid.
    """
    x = _positions(curve)
    M = len(x)
    r = np.linalg.norm(x - x.mean(axis=0), axis=1) / R - 1.0
    return 2.0 * abs(np.fft.fft(r)[p]) / M


def successive_error(fine: StaggeredField, coarse: StaggeredField, norm: str = "inf",
                     component: int | None = None) -> float:
    """Norm of ``coarse - I(fine)`` where I restricts the 2N grid to N."""
    g = coarse.geometry
    diff = (coarse - restrict_2N_to_N(fine, g)).data
    if component is not None:
        diff = diff[component]
    if norm == "inf":
        return norm_inf(diff)
    if norm == "2":
        return float(np.sqrt(np.sum(diff**2) * g.cell_volume))
    raise ValueError(f"unknown norm {norm!r}")


def successive_marker_error(curve_N, curve_2N, M_prime: int = 128, norm: str = "inf") -> float:
    """Pointwise error between parameter-uniform spline resamplings of two curves."""
    d = resample_curve(curve_N, M_prime) - resample_curve(curve_2N, M_prime)
    if norm == "inf":
        return float(np.max(np.abs(d)))
    if norm == "2":
        return float(np.sqrt(np.sum(d**2) / M_prime))
    raise ValueError(f"unknown norm {norm!r}")


def max_spurious_velocity(u: StaggeredField) -> float:
    return norm_inf(u)


def normal_tangential(curve, F, center=None) -> np.ndarray:
    """Per-marker (F_r, F_theta) in the polar frame about ``center`` (default: centroid)."""
    x = _positions(curve)
    c = x.mean(axis=0) if center is None else np.asarray(center, dtype=float)
    d = x - c
    r_hat = d / np.linalg.norm(d, axis=1, keepdims=True)
    t_hat = np.stack([-r_hat[:, 1], r_hat[:, 0]], axis=1)
    F = np.asarray(F, dtype=float)
    return np.stack([np.sum(F * r_hat, axis=1), np.sum(F * t_hat, axis=1)], axis=1)


@dataclass
class TimeSeries:
    """Sampled diagnostic channels sharing one time axis."""

    times: list = field(default_factory=list)
    channels: dict = field(default_factory=dict)

    def append(self, t: float, **values):
        if self.times and t < self.times[-1]:
            raise ValueError("times must be non-decreasing")
        if self.times and set(values) != set(self.channels):
            raise ValueError("every sample must provide the same channels")
        self.times.append(float(t))
        for k, v in values.items():
            self.channels.setdefault(k, []).append(float(v))

    def __len__(self):
        return len(self.times)

    def column(self, name: str) -> np.ndarray:
        return np.asarray(self.channels[name])

    def to_csv(self, path):
        names = list(self.channels)
        with open(path, "w") as fh:
            fh.write(",".join(["t"] + names) + "\n")
            for i, t in enumerate(self.times):
                row = [t] + [self.channels[n][i] for n in names]
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
