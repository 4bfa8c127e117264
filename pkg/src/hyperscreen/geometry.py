"""Lorentz-model primitives.

Points live on the upper sheet of the hyperboloid time**2 - |spatial|**2 = 1/kappa.
Every public function accepts a single point or a batch (leading axes) and works in
float64. The ``traced_*`` functions are the same formulas over tape nodes; the
public functions evaluate them on constants so training and inference share one
implementation.
"""

from dataclasses import dataclass
from typing import NamedTuple, TypeAlias

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import tape
from .errors import GeometryError
from .models import Curvature
from .tape import Node

Array = NDArray[np.float64]
TangentAtOrigin: TypeAlias = Array
CurvatureLike: TypeAlias = Curvature | float

MEMBERSHIP_TOLERANCE = 1e-6
MIN_POCKET_NORM = 1e-8
MIN_SEPARATION = 1e-8


def _kappa(curvature: CurvatureLike) -> float:
    if isinstance(curvature, Curvature):
        return float(curvature.kappa)
    kappa = float(curvature)
    if not np.isfinite(kappa) or kappa <= 0:
        raise GeometryError(f"curvature must be positive, got {curvature}")
    return kappa


@dataclass(frozen=True)
class LorentzPoint:
    """Point(s) on the hyperboloid: ``time`` has shape (...), ``spatial`` (..., n)."""

    time: Array
    spatial: Array

    @classmethod
    def from_coords(cls, coords: ArrayLike) -> "LorentzPoint":
        arr = np.asarray(coords, dtype=np.float64)
        if arr.shape[-1] < 2:
            raise GeometryError("a Lorentz point needs a time and at least one spatial coordinate")
        return cls(time=arr[..., 0].copy(), spatial=arr[..., 1:].copy())

    @classmethod
    def origin(cls, dim: int, curvature: CurvatureLike = 1.0) -> "LorentzPoint":
        return cls(
            time=np.asarray(1.0 / np.sqrt(_kappa(curvature))),
            spatial=np.zeros(dim, dtype=np.float64),
        )

    @property
    def coords(self) -> Array:
        return np.concatenate([self.time[..., None], self.spatial], axis=-1)

    @property
    def dim(self) -> int:
        return int(self.spatial.shape[-1])

    def __len__(self) -> int:
        if self.time.ndim == 0:
            raise TypeError("single LorentzPoint has no length")
        return int(self.time.shape[0])

    def __getitem__(self, index: int | slice | Array) -> "LorentzPoint":
        return LorentzPoint(time=self.time[index], spatial=self.spatial[index])

    def radius(self, curvature: CurvatureLike = 1.0) -> Array:
        """Geodesic distance from the origin."""
        sqrt_k = np.sqrt(_kappa(curvature))
        return np.asarray(np.arcsinh(sqrt_k * np.linalg.norm(self.spatial, axis=-1)) / sqrt_k)


class TracedPoints(NamedTuple):
    """Lorentz points inside a computation graph."""

    time: Node
    spatial: Node

    def take(self, index: Array) -> "TracedPoints":
        return TracedPoints(self.time[index], self.spatial[index])


def _coords(p: LorentzPoint | ArrayLike) -> Array:
    if isinstance(p, LorentzPoint):
        return p.coords
    return np.asarray(p, dtype=np.float64)


def _finite(values: Array, what: str) -> None:
    if not np.all(np.isfinite(values)):
        raise GeometryError(f"{what} has non-finite entries")


def lorentz_inner(p: LorentzPoint | ArrayLike, q: LorentzPoint | ArrayLike) -> Array:
    """Lorentzian inner product -p0*q0 + <p_spatial, q_spatial>."""
    a, b = _coords(p), _coords(q)
    if a.shape[-1] != b.shape[-1]:
        raise GeometryError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    return np.asarray(-a[..., 0] * b[..., 0] + np.sum(a[..., 1:] * b[..., 1:], axis=-1))


def membership_residual(p: LorentzPoint, curvature: CurvatureLike = 1.0) -> Array:
    """Scale-aware hyperboloid residual |t^2 - |x|^2 - 1/kappa| / max(1, kappa t^2).

    Equals the absolute residual for points within geodesic radius ~1 of the origin;
    farther out it removes the eps * t^2 rounding floor of the coordinates.
    """
    kappa = _kappa(curvature)
    t2 = p.time * p.time
    absolute = np.abs(t2 - np.sum(p.spatial * p.spatial, axis=-1) - 1.0 / kappa)
    return np.asarray(absolute / np.maximum(1.0, kappa * t2))


def _check_on_manifold(p: LorentzPoint, kappa: float, what: str) -> None:
    _finite(p.coords, what)
    if np.any(p.time <= 0):
        raise GeometryError(f"{what} is not on the upper sheet (time <= 0)")
    worst = float(np.max(membership_residual(p, kappa)))
    if worst > MEMBERSHIP_TOLERANCE:
        raise GeometryError(f"{what} is off the manifold (residual {worst:.3g})")


def lift_spatial(spatial: ArrayLike, curvature: CurvatureLike = 1.0) -> LorentzPoint:
    """Complete spatial coordinates with the time coordinate sqrt(1/kappa + |x|^2)."""
    kappa = _kappa(curvature)
    x = np.asarray(spatial, dtype=np.float64)
    _finite(x, "spatial vector")
    time = np.sqrt(1.0 / kappa + np.sum(x * x, axis=-1))
    return LorentzPoint(time=np.asarray(time), spatial=x.copy())


def exp_map_origin(v: ArrayLike, curvature: CurvatureLike = 1.0) -> LorentzPoint:
    """Map tangent vector(s) at the origin onto the hyperboloid."""
    kappa = _kappa(curvature)
    arr = np.asarray(v, dtype=np.float64)
    _finite(arr, "tangent vector")
    return LorentzPoint.from_coords(tape.exp_map_origin(tape.constant(arr), kappa).value)


def _points(p: LorentzPoint) -> TracedPoints:
    return TracedPoints(tape.constant(p.time), tape.constant(p.spatial))


def traced_exp_map_origin(v: Node, kappa: float) -> TracedPoints:
    coords = tape.exp_map_origin(v, kappa)
    return TracedPoints(coords[..., 0], coords[..., 1:])


def traced_lift(v: Node, kappa: float) -> TracedPoints:
    time = tape.sqrt(tape.sum_(v * v, axis=-1) + 1.0 / kappa)
    return TracedPoints(time, v)


def _squared_chord(p: TracedPoints, q: TracedPoints) -> Node:
    # <p - q, p - q>_L, non-negative on the manifold
    dt = p.time - q.time
    ds = p.spatial - q.spatial
    return tape.clamp(tape.sum_(ds * ds, axis=-1) - dt * dt, lo=0.0)


def traced_distance(p: TracedPoints, q: TracedPoints, kappa: float) -> Node:
    """(1/sqrt k) acosh(-k <p,q>) written as (2/sqrt k) asinh(sqrt(k) c / 2)."""
    sqrt_k = float(np.sqrt(kappa))
    chord = tape.sqrt(_squared_chord(p, q))
    return tape.asinh(chord * (0.5 * sqrt_k)) * (2.0 / sqrt_k)


def traced_exterior_angle(pocket: TracedPoints, ligand: TracedPoints, kappa: float) -> Node:
    """Angle at the pocket between its outward radial ray and the geodesic to the ligand."""
    sqrt_k = float(np.sqrt(kappa))
    c2 = _squared_chord(pocket, ligand)
    # m0 + k p0 <p, m>_L with <p, m>_L = -1/k - c^2/2
    numerator = ligand.time - pocket.time - pocket.time * c2 * (0.5 * kappa)
    # sinh(sqrt(k) d) = sqrt(k) c sqrt(1 + k c^2 / 4)
    sinh_d = tape.sqrt(c2) * sqrt_k * tape.sqrt(c2 * (0.25 * kappa) + 1.0)
    pocket_norm = tape.sqrt(tape.sum_(pocket.spatial * pocket.spatial, axis=-1))
    cosine = tape.clamp(numerator / (pocket_norm * sinh_d), lo=-1.0, hi=1.0)
    return tape.arccos(cosine)


def traced_half_aperture(pocket: TracedPoints, r0: float, kappa: float) -> Node:
    sqrt_k = float(np.sqrt(kappa))
    pocket_norm = tape.sqrt(tape.sum_(pocket.spatial * pocket.spatial, axis=-1))
    ratio = (2.0 * r0 / sqrt_k) / pocket_norm
    return tape.arcsin(tape.clamp(ratio, hi=1.0))


def lorentz_distance(p: LorentzPoint, q: LorentzPoint, curvature: CurvatureLike = 1.0) -> Array:
    """Geodesic distance; zero for coincident points."""
    kappa = _kappa(curvature)
    if p.dim != q.dim:
        raise GeometryError(f"dimension mismatch: {p.dim} vs {q.dim}")
    _check_on_manifold(p, kappa, "first point")
    _check_on_manifold(q, kappa, "second point")
    return traced_distance(_points(p), _points(q), kappa).value


def _check_pocket(pocket: LorentzPoint) -> None:
    if np.any(np.linalg.norm(pocket.spatial, axis=-1) <= MIN_POCKET_NORM):
        raise GeometryError("pocket at the origin has no outward direction")


def exterior_angle(
    pocket: LorentzPoint, ligand: LorentzPoint, curvature: CurvatureLike = 1.0
) -> Array:
    """Exterior angle in [0, pi] of ``ligand`` seen from ``pocket``."""
    kappa = _kappa(curvature)
    _check_pocket(pocket)
    if np.any(lorentz_distance(pocket, ligand, kappa) <= MIN_SEPARATION):
        raise GeometryError("pocket and ligand coincide")
    return traced_exterior_angle(_points(pocket), _points(ligand), kappa).value


def half_aperture(pocket: LorentzPoint, r0: float = 0.1, curvature: CurvatureLike = 1.0) -> Array:
    """Cone half-aperture arcsin(min(1, 2 r0 / (sqrt(k) |pocket_spatial|)))."""
    kappa = _kappa(curvature)
    if r0 <= 0:
        raise GeometryError(f"r0 must be positive, got {r0}")
    _check_pocket(pocket)
    return traced_half_aperture(_points(pocket), r0, kappa).value
