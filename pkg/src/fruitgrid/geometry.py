"""Pinhole projection model and planar homography estimation.

The calibration target is a flat grid, so pixel coordinates and world
coordinates on the plane Z=0 are related by a 3x3 homography. The
homography is estimated from grid correspondences by the normalized DLT:
both point sets are Hartley-conditioned (centroid at the origin, mean
distance sqrt(2)), the homogeneous system ``A h = 0`` is solved by SVD,
and the result is de-conditioned and stored in a canonical scale.

Conventions:
  - pixel frame: u right, v down, units px
  - world frame: x/y on the grid plane, units cm, z = 0
  - the stored homography maps pixel -> world
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateConfiguration,
    EmptyInput,
    InsufficientCorrespondences,
    PointAtInfinity,
)
from .validation import check_finite_scalar, check_matrix, check_points

# Relative singular-value gap below which the DLT system is rank deficient.
DEGENERACY_RTOL = 1e-10
# Homogeneous scale below which perspective division is refused.
W_EPSILON = 1e-12


@dataclass(frozen=True, slots=True)
class PixelPoint:
    """A point in the image frame (px)."""

    u: float
    v: float

    def __post_init__(self):
        check_finite_scalar(self.u, "u")
        check_finite_scalar(self.v, "v")


@dataclass(frozen=True, slots=True)
class WorldPoint:
    """A point on the calibration plane (cm, z = 0)."""

    x: float
    y: float

    def __post_init__(self):
        check_finite_scalar(self.x, "x")
        check_finite_scalar(self.y, "y")


@dataclass(frozen=True, slots=True)
class HomogeneousPixel:
    """Homogeneous image coordinates ``(u, v, w)``."""

    u: float
    v: float
    w: float

    def __post_init__(self):
        if self.u == 0.0 and self.v == 0.0 and self.w == 0.0:
            raise ValueError("homogeneous coordinates must not all be zero")

    def dehomogenize(self) -> PixelPoint:
        if abs(self.w) < W_EPSILON:
            raise PointAtInfinity(f"|w| = {abs(self.w)!r} < {W_EPSILON}")
        return PixelPoint(self.u / self.w, self.v / self.w)


@dataclass(frozen=True, slots=True)
class BoundingBox:
    """Axis-aligned box: (x1, y1) top-left, (x2, y2) bottom-right, px."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        for name in ("x1", "y1", "x2", "y2"):
            check_finite_scalar(getattr(self, name), name)
        if self.x1 > self.x2 or self.y1 > self.y2:
            raise ValueError(
                f"box corners out of order: ({self.x1}, {self.y1}, {self.x2}, {self.y2})"
            )


@dataclass(frozen=True, slots=True)
class Correspondence:
    """One calibration observation: a pixel and its known world position."""

    pixel: PixelPoint
    world: WorldPoint


@dataclass(frozen=True, slots=True)
class CameraIntrinsics:
    """Pinhole intrinsics: focal lengths and principal point, in px."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        for name in ("fx", "fy", "cx", "cy"):
            check_finite_scalar(getattr(self, name), name)
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")

    def matrix(self) -> np.ndarray:
        """The 3x3 intrinsic matrix K."""
        return np.array(
            [
                [self.fx, 0.0, self.cx],
                [0.0, self.fy, self.cy],
                [0.0, 0.0, 1.0],
            ]
        )


class ExtrinsicPose:
    """Camera pose as a rotation matrix and translation vector (cm).

    Rejects matrices that are not proper rotations (orthonormal with
    determinant +1, both within 1e-9).
    """

    __slots__ = ("_r", "_t")

    def __init__(self, r, t):
        r = check_matrix(r, (3, 3), "rotation")
        t = np.asarray(t, dtype=float).reshape(3)
        if not np.all(np.isfinite(t)):
            raise ValueError("translation contains non-finite values")
        if not np.allclose(r.T @ r, np.eye(3), rtol=0.0, atol=1e-9):
            raise ValueError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValueError("rotation determinant is not +1 within 1e-9")
        self._r = r
        self._t = t
        self._r.flags.writeable = False
        self._t.flags.writeable = False

    @property
    def r(self) -> np.ndarray:
        return self._r

    @property
    def t(self) -> np.ndarray:
        return self._t

    @classmethod
    def identity(cls) -> "ExtrinsicPose":
        return cls(np.eye(3), np.zeros(3))

    def rt(self) -> np.ndarray:
        """The 3x4 matrix [R | t]."""
        return np.hstack([self._r, self._t.reshape(3, 1)])


class CameraMatrix:
    """Full projection C = K [R | t], a rank-3 3x4 matrix."""

    __slots__ = ("_m",)

    def __init__(self, m):
        m = check_matrix(m, (3, 4), "camera matrix")
        if np.linalg.matrix_rank(m) != 3:
            raise ValueError("camera matrix must have rank 3")
        self._m = m
        self._m.flags.writeable = False

    @property
    def matrix(self) -> np.ndarray:
        return self._m

    def project(self, xyz) -> HomogeneousPixel:
        """Project a 3-D world point to homogeneous pixel coordinates."""
        p = np.asarray(xyz, dtype=float).reshape(3)
        u, v, w = self._m @ np.append(p, 1.0)
        return HomogeneousPixel(u, v, w)


def canonical_homography_matrix(m) -> np.ndarray:
    """Scale a projective 3x3 matrix to its canonical representative.

    Frobenius norm 1, sign fixed so that h33 >= 0; if h33 is zero the
    first nonzero entry in row-major order is made positive.
    """
    m = check_matrix(m, (3, 3), "homography")
    norm = np.linalg.norm(m)
    if norm == 0.0:
        raise ValueError("homography must be nonzero")
    m = m / norm
    if m[2, 2] != 0.0:
        sign = math.copysign(1.0, m[2, 2])
    else:
        flat = m.ravel()
        first = flat[np.nonzero(flat)[0][0]]
        sign = math.copysign(1.0, first)
    return m * sign


class Homography:
    """A 3x3 projective pixel->world map, stored at canonical scale."""

    __slots__ = ("_m",)

    def __init__(self, matrix):
        m = canonical_homography_matrix(matrix)
        s = np.linalg.svd(m, compute_uv=False)
        if s[-1] <= 1e-12 * s[0]:
            raise ValueError("homography must be invertible (rank 3)")
        self._m = m
        self._m.flags.writeable = False

    @property
    def matrix(self) -> np.ndarray:
        return self._m

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self._m))

    def __eq__(self, other):
        if not isinstance(other, Homography):
            return NotImplemented
        return bool(np.array_equal(self._m, other._m))

    def __hash__(self):
        return hash(self._m.tobytes())

    def __repr__(self):
        return f"Homography({self._m.tolist()!r})"


def bbox_midpoint(box: BoundingBox) -> PixelPoint:
    """Midpoint of a bounding box: ((x1+x2)/2, (y1+y2)/2), no rounding.

    This is the picking point of a (near-)spherical fruit whose detector
    output is the box.
    """
    return PixelPoint((box.x1 + box.x2) / 2.0, (box.y1 + box.y2) / 2.0)


def compose_camera_matrix(k: CameraIntrinsics, pose: ExtrinsicPose) -> CameraMatrix:
    """Compose intrinsics and extrinsics into the 3x4 projection K [R | t]."""
    return CameraMatrix(k.matrix() @ pose.rt())


def hartley_normalization(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Condition a point set for the DLT.

    Translates the centroid to the origin and scales so the mean distance
    from the origin is sqrt(2). Returns the conditioned points and the
    3x3 similarity T with ``conditioned_h = T @ raw_h``.
    """
    points = check_points(points, "points")
    centroid = points.mean(axis=0)
    centered = points - centroid
    mean_dist = float(np.mean(np.hypot(centered[:, 0], centered[:, 1])))
    if mean_dist < 1e-12:
        raise DegenerateConfiguration("all points coincide")
    s = math.sqrt(2.0) / mean_dist
    t = np.array(
        [
            [s, 0.0, -s * centroid[0]],
            [0.0, s, -s * centroid[1]],
            [0.0, 0.0, 1.0],
        ]
    )
    return centered * s, t


def dlt_matrix(pixels: np.ndarray, worlds: np.ndarray) -> np.ndarray:
    """Stack the standard 2-rows-per-correspondence DLT system.

    Rows constrain h so that H (u, v, 1)^T is proportional to
    (x, y, 1)^T for every (pixel, world) pair.
    """
    pixels = check_points(pixels, "pixels")
    worlds = check_points(worlds, "worlds")
    if pixels.shape[0] != worlds.shape[0]:
        raise ValueError("pixel and world point counts differ")
    n = pixels.shape[0]
    u, v = pixels[:, 0], pixels[:, 1]
    x, y = worlds[:, 0], worlds[:, 1]
    a = np.zeros((2 * n, 9))
    a[0::2, 0] = -u
    a[0::2, 1] = -v
    a[0::2, 2] = -1.0
    a[0::2, 6] = x * u
    a[0::2, 7] = x * v
    a[0::2, 8] = x
    a[1::2, 3] = -u
    a[1::2, 4] = -v
    a[1::2, 5] = -1.0
    a[1::2, 6] = y * u
    a[1::2, 7] = y * v
    a[1::2, 8] = y
    return a


def estimate_homography(correspondences) -> Homography:
    """Estimate the pixel->world homography from >= 4 correspondences.

    Normalized DLT: Hartley-condition both point sets, take the right
    singular vector of the smallest singular value of the stacked system,
    then de-condition. Raises InsufficientCorrespondences for < 4 pairs
    and DegenerateConfiguration when the (conditioned) system is rank
    deficient, i.e. the second-smallest singular value falls below
    1e-10 x the largest.
    """
    correspondences = list(correspondences)
    if len(correspondences) < 4:
        raise InsufficientCorrespondences(
            f"need at least 4 correspondences, got {len(correspondences)}"
        )
    pixels = np.array([[c.pixel.u, c.pixel.v] for c in correspondences])
    worlds = np.array([[c.world.x, c.world.y] for c in correspondences])

    pixels_n, t_pix = hartley_normalization(pixels)
    worlds_n, t_world = hartley_normalization(worlds)

    a = dlt_matrix(pixels_n, worlds_n)
    _, s, vt = np.linalg.svd(a)
    if s[-2] < DEGENERACY_RTOL * s[0]:
        raise DegenerateConfiguration(
            "correspondences do not constrain a unique homography "
            "(collinear or coincident points)"
        )
    h_n = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t_world) @ h_n @ t_pix
    return Homography(h)


def apply_homography(h: Homography, p: PixelPoint) -> WorldPoint:
    """Map a pixel to the world plane by perspective division of H p."""
    u, v, w = h.matrix @ np.array([p.u, p.v, 1.0])
    if abs(w) < W_EPSILON:
        raise PointAtInfinity(f"pixel ({p.u}, {p.v}) maps to infinity (|w| = {abs(w)!r})")
    return WorldPoint(u / w, v / w)


def transform_points(h: Homography, pixels) -> np.ndarray:
    """Vectorized apply_homography over an (n, 2) pixel array."""
    pts = check_points(pixels, "pixels")
    ones = np.ones((pts.shape[0], 1))
    mapped = np.hstack([pts, ones]) @ h.matrix.T
    w = mapped[:, 2]
    if np.any(np.abs(w) < W_EPSILON):
        raise PointAtInfinity("at least one pixel maps to infinity")
    return mapped[:, :2] / w[:, None]


def reprojection_error(h: Homography, correspondences) -> float:
    """RMS distance (cm) between mapped pixels and their known world points."""
    correspondences = list(correspondences)
    if not correspondences:
        raise EmptyInput("reprojection error over zero correspondences")
    pixels = np.array([[c.pixel.u, c.pixel.v] for c in correspondences])
    worlds = np.array([[c.world.x, c.world.y] for c in correspondences])
    mapped = transform_points(h, pixels)
    sq = np.sum((mapped - worlds) ** 2, axis=1)
    return float(np.sqrt(np.mean(sq)))


CALIBRATION_DIRECTION = "pixel_to_world"
CALIBRATION_UNITS = "cm"


def write_calibration(path, h: Homography, rms_cm: float) -> None:
    """Write the calibration JSON file (row-major canonical matrix)."""
    doc = {
        "homography": [[float(x) for x in row] for row in h.matrix],
        "direction": CALIBRATION_DIRECTION,
        "units": CALIBRATION_UNITS,
        "rms_reprojection_error_cm": float(rms_cm),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def read_calibration(path) -> tuple[Homography, float]:
    """Read a calibration file; returns the homography and its stored RMS."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("direction") != CALIBRATION_DIRECTION:
        raise ValueError(f"unsupported calibration direction: {doc.get('direction')!r}")
    if doc.get("units") != CALIBRATION_UNITS:
        raise ValueError(f"unsupported calibration units: {doc.get('units')!r}")
    h = Homography(np.array(doc["homography"], dtype=float))
    return h, float(doc["rms_reprojection_error_cm"])
