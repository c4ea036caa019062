"""Shared test utilities: controlled random homographies, grids, and an
independent maximum-matching oracle."""

from __future__ import annotations

import math

import numpy as np

from fruitgrid.geometry import Correspondence, PixelPoint, WorldPoint


def optimal_match_count(truth, dets, threshold: float) -> int:
    """Maximum bipartite matching size via augmenting paths.

    Uses pixel-as-world coordinates (identity homography), mirroring how
    the synthetic matching frames are built in tests.
    """
    edges = []
    for ft in truth.fruits:
        row = []
        for j, d in enumerate(dets):
            if d.label != ft.label or not d.is_fruit:
                continue
            dist = math.hypot(d.picking_point.u - ft.world.x, d.picking_point.v - ft.world.y)
            if dist <= threshold:
                row.append(j)
        edges.append(row)

    match_of_det: dict[int, int] = {}

    def augment(i, visited):
        for j in edges[i]:
            if j in visited:
                continue
            visited.add(j)
            if j not in match_of_det or augment(match_of_det[j], visited):
                match_of_det[j] = i
                return True
        return False

    return sum(augment(i, set()) for i in range(len(truth.fruits)))


def random_homography(rng: np.random.Generator) -> np.ndarray:
    """A well-conditioned random invertible 3x3 projective map.

    Built as rotation/scale/translation plus small projective terms so
    that points in [0, 100]^2 stay far from the line at infinity.
    """
    while True:
        angle = rng.uniform(0.0, 2.0 * math.pi)
        scale = rng.uniform(0.5, 2.0)
        shear = rng.uniform(-0.3, 0.3)
        c, s = math.cos(angle), math.sin(angle)
        h = np.array(
            [
                [scale * c, scale * (shear * c - s), rng.uniform(-20.0, 20.0)],
                [scale * s, scale * (shear * s + c), rng.uniform(-20.0, 20.0)],
                [rng.uniform(-1e-3, 1e-3), rng.uniform(-1e-3, 1e-3), 1.0],
            ]
        )
        if abs(np.linalg.det(h)) > 1e-3:
            return h


def sample_correspondences(
    rng: np.random.Generator, h: np.ndarray, n: int
) -> list[Correspondence]:
    """Noiseless correspondences through ``h`` with no 3 pixels collinear."""
    pixels = []
    while len(pixels) < n:
        p = rng.uniform(0.0, 100.0, size=2)
        if _degenerate_with(pixels, p):
            continue
        pixels.append(p)
    out = []
    for u, v in pixels:
        x, y, w = h @ np.array([u, v, 1.0])
        out.append(Correspondence(PixelPoint(u, v), WorldPoint(x / w, y / w)))
    return out


def _degenerate_with(existing, candidate, tol: float = 1.0) -> bool:
    for a in existing:
        if np.hypot(*(a - candidate)) < 2.0:
            return True
    for i in range(len(existing)):
        for j in range(i + 1, len(existing)):
            a, b = existing[i], existing[j]
            area = abs(
                (b[0] - a[0]) * (candidate[1] - a[1])
                - (b[1] - a[1]) * (candidate[0] - a[0])
            )
            if area < tol * np.hypot(*(b - a)):
                return True
    return False


def grid_correspondences_flat(
    cols: int,
    rows: int,
    spacing_cm: float,
    px_per_cm: float,
    offset=(320.0, 240.0),
) -> list[Correspondence]:
    """A synthetic nadir-view grid: pixel = offset + px_per_cm * world."""
    out = []
    for j in range(rows):
        for i in range(cols):
            x, y = i * spacing_cm, j * spacing_cm
            out.append(
                Correspondence(
                    PixelPoint(offset[0] + px_per_cm * x, offset[1] + px_per_cm * y),
                    WorldPoint(x, y),
                )
            )
    return out
