"""Colour-based fruit segmentation.

RGB images are thresholded in HSV space, the mask is cleaned with a
morphological open/close, and 8-connected components become contours and
finally detections. Hue is expressed in degrees [0, 360) and saturation/
value as fractions in [0, 1], independent of any particular library's
byte conventions; range config files state units the same way.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .validation import check_binary_mask, check_rgb_image

# Component filter defaults, sized for fruit at the benchmark's camera
# geometry (640x480, nadir view from ~61.5 cm).
DEFAULT_MIN_AREA = 400
DEFAULT_MORPH_RADIUS = 2


def rgb_to_hsv(r: int, g: int, b: int) -> tuple[float, float, float]:
    """Hexcone conversion of 8-bit channels to (h deg, s, v) fractions.

    h = 0 for achromatic pixels (max = min); s = 0 when v = 0.
    """
    rf, gf, bf = r / 255.0, g / 255.0, b / 255.0
    v = max(rf, gf, bf)
    mn = min(rf, gf, bf)
    delta = v - mn
    if delta == 0.0:
        h = 0.0
    elif v == rf:
        h = 60.0 * (((gf - bf) / delta) % 6.0)
    elif v == gf:
        h = 60.0 * ((bf - rf) / delta + 2.0)
    else:
        h = 60.0 * ((rf - gf) / delta + 4.0)
    if h >= 360.0:
        h -= 360.0
    s = 0.0 if v == 0.0 else delta / v
    return h, s, v


def hsv_to_rgb(h: float, s: float, v: float) -> tuple[int, int, int]:
    """Inverse hexcone conversion to rounded 8-bit channels."""
    h = h % 360.0
    c = v * s
    hp = h / 60.0
    x = c * (1.0 - abs(hp % 2.0 - 1.0))
    sector = int(hp) % 6
    rgb1 = [(c, x, 0.0), (x, c, 0.0), (0.0, c, x), (0.0, x, c), (x, 0.0, c), (c, 0.0, x)][sector]
    m = v - c
    return tuple(int(round((ch + m) * 255.0)) for ch in rgb1)


def rgb_image_to_hsv(img: np.ndarray) -> np.ndarray:
    """Vectorized rgb_to_hsv over an (h, w, 3) uint8 image -> (h, w, 3) float."""
    img = check_rgb_image(img)
    arr = img.astype(np.float64) / 255.0
    r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
    v = arr.max(axis=-1)
    delta = v - arr.min(axis=-1)
    s = np.zeros_like(v)
    np.divide(delta, v, out=s, where=v > 0)

    h = np.zeros_like(v)
    chromatic = delta > 0
    r_max = chromatic & (v == r)
    g_max = chromatic & (v == g) & ~r_max
    b_max = chromatic & ~r_max & ~g_max
    h[r_max] = ((g - b)[r_max] / delta[r_max]) % 6.0
    h[g_max] = (b - r)[g_max] / delta[g_max] + 2.0
    h[b_max] = (r - g)[b_max] / delta[b_max] + 4.0
    h *= 60.0
    h[h >= 360.0] -= 360.0
    return np.stack([h, s, v], axis=-1)


@dataclass(frozen=True, slots=True)
class HsvRange:
    """An inclusive HSV box; hue wraps when h_lo > h_hi (e.g. 350 -> 10)."""

    h_lo: float
    h_hi: float
    s_lo: float
    s_hi: float
    v_lo: float
    v_hi: float

    def __post_init__(self):
        if not (0.0 <= self.h_lo < 360.0 and 0.0 <= self.h_hi < 360.0):
            raise ValueError(f"hue bounds must be in [0, 360), got [{self.h_lo}, {self.h_hi}]")
        for lo, hi, name in ((self.s_lo, self.s_hi, "s"), (self.v_lo, self.v_hi, "v")):
            if not (0.0 <= lo <= hi <= 1.0):
                raise ValueError(f"{name} bounds must satisfy 0 <= lo <= hi <= 1, got [{lo}, {hi}]")

    @property
    def wraps(self) -> bool:
        return self.h_lo > self.h_hi

    def contains(self, h: float, s: float, v: float) -> bool:
        if self.wraps:
            hue_ok = h >= self.h_lo or h <= self.h_hi
        else:
            hue_ok = self.h_lo <= h <= self.h_hi
        return hue_ok and self.s_lo <= s <= self.s_hi and self.v_lo <= v <= self.v_hi

    def to_dict(self, label: str) -> dict:
        return {
            "label": label,
            "h": [self.h_lo, self.h_hi],
            "s": [self.s_lo, self.s_hi],
            "v": [self.v_lo, self.v_hi],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HsvRange":
        return cls(
            h_lo=float(data["h"][0]),
            h_hi=float(data["h"][1]),
            s_lo=float(data["s"][0]),
            s_hi=float(data["s"][1]),
            v_lo=float(data["v"][0]),
            v_hi=float(data["v"][1]),
        )


# Tuned against the synthetic scene generator's default fruit colours at
# lighting gain 1.0 (including their per-channel jitter and radial shading).
DEFAULT_FRUIT_RANGES = (
    ("apple", HsvRange(345.0, 12.0, 0.45, 1.0, 0.30, 1.0)),
    ("orange", HsvRange(14.0, 45.0, 0.50, 1.0, 0.40, 1.0)),
)


def load_hsv_ranges(path) -> list[tuple[str, HsvRange]]:
    """Read a range config file: a JSON object or array of objects."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(doc, dict):
        doc = [doc]
    return [(str(entry["label"]), HsvRange.from_dict(entry)) for entry in doc]


def save_hsv_ranges(path, ranges) -> None:
    doc = [rng.to_dict(label) for label, rng in ranges]
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def threshold_mask(img: np.ndarray, hsv_range: HsvRange) -> np.ndarray:
    """Boolean mask of pixels whose HSV lies inside the range."""
    hsv = rgb_image_to_hsv(img)
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    if hsv_range.wraps:
        hue_ok = (h >= hsv_range.h_lo) | (h <= hsv_range.h_hi)
    else:
        hue_ok = (h >= hsv_range.h_lo) & (h <= hsv_range.h_hi)
    return (
        hue_ok
        & (s >= hsv_range.s_lo)
        & (s <= hsv_range.s_hi)
        & (v >= hsv_range.v_lo)
        & (v <= hsv_range.v_hi)
    )


def _structuring_element(kernel_radius: int) -> np.ndarray:
    return np.ones((2 * kernel_radius + 1, 2 * kernel_radius + 1), dtype=bool)


def morphological_open(mask: np.ndarray, kernel_radius: int) -> np.ndarray:
    """Erosion then dilation with a square element of side 2r+1.

    Out-of-image cells count as foreground for erosion and background for
    dilation, so the image border is not eaten away; this pairing makes
    open and close idempotent.
    """
    mask = check_binary_mask(mask)
    if kernel_radius < 0:
        raise ValueError("kernel_radius must be >= 0")
    if kernel_radius == 0:
        return mask.copy()
    se = _structuring_element(kernel_radius)
    eroded = ndimage.binary_erosion(mask, structure=se, border_value=1)
    return ndimage.binary_dilation(eroded, structure=se, border_value=0)


def morphological_close(mask: np.ndarray, kernel_radius: int) -> np.ndarray:
    """Dilation then erosion with a square element of side 2r+1."""
    mask = check_binary_mask(mask)
    if kernel_radius < 0:
        raise ValueError("kernel_radius must be >= 0")
    if kernel_radius == 0:
        return mask.copy()
    se = _structuring_element(kernel_radius)
    dilated = ndimage.binary_dilation(mask, structure=se, border_value=0)
    return ndimage.binary_erosion(dilated, structure=se, border_value=1)


def morphological_open_close(mask: np.ndarray, kernel_radius: int) -> np.ndarray:
    """Open followed by close: removes speckle, then fills small holes."""
    return morphological_close(morphological_open(mask, kernel_radius), kernel_radius)


@dataclass(frozen=True, slots=True, eq=False)
class Contour:
    """External boundary of one 8-connected component.

    ``points`` is the clockwise Moore-neighbour trace as (u, v) pixel
    coordinates, starting at the topmost-then-leftmost pixel; ``area``
    is the filled pixel count of the component.
    """

    points: np.ndarray
    area: int
    anchor: tuple[int, int]

    def bounding_extent(self) -> tuple[int, int, int, int]:
        """(min_u, min_v, max_u, max_v) over the boundary trace."""
        us, vs = self.points[:, 0], self.points[:, 1]
        return int(us.min()), int(vs.min()), int(us.max()), int(vs.max())


# Moore neighbourhood in clockwise order (dr, dc): W, NW, N, NE, E, SE, S, SW.
_MOORE = ((0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1))
_MOORE_INDEX = {d: i for i, d in enumerate(_MOORE)}


def _trace_boundary(mask: np.ndarray, start: tuple[int, int]) -> list[tuple[int, int]]:
    """Clockwise Moore trace from ``start`` (row, col); stops when the
    (pixel, backtrack) state repeats, which is robust on 1-px-thin limbs
    where the classic start-pixel criterion loops."""
    h, w = mask.shape
    contour = [start]
    cur = start
    back = 0  # backtrack is the (background) west neighbour of the start
    seen = {(start, back)}
    while True:
        found = -1
        for k in range(1, 9):
            d = (back + k) % 8
            nr, nc = cur[0] + _MOORE[d][0], cur[1] + _MOORE[d][1]
            if 0 <= nr < h and 0 <= nc < w and mask[nr, nc]:
                found = d
                break
        if found < 0:
            break  # isolated pixel
        prev_d = (found - 1) % 8
        prev_cell = (cur[0] + _MOORE[prev_d][0], cur[1] + _MOORE[prev_d][1])
        nxt = (cur[0] + _MOORE[found][0], cur[1] + _MOORE[found][1])
        nback = _MOORE_INDEX[(prev_cell[0] - nxt[0], prev_cell[1] - nxt[1])]
        if (nxt, nback) in seen:
            break
        seen.add((nxt, nback))
        contour.append(nxt)
        cur, back = nxt, nback
    while len(contour) > 1 and contour[-1] == contour[0]:
        contour.pop()
    return contour


def extract_components(mask: np.ndarray, min_area: int) -> list[Contour]:
    """Contours of 8-connected foreground components with area >= min_area.

    Ordered by area descending, ties broken by topmost-then-leftmost
    anchor pixel.
    """
    mask = check_binary_mask(mask)
    if min_area < 0:
        raise ValueError("min_area must be >= 0")
    labels, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    if count == 0:
        return []
    areas = np.bincount(labels.ravel(), minlength=count + 1)
    # First row-major pixel per label is the topmost-then-leftmost anchor.
    flat = labels.ravel()
    first_index = np.full(count + 1, -1, dtype=np.int64)
    fg = np.flatnonzero(flat)
    # reversed so earlier indices overwrite later ones
    first_index[flat[fg[::-1]]] = fg[::-1]

    w = mask.shape[1]
    contours = []
    for lbl in range(1, count + 1):
        if areas[lbl] < min_area:
            continue
        r, c = divmod(int(first_index[lbl]), w)
        trace = _trace_boundary(mask, (r, c))
        points = np.array([(col, row) for row, col in trace], dtype=np.int64)
        contours.append(Contour(points=points, area=int(areas[lbl]), anchor=(c, r)))
    contours.sort(key=lambda ct: (-ct.area, ct.anchor[1], ct.anchor[0]))
    return contours


def detections_from_contours(contours, label: str):
    """One Detection per contour: bbox is the contour extent, confidence
    is fixed at 1.0 (the colour method carries no score), picking point is
    the bbox midpoint."""
    from .detect import Detection
    from .geometry import BoundingBox

    out = []
    for contour in contours:
        x1, y1, x2, y2 = contour.bounding_extent()
        out.append(Detection.from_box(label, 1.0, BoundingBox(x1, y1, x2, y2)))
    return out
