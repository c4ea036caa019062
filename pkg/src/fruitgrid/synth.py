"""Deterministic synthetic scene generator.

Reproduces the benchmark protocol at desk scale: a planar hole grid seen
from a nadir camera at ~61.5 cm, fruit disks placed on distinct holes,
and parametric disturbances (lighting gain/gamma, a cast-shadow
half-plane, leaf-like clutter, per-fruit colour drift). Every render is
a pure function of (scene config, fruit list, disturbance config), so
scene bundles are byte-reproducible.

World frame: origin at the top-left grid hole, x to the right, y down,
units cm, grid plane z = 0. The camera sits directly above the origin,
so the true pixel->world map is an exact (affine) homography recorded in
every scene's ground truth.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import GridTooSmall
from .geometry import CameraIntrinsics, Correspondence, Homography, PixelPoint, WorldPoint
from .hsv import hsv_to_rgb, rgb_to_hsv

PLATE_GREY = (115, 115, 115)
HOLE_GREY = (45, 45, 45)
HOLE_RADIUS_CM = 0.22
# Radial shading of fruit disks: factor 1.0 at the centre -> 0.6 at the rim.
SHADE_FALLOFF = 0.4
# Minimum rim-to-rim clearance between placed fruits, in cm. Keeps mask
# components separate through the morphological close.
PLACEMENT_CLEARANCE_CM = 0.5

# Per-class appearance: radius range (cm), base RGB, per-channel jitter.
FRUIT_APPEARANCE = {
    "apple": {"radius_cm": (1.35, 1.60), "base_rgb": (200, 30, 40), "rgb_jitter": 10},
    "orange": {"radius_cm": (1.25, 1.50), "base_rgb": (245, 140, 20), "rgb_jitter": 10},
}
MAX_ECCENTRICITY = 0.08


@dataclass(frozen=True, slots=True)
class GridSpec:
    """The calibration plate: holes equally spaced in both directions."""

    cols: int = 8
    rows: int = 6
    spacing_cm: float = 3.0

    def __post_init__(self):
        if self.cols < 1 or self.rows < 1:
            raise ValueError("grid must have at least one hole per axis")
        if self.spacing_cm <= 0:
            raise ValueError("spacing_cm must be positive")

    @property
    def hole_count(self) -> int:
        return self.cols * self.rows

    def holes(self):
        for j in range(self.rows):
            for i in range(self.cols):
                yield i, j

    def hole_world(self, i: int, j: int) -> WorldPoint:
        return WorldPoint(i * self.spacing_cm, j * self.spacing_cm)


def _default_intrinsics() -> CameraIntrinsics:
    return CameraIntrinsics(600.0, 600.0, 320.0, 240.0)


@dataclass(frozen=True, slots=True)
class SceneConfig:
    image_size: tuple[int, int] = (640, 480)
    grid: GridSpec = field(default_factory=GridSpec)
    camera_height_cm: float = 61.5
    intrinsics: CameraIntrinsics = field(default_factory=_default_intrinsics)
    fruit_count_per_class: int = 6
    rng_seed: int = 0

    def __post_init__(self):
        if self.camera_height_cm <= 0:
            raise ValueError("camera_height_cm must be positive")
        if self.fruit_count_per_class < 0:
            raise ValueError("fruit_count_per_class must be >= 0")

    def to_dict(self) -> dict:
        return {
            "image_size": list(self.image_size),
            "grid": {
                "cols": self.grid.cols,
                "rows": self.grid.rows,
                "spacing_cm": self.grid.spacing_cm,
            },
            "camera_height_cm": self.camera_height_cm,
            "intrinsics": {
                "fx": self.intrinsics.fx,
                "fy": self.intrinsics.fy,
                "cx": self.intrinsics.cx,
                "cy": self.intrinsics.cy,
            },
            "fruit_count_per_class": self.fruit_count_per_class,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SceneConfig":
        grid = data.get("grid", {})
        intr = data.get("intrinsics", {})
        defaults = cls()
        return cls(
            image_size=tuple(data.get("image_size", defaults.image_size)),
            grid=GridSpec(
                cols=int(grid.get("cols", defaults.grid.cols)),
                rows=int(grid.get("rows", defaults.grid.rows)),
                spacing_cm=float(grid.get("spacing_cm", defaults.grid.spacing_cm)),
            ),
            camera_height_cm=float(data.get("camera_height_cm", defaults.camera_height_cm)),
            intrinsics=CameraIntrinsics(
                fx=float(intr.get("fx", defaults.intrinsics.fx)),
                fy=float(intr.get("fy", defaults.intrinsics.fy)),
                cx=float(intr.get("cx", defaults.intrinsics.cx)),
                cy=float(intr.get("cy", defaults.intrinsics.cy)),
            ),
            fruit_count_per_class=int(
                data.get("fruit_count_per_class", defaults.fruit_count_per_class)
            ),
            rng_seed=int(data.get("rng_seed", defaults.rng_seed)),
        )

    def with_seed(self, seed: int) -> "SceneConfig":
        return replace(self, rng_seed=int(seed))

    def digest(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True, slots=True)
class FruitSpec:
    label: str
    hole: tuple[int, int]
    world: WorldPoint
    radius_cm: float
    base_rgb: tuple[int, int, int]
    eccentricity: float = 0.0
    orientation_deg: float = 0.0


@dataclass(frozen=True, slots=True)
class ShadowConfig:
    enabled: bool = False
    direction_deg: float = 35.0
    opacity: float = 0.5

    def __post_init__(self):
        if not (0.0 <= self.opacity <= 1.0):
            raise ValueError("shadow opacity must be in [0, 1]")


@dataclass(frozen=True, slots=True)
class ClutterConfig:
    leaf_count: int = 0
    leaf_hue_range: tuple[float, float] = (95.0, 140.0)
    leaf_saturation_range: tuple[float, float] = (0.50, 0.85)
    leaf_value_range: tuple[float, float] = (0.35, 0.70)
    leaf_size_range_cm: tuple[float, float] = (0.8, 2.0)

    def __post_init__(self):
        if self.leaf_count < 0:
            raise ValueError("leaf_count must be >= 0")


@dataclass(frozen=True, slots=True)
class DisturbanceConfig:
    lighting_gain: float = 1.0
    gamma: float = 1.0
    shadow: ShadowConfig = field(default_factory=ShadowConfig)
    clutter: ClutterConfig = field(default_factory=ClutterConfig)
    colour_jitter_deg: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.lighting_gain <= 0:
            raise ValueError("lighting_gain must be positive")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")

    def to_dict(self) -> dict:
        return {
            "lighting_gain": self.lighting_gain,
            "gamma": self.gamma,
            "shadow": {
                "enabled": self.shadow.enabled,
                "direction_deg": self.shadow.direction_deg,
                "opacity": self.shadow.opacity,
            },
            "clutter": {
                "leaf_count": self.clutter.leaf_count,
                "leaf_hue_range": list(self.clutter.leaf_hue_range),
                "leaf_saturation_range": list(self.clutter.leaf_saturation_range),
                "leaf_value_range": list(self.clutter.leaf_value_range),
                "leaf_size_range_cm": list(self.clutter.leaf_size_range_cm),
            },
            "colour_jitter_deg": list(self.colour_jitter_deg),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DisturbanceConfig":
        shadow = data.get("shadow", {})
        clutter = data.get("clutter", {})
        base = cls()
        return cls(
            lighting_gain=float(data.get("lighting_gain", base.lighting_gain)),
            gamma=float(data.get("gamma", base.gamma)),
            shadow=ShadowConfig(
                enabled=bool(shadow.get("enabled", False)),
                direction_deg=float(shadow.get("direction_deg", 35.0)),
                opacity=float(shadow.get("opacity", 0.5)),
            ),
            clutter=ClutterConfig(
                leaf_count=int(clutter.get("leaf_count", 0)),
                leaf_hue_range=tuple(clutter.get("leaf_hue_range", (95.0, 140.0))),
                leaf_saturation_range=tuple(clutter.get("leaf_saturation_range", (0.50, 0.85))),
                leaf_value_range=tuple(clutter.get("leaf_value_range", (0.35, 0.70))),
                leaf_size_range_cm=tuple(clutter.get("leaf_size_range_cm", (0.8, 2.0))),
            ),
            colour_jitter_deg=tuple(data.get("colour_jitter_deg", (0.0, 0.0))),
        )


@dataclass(frozen=True, slots=True)
class FruitTruth:
    label: str
    world: WorldPoint
    pixel: PixelPoint
    pixel_radius: float


@dataclass(frozen=True, slots=True)
class GroundTruth:
    fruits: tuple[FruitTruth, ...]
    homography: Homography
    config_digest: str


def project_to_pixel(cfg: SceneConfig, world: WorldPoint) -> PixelPoint:
    """Nadir pinhole projection of a plane point into the image."""
    z = cfg.camera_height_cm
    k = cfg.intrinsics
    return PixelPoint(k.cx + k.fx * world.x / z, k.cy + k.fy * world.y / z)


def scene_homography(cfg: SceneConfig) -> Homography:
    """The exact pixel->world homography implied by the scene camera."""
    z = cfg.camera_height_cm
    k = cfg.intrinsics
    return Homography(
        np.array(
            [
                [z / k.fx, 0.0, -k.cx * z / k.fx],
                [0.0, z / k.fy, -k.cy * z / k.fy],
                [0.0, 0.0, 1.0],
            ]
        )
    )


def grid_correspondences(cfg: SceneConfig) -> list[Correspondence]:
    """Pixel/world pairs for every grid hole: the calibration input."""
    return [
        Correspondence(project_to_pixel(cfg, cfg.grid.hole_world(i, j)), cfg.grid.hole_world(i, j))
        for i, j in cfg.grid.holes()
    ]


def generate_pattern(cfg: SceneConfig) -> list[FruitSpec]:
    """Place fruits on distinct grid holes, deterministically per seed.

    Fruits never overlap: a candidate hole is resampled until the disk
    keeps PLACEMENT_CLEARANCE_CM of clearance to every placed fruit.
    Raises GridTooSmall when the grid cannot host the pattern.
    """
    total = 2 * cfg.fruit_count_per_class
    if cfg.grid.hole_count < total:
        raise GridTooSmall(
            f"{cfg.grid.hole_count} holes cannot host {total} fruits"
        )
    rng = np.random.default_rng(cfg.rng_seed)
    labels = ["apple"] * cfg.fruit_count_per_class + ["orange"] * cfg.fruit_count_per_class
    placed: list[FruitSpec] = []
    free = list(cfg.grid.holes())
    for label in labels:
        look = FRUIT_APPEARANCE[label]
        for _ in range(500):
            index = int(rng.integers(0, len(free)))
            hole = free[index]
            radius = float(rng.uniform(*look["radius_cm"]))
            world = cfg.grid.hole_world(*hole)
            if any(
                math.hypot(world.x - p.world.x, world.y - p.world.y)
                < radius + p.radius_cm + PLACEMENT_CLEARANCE_CM
                for p in placed
            ):
                continue
            jitter = look["rgb_jitter"]
            base = tuple(
                int(np.clip(c + rng.integers(-jitter, jitter + 1), 0, 255))
                for c in look["base_rgb"]
            )
            placed.append(
                FruitSpec(
                    label=label,
                    hole=hole,
                    world=world,
                    radius_cm=radius,
                    base_rgb=base,
                    eccentricity=float(rng.uniform(0.0, MAX_ECCENTRICITY)),
                    orientation_deg=float(rng.uniform(0.0, 180.0)),
                )
            )
            free.pop(index)
            break
        else:
            raise GridTooSmall(
                f"could not place fruit {len(placed) + 1} of {total} without overlap"
            )
    return placed


def _world_axes(cfg: SceneConfig) -> tuple[np.ndarray, np.ndarray]:
    w, h = cfg.image_size
    z = cfg.camera_height_cm
    k = cfg.intrinsics
    xs = (np.arange(w) - k.cx) * (z / k.fx)
    ys = (np.arange(h) - k.cy) * (z / k.fy)
    return xs, ys


def _paint_ellipse(buf, xs, ys, center, a_cm, b_cm, angle_deg, colour, shade_falloff=None):
    """Fill an ellipse given in world coordinates; optional radial shading."""
    cos_t = math.cos(math.radians(angle_deg))
    sin_t = math.sin(math.radians(angle_deg))
    reach = max(a_cm, b_cm)
    ci = np.searchsorted(xs, [center.x - reach, center.x + reach])
    ri = np.searchsorted(ys, [center.y - reach, center.y + reach])
    c0, c1 = int(ci[0]), int(min(ci[1] + 1, len(xs)))
    r0, r1 = int(ri[0]), int(min(ri[1] + 1, len(ys)))
    if c0 >= c1 or r0 >= r1:
        return
    dx = xs[c0:c1][None, :] - center.x
    dy = ys[r0:r1][:, None] - center.y
    dxr = dx * cos_t + dy * sin_t
    dyr = -dx * sin_t + dy * cos_t
    rho2 = (dxr / a_cm) ** 2 + (dyr / b_cm) ** 2
    inside = rho2 <= 1.0
    window = buf[r0:r1, c0:c1]
    if shade_falloff is None:
        for ch in range(3):
            window[..., ch][inside] = colour[ch]
    else:
        shade = 1.0 - shade_falloff * rho2
        for ch in range(3):
            window[..., ch][inside] = colour[ch] * shade[inside]


def _jittered_colours(cfg, fruits, dist) -> list[tuple[float, float, float]]:
    lo, hi = dist.colour_jitter_deg
    colours = []
    if lo == 0.0 and hi == 0.0:
        return [tuple(float(c) for c in f.base_rgb) for f in fruits]
    rng = np.random.default_rng([cfg.rng_seed, 0x00C0])
    for fruit in fruits:
        offset = float(rng.uniform(lo, hi))
        h, s, v = rgb_to_hsv(*fruit.base_rgb)
        colours.append(tuple(float(c) for c in hsv_to_rgb((h + offset) % 360.0, s, v)))
    return colours


def render_scene(
    cfg: SceneConfig, fruits, dist: DisturbanceConfig | None = None
) -> tuple[np.ndarray, GroundTruth]:
    """Render the scene and its exact ground truth.

    Layers, in order: plate with grid holes, clutter leaves, fruit disks
    with radial shading, the shadow half-plane, then the global tone map
    ``out = clamp(255 * (gain * in/255) ** (1/gamma))`` quantized with
    round-half-even. Disturbances never change the ground truth.
    """
    if dist is None:
        dist = DisturbanceConfig()
    fruits = list(fruits)
    w, h = cfg.image_size
    xs, ys = _world_axes(cfg)
    buf = np.empty((h, w, 3), dtype=np.float64)
    buf[...] = PLATE_GREY

    for i, j in cfg.grid.holes():
        _paint_ellipse(
            buf, xs, ys, cfg.grid.hole_world(i, j), HOLE_RADIUS_CM, HOLE_RADIUS_CM, 0.0, HOLE_GREY
        )

    if dist.clutter.leaf_count > 0:
        rng = np.random.default_rng([cfg.rng_seed, 0x1EAF])
        grid_w = (cfg.grid.cols - 1) * cfg.grid.spacing_cm
        grid_h = (cfg.grid.rows - 1) * cfg.grid.spacing_cm
        for _ in range(dist.clutter.leaf_count):
            center = WorldPoint(
                rng.uniform(-1.0, grid_w + 1.0), rng.uniform(-1.0, grid_h + 1.0)
            )
            a = rng.uniform(*dist.clutter.leaf_size_range_cm)
            b = a * rng.uniform(0.35, 0.60)
            angle = rng.uniform(0.0, 180.0)
            colour = hsv_to_rgb(
                rng.uniform(*dist.clutter.leaf_hue_range),
                rng.uniform(*dist.clutter.leaf_saturation_range),
                rng.uniform(*dist.clutter.leaf_value_range),
            )
            _paint_ellipse(buf, xs, ys, center, a, b, angle, colour)

    for fruit, colour in zip(fruits, _jittered_colours(cfg, fruits, dist)):
        a = fruit.radius_cm * (1.0 + fruit.eccentricity)
        b = fruit.radius_cm * (1.0 - fruit.eccentricity)
        _paint_ellipse(
            buf, xs, ys, fruit.world, a, b, fruit.orientation_deg, colour,
            shade_falloff=SHADE_FALLOFF,
        )

    if dist.shadow.enabled and dist.shadow.opacity > 0.0:
        grid_center = WorldPoint(
            (cfg.grid.cols - 1) * cfg.grid.spacing_cm / 2.0,
            (cfg.grid.rows - 1) * cfg.grid.spacing_cm / 2.0,
        )
        nx = math.cos(math.radians(dist.shadow.direction_deg))
        ny = math.sin(math.radians(dist.shadow.direction_deg))
        signed = (xs[None, :] - grid_center.x) * nx + (ys[:, None] - grid_center.y) * ny
        buf[signed > 0.0] *= 1.0 - dist.shadow.opacity

    linear = dist.lighting_gain * (buf / 255.0)
    toned = 255.0 * np.power(linear, 1.0 / dist.gamma)
    img = np.clip(np.rint(toned), 0.0, 255.0).astype(np.uint8)

    z = cfg.camera_height_cm
    truths = tuple(
        FruitTruth(
            label=f.label,
            world=f.world,
            pixel=project_to_pixel(cfg, f.world),
            pixel_radius=cfg.intrinsics.fx * f.radius_cm / z,
        )
        for f in fruits
    )
    truth = GroundTruth(fruits=truths, homography=scene_homography(cfg), config_digest=cfg.digest())
    return img, truth


# ------------------------------------------------------------- bundle IO

def truth_to_dict(truth: GroundTruth) -> dict:
    return {
        "fruits": [
            {
                "label": f.label,
                "world_cm": [f.world.x, f.world.y],
                "pixel": [f.pixel.u, f.pixel.v],
                "pixel_radius": f.pixel_radius,
            }
            for f in truth.fruits
        ],
        "homography": [[float(x) for x in row] for row in truth.homography.matrix],
        "config_digest": truth.config_digest,
    }


def truth_from_dict(data: dict) -> GroundTruth:
    fruits = tuple(
        FruitTruth(
            label=str(f["label"]),
            world=WorldPoint(*(float(x) for x in f["world_cm"])),
            pixel=PixelPoint(*(float(x) for x in f["pixel"])),
            pixel_radius=float(f["pixel_radius"]),
        )
        for f in data["fruits"]
    )
    return GroundTruth(
        fruits=fruits,
        homography=Homography(np.array(data["homography"], dtype=float)),
        config_digest=str(data["config_digest"]),
    )


def write_scene_bundle(out_dir, name: str, image: np.ndarray, truth: GroundTruth) -> dict:
    """Write <name>.png and <name>.truth.json; returns a manifest entry."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    png_path = out_dir / f"{name}.png"
    truth_path = out_dir / f"{name}.truth.json"
    Image.fromarray(image, mode="RGB").save(png_path, format="PNG")
    truth_path.write_text(
        json.dumps(truth_to_dict(truth), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return {
        "name": name,
        "png": png_path.name,
        "truth": truth_path.name,
        "image_sha256": hashlib.sha256(image.tobytes()).hexdigest(),
    }


def read_scene_image(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def read_scene_truth(path) -> GroundTruth:
    return truth_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
