"""scikit-learn style estimators wrapping the functional pipeline.

These adapters let the calibration and detection steps compose with the
wider ecosystem (clone, get_params/set_params, pipelines):

  - :class:`HomographyTransformer` fits the pixel->world plane map from
    point correspondences and transforms pixel arrays to world coordinates.
  - :class:`HsvFruitDetector` predicts labelled fruit detections from
    RGB images using the colour segmentation pipeline.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .detect import detect_hsv
from .geometry import (
    Correspondence,
    PixelPoint,
    WorldPoint,
    estimate_homography,
    reprojection_error,
    transform_points,
)
from .hsv import DEFAULT_FRUIT_RANGES, DEFAULT_MIN_AREA, DEFAULT_MORPH_RADIUS, HsvRange
from .validation import check_points, check_rgb_image


class HomographyTransformer(TransformerMixin, BaseEstimator):
    """Planar pixel->world calibration as a transformer.

    ``fit(X, y)`` takes pixel coordinates ``X`` (n, 2) and their known
    world positions ``y`` (n, 2, cm); ``transform`` maps pixel arrays to
    world coordinates through the fitted homography.

    Attributes
    ----------
    homography_ : fitted :class:`~fruitgrid.geometry.Homography`
    rms_reprojection_error_cm_ : float
    n_correspondences_ : int
    """

    def fit(self, X, y):
        X = check_points(X, "X")
        y = check_points(y, "y")
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y must hold the same number of points")
        corrs = [
            Correspondence(PixelPoint(u, v), WorldPoint(a, b))
            for (u, v), (a, b) in zip(X, y)
        ]
        self.homography_ = estimate_homography(corrs)
        self.rms_reprojection_error_cm_ = reprojection_error(self.homography_, corrs)
        self.n_correspondences_ = len(corrs)
        return self

    def _check_fitted(self):
        if not hasattr(self, "homography_"):
            raise NotFittedError("HomographyTransformer must be fitted before use")

    def transform(self, X) -> np.ndarray:
        self._check_fitted()
        return transform_points(self.homography_, check_points(X, "X"))

    def inverse_transform(self, Y) -> np.ndarray:
        self._check_fitted()
        return transform_points(self.homography_.inverse(), check_points(Y, "Y"))


class HsvFruitDetector(BaseEstimator):
    """Colour-threshold fruit detector with a predict interface.

    Parameters
    ----------
    ranges : sequence of (label, HsvRange) or None
        Detection ranges; None selects the built-in fruit defaults.
    min_area : int
        Minimum component area in px^2.
    morph_radius : int
        Kernel radius of the open/close cleanup.
    """

    def __init__(self, ranges=None, min_area=DEFAULT_MIN_AREA, morph_radius=DEFAULT_MORPH_RADIUS):
        self.ranges = ranges
        self.min_area = min_area
        self.morph_radius = morph_radius

    def fit(self, X=None, y=None):
        ranges = DEFAULT_FRUIT_RANGES if self.ranges is None else self.ranges
        resolved = []
        for label, rng in ranges:
            if not isinstance(rng, HsvRange):
                raise ValueError(f"range for {label!r} must be an HsvRange")
            resolved.append((str(label), rng))
        if int(self.min_area) < 0:
            raise ValueError("min_area must be >= 0")
        if int(self.morph_radius) < 0:
            raise ValueError("morph_radius must be >= 0")
        self.ranges_ = tuple(resolved)
        return self

    def _check_fitted(self):
        if not hasattr(self, "ranges_"):
            raise NotFittedError("HsvFruitDetector must be fitted before use")

    def predict(self, X):
        """Detections for one image or a list of images.

        A single (h, w, 3) array yields a list of Detections; an iterable
        of images yields one list per image.
        """
        self._check_fitted()
        if isinstance(X, np.ndarray) and X.ndim == 3:
            return self._predict_one(X)
        return [self._predict_one(img) for img in X]

    def _predict_one(self, img):
        img = check_rgb_image(img)
        return detect_hsv(
            img,
            self.ranges_,
            min_area=int(self.min_area),
            morph_radius=int(self.morph_radius),
        )
