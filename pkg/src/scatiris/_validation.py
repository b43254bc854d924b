"""Input validation helpers shared by the functional API and the estimators."""

from __future__ import annotations

import numpy as np

from .exceptions import DimensionMismatch


def check_gray_image(img, *, name: str = "img") -> np.ndarray:
    """Return ``img`` as a float64 (height, width) array with values in [0, 1].

    Raises ``ValueError`` for wrong rank, empty input, non-finite values or
    intensities outside the unit interval.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"{name} intensities must lie in [0, 1]")
    return arr


def check_images(X, *, name: str = "X") -> np.ndarray:
    """Validate a stack of same-sized gray images, shape (n, height, width).

    A single 2-D image is promoted to a stack of one.
    """
    if isinstance(X, (list, tuple)):
        shapes = {np.shape(x) for x in X}
        if len(shapes) > 1:
            raise DimensionMismatch(f"{name} mixes image shapes {sorted(shapes)}")
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[np.newaxis]
    if arr.ndim != 3 or arr.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty stack of 2-D images, got shape {arr.shape}")
    for i, img in enumerate(arr):
        check_gray_image(img, name=f"{name}[{i}]")
    return arr


def check_vectors(X, *, name: str = "X", n_features: int | None = None) -> np.ndarray:
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[np.newaxis]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if n_features is not None and arr.shape[1] != n_features:
        raise DimensionMismatch(f"{name} has {arr.shape[1]} features, expected {n_features}")
    return arr
