"""scikit-learn compatible estimators wrapping the functional core.

The full recognizer composes as an ordinary pipeline::

    from sklearn.pipeline import make_pipeline
    clf = make_pipeline(IrisFeatureExtractor(), PCAReducer(epsilon=0.99),
                        MinimumDistanceClassifier())
    clf.fit(train_images, train_ids).score(test_images, test_ids)

Image inputs are stacks shaped (n_images, height, width) with intensities
in [0, 1].
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_gray_image, check_images, check_vectors
from .corpus import check_target, resize_bilinear
from .exceptions import SizeMismatch
from .features import (
    FeatureVector,
    ReducedVector,
    choose_k,
    fit_pca,
    project_many,
    reconstruct,
    retained_variance,
)
from .matcher import Gallery, identify
from .scattering import (
    ScatteringConfig,
    build_filter_bank,
    scattering_features,
    scattering_path_count,
)
from .texture import _block_slices, block_texture_features


class ScatteringTransformer(TransformerMixin, BaseEstimator):
    """Mean and variance of every scattering map up to order ``max_order``."""

    def __init__(self, J=5, n_orientations=6, max_order=2):
        self.J = J
        self.n_orientations = n_orientations
        self.max_order = max_order

    def _config(self):
        return ScatteringConfig(self.J, self.n_orientations, self.max_order)

    def fit(self, X, y=None):
        X = check_images(X)
        h, w = X.shape[1:]
        self.bank_ = build_filter_bank(self._config(), (w, h))
        self.n_features_out_ = 2 * scattering_path_count(self._config())
        return self

    def transform(self, X):
        check_is_fitted(self, "bank_")
        X = check_images(X)
        if X.shape[1:] != self.bank_.shape:
            raise SizeMismatch(f"fitted for images of shape {self.bank_.shape}, got {X.shape[1:]}")
        cfg = self._config()
        return np.array([scattering_features(x, self.bank_, cfg) for x in X])


class HaralickTransformer(TransformerMixin, BaseEstimator):
    """Block-wise Haralick features; ``grid`` is (rows, cols) of blocks."""

    def __init__(self, grid=(3, 4), levels=8, offset=(1, 0)):
        self.grid = grid
        self.levels = levels
        self.offset = offset

    def fit(self, X, y=None):
        X = check_images(X)
        list(_block_slices(X.shape[1:], self.grid))
        self.image_shape_ = X.shape[1:]
        self.n_features_out_ = 14 * self.grid[0] * self.grid[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "image_shape_")
        X = check_images(X)
        return np.array([block_texture_features(x, self.grid, self.levels, self.offset)
                         for x in X])


class IrisFeatureExtractor(TransformerMixin, BaseEstimator):
    """Resize to ``size`` = (width, height), then scattering features followed by texture features.

    Inputs whose shape differs from ``size`` are resized bilinearly; a list
    of differently-sized images is accepted. ``n_jobs`` threads share the
    filter bank; output order never depends on scheduling.
    """

    def __init__(self, size=(64, 48), J=5, n_orientations=6, max_order=2, texture=True,
                 grid=(3, 4), levels=8, offset=(1, 0), n_jobs=1):
        self.size = size
        self.J = J
        self.n_orientations = n_orientations
        self.max_order = max_order
        self.texture = texture
        self.grid = grid
        self.levels = levels
        self.offset = offset
        self.n_jobs = n_jobs

    @classmethod
    def from_config(cls, config, n_jobs=1):
        return cls(size=config.size, J=config.J, n_orientations=config.p, max_order=config.m,
                   texture=config.texture, grid=config.grid, levels=config.levels,
                   offset=config.offset, n_jobs=n_jobs)

    def _prepare(self, X) -> np.ndarray:
        width, height = self.size
        if isinstance(X, (list, tuple)):
            X = [check_gray_image(x) for x in X]
            return np.array([resize_bilinear(x, self.size) if x.shape != (height, width) else x
                             for x in X])
        X = check_images(X)
        if X.shape[1:] != (height, width):
            X = np.array([resize_bilinear(x, self.size) for x in X])
        return X

    def fit(self, X=None, y=None):
        check_target(self.size, self.grid if self.texture else (1, 1), self.J)
        width, height = self.size
        blank = np.zeros((1, height, width))
        self.scattering_ = ScatteringTransformer(self.J, self.n_orientations,
                                                 self.max_order).fit(blank)
        self.haralick_ = (HaralickTransformer(self.grid, self.levels, self.offset).fit(blank)
                          if self.texture else None)
        self.layout_ = (self.scattering_.n_features_out_,
                        self.haralick_.n_features_out_ if self.texture else 0)
        self.n_features_out_ = sum(self.layout_)
        return self

    def extract_one(self, img) -> FeatureVector:
        """Feature vector of a single image."""
        check_is_fitted(self, "layout_")
        x = self._prepare([img])[0]
        cfg = self.scattering_._config()
        fs = scattering_features(x, self.scattering_.bank_, cfg)
        if self.texture:
            ft = block_texture_features(x, self.grid, self.levels, self.offset)
            return FeatureVector(np.concatenate([fs, ft]), fs.size, ft.size)
        return FeatureVector(fs, fs.size, 0)

    def transform(self, X):
        check_is_fitted(self, "layout_")
        X = self._prepare(X)
        if self.n_jobs == 1 or len(X) == 1:
            rows = [self.extract_one(x).values for x in X]
        else:
            workers = None if self.n_jobs in (None, -1) else self.n_jobs
            with ThreadPoolExecutor(max_workers=workers) as pool:
                rows = [fv.values for fv in pool.map(self.extract_one, X)]
        return np.array(rows)


class PCAReducer(TransformerMixin, BaseEstimator):
    """PCA keeping ``n_components`` directions, or the fewest reaching ``epsilon``."""

    def __init__(self, n_components=None, epsilon=0.99, standardize=False, method="auto"):
        self.n_components = n_components
        self.epsilon = epsilon
        self.standardize = standardize
        self.method = method

    def fit(self, X, y=None):
        self.model_ = fit_pca(check_vectors(X), standardize=self.standardize, method=self.method)
        if self.n_components is None:
            self.n_components_ = choose_k(self.model_, self.epsilon)
        else:
            self.n_components_ = int(self.n_components)
        self.retained_variance_ = retained_variance(self.model_, self.n_components_)
        self.fingerprint_ = self.model_.fingerprint
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        return project_many(self.model_, X, self.n_components_)

    def inverse_transform(self, X):
        check_is_fitted(self, "model_")
        return reconstruct(self.model_, X)


class MinimumDistanceClassifier(ClassifierMixin, BaseEstimator):
    """Label of the nearest training sample under Euclidean distance.

    Every training row is kept as its own template; ties go to the row
    seen first during ``fit``.
    """

    _FINGERPRINT = "unbound"

    def fit(self, X, y):
        X = check_vectors(X)
        y = np.asarray(y)
        if len(y) != len(X):
            raise ValueError("X and y have different lengths")
        self.gallery_ = Gallery().enroll_many([str(v) for v in y], X, self._FINGERPRINT)
        self.classes_ = np.unique(y)
        self._labels = {str(v): v for v in y}
        self.n_features_in_ = X.shape[1]
        return self

    def match(self, X):
        check_is_fitted(self, "gallery_")
        X = check_vectors(X, n_features=self.n_features_in_)
        return [identify(self.gallery_, ReducedVector(x, self._FINGERPRINT)) for x in X]

    def predict(self, X):
        return np.array([self._labels[r.subject] for r in self.match(X)])
