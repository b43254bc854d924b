"""Feature concatenation and principal component analysis.

The scatter matrix is the unnormalized sum of outer products of centred
samples, ``C = sum_i z_i z_i^T``; its eigenvalues are therefore ``N`` times
those of the usual covariance estimate. Ratios (retained variance) and
eigenvectors are unaffected.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg

from ._validation import check_vectors
from .exceptions import BadK, DegenerateSpectrum, DimensionMismatch, TooFewSamples

FIT_METHODS = ("auto", "covariance", "gram", "svd")


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    n_scatter: int
    n_texture: int

    def __post_init__(self):
        if len(self.values) != self.n_scatter + self.n_texture:
            raise DimensionMismatch("feature length does not match its layout")

    def __len__(self):
        return len(self.values)

    @property
    def scatter(self) -> np.ndarray:
        return self.values[: self.n_scatter]

    @property
    def texture(self) -> np.ndarray:
        return self.values[self.n_scatter:]


def concat_features(fs, ft) -> FeatureVector:
    """Scattering features followed by texture features."""
    fs = np.asarray(fs, dtype=np.float64).ravel()
    ft = np.asarray(ft, dtype=np.float64).ravel()
    if fs.size == 0 or ft.size == 0:
        raise ValueError("both scattering and texture features must be non-empty")
    return FeatureVector(np.concatenate([fs, ft]), fs.size, ft.size)


def _as_matrix(features) -> np.ndarray:
    if isinstance(features, np.ndarray):
        return check_vectors(features, name="features")
    rows = [f.values if isinstance(f, FeatureVector) else np.asarray(f, dtype=np.float64)
            for f in features]
    dims = {np.shape(r) for r in rows}
    if len(dims) > 1:
        raise DimensionMismatch(f"feature vectors have differing shapes {sorted(dims)}")
    return check_vectors(np.array(rows), name="features")


@dataclass(frozen=True, eq=False)
class PcaModel:
    """Fitted PCA: ``components[:, k]`` is the k-th eigenvector of the scatter matrix.

    ``scale`` is None unless features were standardized before fitting.
    """

    mean: np.ndarray
    eigenvalues: np.ndarray
    components: np.ndarray
    n_samples: int
    scale: np.ndarray | None = None

    @property
    def n_features(self) -> int:
        return len(self.mean)

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.eigenvalues > 0))

    @cached_property
    def fingerprint(self) -> str:
        h = hashlib.sha256(b"scatiris-pca-v1")
        h.update(np.array([self.n_features, self.n_samples], dtype="<i8").tobytes())
        for arr in (self.mean, self.eigenvalues, self.components):
            h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        if self.scale is not None:
            h.update(np.ascontiguousarray(self.scale, dtype="<f8").tobytes())
        return h.hexdigest()[:16]

    def center(self, X) -> np.ndarray:
        Z = np.asarray(X, dtype=np.float64) - self.mean
        if self.scale is not None:
            Z = Z / self.scale
        return Z


@dataclass(frozen=True)
class ReducedVector:
    values: np.ndarray
    fingerprint: str

    def __len__(self):
        return len(self.values)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of each column made positive (first one on ties)
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _eig_covariance(Z):
    vals, vecs = np.linalg.eigh(Z.T @ Z)
    return vals[::-1], vecs[:, ::-1]


def _eig_gram(Z):
    vals, u = np.linalg.eigh(Z @ Z.T)
    vals, u = vals[::-1], u[:, ::-1]
    return vals, u


def _eig_svd(Z):
    _, s, vt = np.linalg.svd(Z, full_matrices=True)
    vals = np.zeros(Z.shape[1])
    vals[: len(s)] = s ** 2
    return vals, vt.T


def fit_pca(features, *, standardize: bool = False, method: str = "auto") -> PcaModel:
    """Fit PCA on N feature vectors of dimension d.

    ``method`` selects the factorization: eigendecomposition of the d x d
    scatter matrix, of the N x N Gram matrix (``auto`` picks this when
    N < d), or SVD of the centred data. All routes return the full set of d
    orthonormal eigenvectors; directions outside the data span get
    eigenvalue 0.
    """
    if method not in FIT_METHODS:
        raise ValueError(f"method must be one of {FIT_METHODS}, got {method!r}")
    X = _as_matrix(features)
    n, d = X.shape
    if n < 2:
        raise TooFewSamples(f"PCA needs at least 2 samples, got {n}")
    mean = X.mean(axis=0)
    scale = None
    if standardize:
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
    Z = X - mean
    if scale is not None:
        Z = Z / scale

    if method == "auto":
        method = "gram" if n < d else "covariance"
    if method == "covariance":
        vals, vecs = _eig_covariance(Z)
    elif method == "svd":
        vals, vecs = _eig_svd(Z)
    else:
        vals, u = _eig_gram(Z)
        vals = vals[: min(n, d)]
        u = u[:, : len(vals)]

    vals = np.asarray(vals, dtype=np.float64)
    top = max(vals[0], 0.0) if len(vals) else 0.0
    vals = np.where(vals > top * max(n, d) * np.finfo(float).eps, vals, 0.0)

    if method == "gram":
        r = int(np.count_nonzero(vals))
        v = Z.T @ u[:, :r] / np.sqrt(vals[:r])
        # re-orthonormalize against round-off, then complete the basis
        v, _ = np.linalg.qr(v)
        null = scipy.linalg.null_space(v.T) if r < d else np.empty((d, 0))
        vecs = np.hstack([v, null])
        vals = np.concatenate([vals[:r], np.zeros(d - r)])
    else:
        vals = vals[:d]

    return PcaModel(mean=mean, eigenvalues=vals, components=_fix_signs(vecs),
                    n_samples=n, scale=scale)


def _check_k(model: PcaModel, K) -> int:
    if int(K) != K or not 1 <= K <= model.n_features:
        raise BadK(f"K must be an integer in [1, {model.n_features}], got {K}")
    return int(K)


def project_many(model: PcaModel, X, K: int) -> np.ndarray:
    """Project rows of ``X`` onto the leading ``K`` principal directions."""
    K = _check_k(model, K)
    X = check_vectors(X, n_features=model.n_features)
    return model.center(X) @ model.components[:, :K]


def project(model: PcaModel, f, K: int) -> ReducedVector:
    values = f.values if isinstance(f, FeatureVector) else np.asarray(f, dtype=np.float64)
    if values.ndim != 1:
        raise DimensionMismatch("project expects a single feature vector")
    return ReducedVector(project_many(model, values, K)[0], model.fingerprint)


def reconstruct(model: PcaModel, alpha) -> np.ndarray:
    """Map reduced coordinates back to feature space."""
    alpha = np.asarray(alpha, dtype=np.float64)
    K = alpha.shape[-1]
    _check_k(model, K)
    Z = alpha @ model.components[:, :K].T
    if model.scale is not None:
        Z = Z * model.scale
    return Z + model.mean


def _spectrum_total(model: PcaModel) -> np.ndarray:
    cum = np.cumsum(model.eigenvalues)
    if cum[-1] <= 0:
        raise DegenerateSpectrum("all eigenvalues are zero")
    return cum


def retained_variance(model: PcaModel, k: int) -> float:
    """Fraction of the spectrum carried by the first ``k`` eigenvalues."""
    k = _check_k(model, k)
    cum = _spectrum_total(model)
    return float(cum[k - 1] / cum[-1])


def choose_k(model: PcaModel, epsilon: float = 0.99) -> int:
    """Smallest k whose retained variance reaches ``epsilon``."""
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must be in (0, 1], got {epsilon}")
    cum = _spectrum_total(model)
    ratios = cum / cum[-1]
    # slack of a few ulps so that exact ties such as 3/4 at 0.75 are reached
    return int(np.argmax(ratios >= epsilon - 4 * np.finfo(float).eps)) + 1
