"""Block-wise gray-level co-occurrence matrices and the 14 Haralick features.

Gray levels are 0-based throughout, so sums over ``i + j`` run over
``0 .. 2 * (Ng - 1)``. Logarithms are natural and ``0 * log 0`` is taken
as 0. The co-occurrence matrix is directional (not symmetrized).
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from ._validation import check_gray_image
from .exceptions import EmptyCooccurrence, IncompatibleGrid, InvalidLevels, OffsetTooLarge

FEATURE_NAMES = (
    "angular_second_moment",
    "contrast",
    "correlation",
    "variance",
    "inverse_difference_moment",
    "sum_average",
    "sum_variance",
    "sum_entropy",
    "entropy",
    "difference_variance",
    "difference_entropy",
    "info_correlation_1",
    "info_correlation_2",
    "max_correlation_coefficient",
)

# imaginary residue tolerated in the eigenvalues of Q before warning
EIG_IMAG_TOL = 1e-8
EIG_ZERO_ULPS = 16


class ComplexEigenvalueWarning(RuntimeWarning):
    """The second eigenvalue of Q came out with a non-negligible imaginary part."""


def quantize(img, levels: int = 8) -> np.ndarray:
    """Uniform quantization of [0, 1] intensities to labels ``0 .. levels - 1``."""
    if int(levels) != levels or levels < 2:
        raise InvalidLevels(f"levels must be an integer >= 2, got {levels}")
    arr = check_gray_image(img)
    return np.minimum(np.floor(arr * levels), levels - 1).astype(np.intp)


@dataclass(frozen=True)
class CooccurrenceMatrix:
    counts: np.ndarray
    offset: tuple[int, int]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def levels(self) -> int:
        return self.counts.shape[0]


def cooccurrence(q, offset=(1, 0), levels: int | None = None) -> CooccurrenceMatrix:
    """Count label pairs ``(q[y, x], q[y + dy, x + dx])`` for ``offset = (dx, dy)``.

    Pairs whose second pixel falls outside the image are skipped.
    """
    q = np.asarray(q)
    if q.ndim != 2:
        raise ValueError("quantized image must be 2-D")
    if levels is None:
        levels = int(q.max()) + 1 if q.size else 1
        levels = max(levels, 2)
    if q.size and (q.min() < 0 or q.max() >= levels):
        raise InvalidLevels(f"labels must lie in [0, {levels})")
    dx, dy = (int(v) for v in offset)
    h, w = q.shape
    # an offset equal to the side length is legal and simply yields no pairs
    if abs(dx) > w or abs(dy) > h:
        raise OffsetTooLarge(f"offset {offset} too large for a {w}x{h} image")
    ys = slice(max(0, -dy), h - max(0, dy))
    xs = slice(max(0, -dx), w - max(0, dx))
    ys2 = slice(max(0, dy), h + min(0, dy))
    xs2 = slice(max(0, dx), w + min(0, dx))
    first = q[ys, xs].ravel()
    second = q[ys2, xs2].ravel()
    counts = np.bincount(first * levels + second, minlength=levels * levels)
    return CooccurrenceMatrix(counts.reshape(levels, levels), (dx, dy))


def _plogp(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x, dtype=np.float64)
    nz = x > 0
    out[nz] = x[nz] * np.log(x[nz])
    return out


@dataclass(frozen=True)
class Marginals:
    p: np.ndarray
    px: np.ndarray
    py: np.ndarray
    p_sum: np.ndarray   # index k = i + j, k in 0 .. 2(Ng - 1)
    p_diff: np.ndarray  # index k = |i - j|, k in 0 .. Ng - 1
    hx: float
    hy: float
    hxy: float
    hxy1: float
    hxy2: float
    q: np.ndarray


def marginals(P) -> Marginals:
    counts = P.counts if isinstance(P, CooccurrenceMatrix) else np.asarray(P)
    total = counts.sum()
    if total <= 0:
        raise EmptyCooccurrence("co-occurrence matrix has no pairs")
    ng = counts.shape[0]
    p = counts / total
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    i, j = np.indices(p.shape)
    p_sum = np.bincount((i + j).ravel(), weights=p.ravel(), minlength=2 * ng - 1)
    p_diff = np.bincount(np.abs(i - j).ravel(), weights=p.ravel(), minlength=ng)

    pxpy = np.outer(px, py)
    nz = p > 0
    hxy1 = -np.sum(p[nz] * np.log(pxpy[nz]))

    # Q(i, j) = sum_k p(i, k) p(j, k) / (p_x(i) p_y(k)), dropping zero marginals
    inv_px = np.divide(1.0, px, out=np.zeros_like(px), where=px > 0)
    inv_py = np.divide(1.0, py, out=np.zeros_like(py), where=py > 0)
    q = (p * inv_px[:, None] * inv_py[None, :]) @ p.T

    return Marginals(
        p=p, px=px, py=py, p_sum=p_sum, p_diff=p_diff,
        hx=-_plogp(px).sum(), hy=-_plogp(py).sum(), hxy=-_plogp(p).sum(),
        hxy1=hxy1, hxy2=-_plogp(pxpy).sum(), q=q,
    )


def _second_eigenvalue(q: np.ndarray) -> float:
    eig = np.linalg.eigvals(q)
    eig = eig[np.argsort(-eig.real, kind="stable")]
    second = eig[1]
    if abs(second.imag) > EIG_IMAG_TOL:
        warnings.warn(f"second eigenvalue of Q has imaginary part {second.imag:.3g}",
                      ComplexEigenvalueWarning, stacklevel=3)
    # values within solver round-off of zero are zero; sqrt would inflate them to ~1e-8
    if abs(second.real) <= EIG_ZERO_ULPS * np.finfo(float).eps * abs(eig[0].real):
        return 0.0
    return float(second.real)


def haralick14(P) -> np.ndarray:
    """The 14 Haralick features of a co-occurrence matrix, in the usual order.

    Degenerate denominators (zero marginal spread, zero marginal entropy)
    yield 0 for correlation and the first information measure.
    """
    m = marginals(P)
    p, px, py = m.p, m.px, m.py
    ng = p.shape[0]
    levels = np.arange(ng, dtype=np.float64)
    i, j = np.meshgrid(levels, levels, indexing="ij")

    mu_x = levels @ px
    mu_y = levels @ py
    sigma_x = np.sqrt(((levels - mu_x) ** 2) @ px)
    sigma_y = np.sqrt(((levels - mu_y) ** 2) @ py)

    k_sum = np.arange(len(m.p_sum), dtype=np.float64)
    k_diff = np.arange(ng, dtype=np.float64)

    f = np.empty(14)
    f[0] = np.sum(p ** 2)
    f[1] = k_diff ** 2 @ m.p_diff
    denom = sigma_x * sigma_y
    f[2] = (np.sum(i * j * p) - mu_x * mu_y) / denom if denom > 0 else 0.0
    f[3] = np.sum((i - mu_x) ** 2 * p)
    f[4] = np.sum(p / (1.0 + (i - j) ** 2))
    f[5] = k_sum @ m.p_sum
    f[6] = (k_sum - f[5]) ** 2 @ m.p_sum
    f[7] = -_plogp(m.p_sum).sum()
    f[8] = m.hxy
    mu_diff = k_diff @ m.p_diff
    f[9] = (k_diff - mu_diff) ** 2 @ m.p_diff
    f[10] = -_plogp(m.p_diff).sum()
    hmax = max(m.hx, m.hy)
    f[11] = (m.hxy - m.hxy1) / hmax if hmax > 0 else 0.0
    f[12] = np.sqrt(np.clip(1.0 - np.exp(-2.0 * (m.hxy2 - m.hxy)), 0.0, 1.0))
    f[13] = np.sqrt(max(0.0, _second_eigenvalue(m.q)))
    return f + 0.0  # folds -0.0 from the entropy sums into 0.0


def _block_slices(shape, grid):
    rows, cols = grid
    h, w = shape
    if rows < 1 or cols < 1 or h % rows or w % cols:
        raise IncompatibleGrid(f"a {rows}x{cols} block grid does not divide a {w}x{h} image")
    bh, bw = h // rows, w // cols
    for r in range(rows):
        for c in range(cols):
            yield slice(r * bh, (r + 1) * bh), slice(c * bw, (c + 1) * bw)


def block_haralick(img, grid=(3, 4), levels: int = 8, offset=(1, 0)) -> np.ndarray:
    """Haralick vectors of each block, shape (rows * cols, 14), row-major block order."""
    q = quantize(img, levels)
    out = []
    for ys, xs in _block_slices(q.shape, grid):
        P = cooccurrence(q[ys, xs], offset, levels)
        if P.total == 0:
            raise EmptyCooccurrence(f"block {ys}, {xs} has no pixel pairs for offset {offset}")
        out.append(haralick14(P))
    return np.array(out)


def block_texture_features(img, grid=(3, 4), levels: int = 8, offset=(1, 0)) -> np.ndarray:
    """Concatenated per-block Haralick vectors; length 14 * rows * cols.

    ``grid`` is (rows, cols). The default 3 rows by 4 columns cuts a
    64x48 image into twelve 16x16 blocks.
    """
    return block_haralick(img, grid, levels, offset).ravel()


def write_block_csv(path, blocks: np.ndarray) -> None:
    """Dump per-block Haralick vectors with a ``block,f1..f14`` header."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["block"] + [f"f{k}" for k in range(1, 15)])
        for b, row in enumerate(np.asarray(blocks).reshape(-1, 14)):
            writer.writerow([b] + [repr(float(v)) for v in row])
