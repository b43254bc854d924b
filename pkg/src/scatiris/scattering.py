"""Two-dimensional wavelet scattering with global mean/variance pooling.

Filters are built directly in the Fourier domain on the DFT grid of the
working image, so every convolution is circular and exact. Scale index
``j`` denotes a wavelet of spatial width ``0.8 * 2**j``: ``j = 0`` is the
finest band. A second-order path ``(j1, l1) -> (j2, l2)`` is kept only when
``j2 > j1``, i.e. the second wavelet is strictly coarser than the first,
which is where the modulus of the first band still carries energy.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from ._validation import check_gray_image
from .exceptions import IncompatibleSize, SizeMismatch

SIGMA0 = 0.8
XI0 = 3 * np.pi / 4
SLANT = 0.5
_PERIODS = 2  # aliases summed on each side when periodizing the spectra

Path_ = tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class ScatteringConfig:
    J: int = 5
    p: int = 6
    m: int = 2

    def __post_init__(self):
        if int(self.J) != self.J or self.J < 1:
            raise ValueError(f"J must be an integer >= 1, got {self.J}")
        if int(self.p) != self.p or self.p < 1:
            raise ValueError(f"p must be an integer >= 1, got {self.p}")
        if self.m not in (0, 1, 2):
            raise ValueError(f"m must be 0, 1 or 2, got {self.m}")


def scattering_path_count(config: ScatteringConfig) -> int:
    """Number of transformed images up to order m: sum of p**k * C(J, k)."""
    return sum(config.p ** k * math.comb(config.J, k) for k in range(config.m + 1))


def scattering_paths(config: ScatteringConfig) -> list[Path_]:
    """Admissible paths in canonical order: by layer, then lexicographic.

    Within a path the scale indices strictly increase.
    """
    nodes = [(j, l) for j in range(config.J) for l in range(config.p)]
    paths: list[Path_] = [()]
    for k in range(1, config.m + 1):
        for path in itertools.product(nodes, repeat=k):
            if all(a[0] < b[0] for a, b in zip(path, path[1:])):
                paths.append(path)
    return paths


# --------------------------------------------------------------------------
# filters
# --------------------------------------------------------------------------

def _freq_grid(shape):
    h, w = shape
    wy = 2 * np.pi * np.fft.fftfreq(h)[:, None]
    wx = 2 * np.pi * np.fft.fftfreq(w)[None, :]
    return wy, wx


def gabor_spectrum(shape, sigma: float, theta: float, xi: float,
                   slant: float = 1.0) -> np.ndarray:
    """Periodized Fourier transform of a unit-DC Gabor atom on a DFT grid.

    The envelope has width ``sigma`` along direction ``theta`` and
    ``sigma / slant`` across it; the carrier has angular frequency ``xi``
    along ``theta``. Periodizing in frequency corresponds to sampling the
    continuous atom on the integer pixel lattice.
    """
    wy, wx = _freq_grid(shape)
    c, s = np.cos(theta), np.sin(theta)
    out = np.zeros(np.broadcast_shapes(wy.shape, wx.shape))
    span = range(-_PERIODS, _PERIODS + 1)
    for ny in span:
        for nx in span:
            ux = wx + 2 * np.pi * nx - xi * c
            uy = wy + 2 * np.pi * ny - xi * s
            u = c * ux + s * uy
            v = -s * ux + c * uy
            out += np.exp(-0.5 * sigma ** 2 * (u ** 2 + (v / slant) ** 2))
    return out


def morlet_spectrum(shape, sigma: float, theta: float, xi: float,
                    slant: float = SLANT) -> np.ndarray:
    """Morlet wavelet: Gabor atom minus the multiple of its envelope that zeroes DC."""
    gabor = gabor_spectrum(shape, sigma, theta, xi, slant)
    envelope = gabor_spectrum(shape, sigma, theta, 0.0, slant)
    beta = gabor[0, 0] / envelope[0, 0]
    psi = gabor - beta * envelope
    psi[0, 0] = 0.0
    return psi


def gaussian_spectrum(shape, sigma: float) -> np.ndarray:
    """Isotropic periodized Gaussian low-pass with unit DC gain."""
    phi = gabor_spectrum(shape, sigma, 0.0, 0.0, 1.0)
    return phi / phi[0, 0]


@dataclass(frozen=True)
class FilterBank:
    """Fourier-domain filters for one working size.

    ``psi`` has shape (J, p, height, width); ``phi`` has shape (height, width).
    Both are real-valued, read-only arrays.
    """

    psi: np.ndarray
    phi: np.ndarray
    size: tuple[int, int]  # (width, height)

    @property
    def J(self) -> int:
        return self.psi.shape[0]

    @property
    def p(self) -> int:
        return self.psi.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.phi.shape


def orientation(l: int, p: int) -> float:
    return np.pi * l / p


def build_filter_bank(config: ScatteringConfig, size) -> FilterBank:
    """Build Morlet band-pass filters at scales 2**j and a Gaussian low-pass at 2**J.

    ``size`` is (width, height). The width must be a multiple of ``2**J``;
    maps are never subsampled, so the height only needs to be positive.
    """
    width, height = (int(v) for v in size)
    step = 2 ** config.J
    if width <= 0 or height <= 0 or width % step:
        raise IncompatibleSize(f"width {width} is not a positive multiple of 2**J = {step}")
    shape = (height, width)
    psi = np.empty((config.J, config.p) + shape)
    for j in range(config.J):
        for l in range(config.p):
            psi[j, l] = morlet_spectrum(shape, SIGMA0 * 2 ** j, orientation(l, config.p),
                                        XI0 / 2 ** j)
    phi = gaussian_spectrum(shape, SIGMA0 * 2 ** config.J)
    psi.flags.writeable = False
    phi.flags.writeable = False
    return FilterBank(psi=psi, phi=phi, size=(width, height))


# --------------------------------------------------------------------------
# transform
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ScatteringMaps:
    """Scattering outputs in canonical path order; ``maps`` is (n, height, width)."""

    paths: list[Path_]
    maps: np.ndarray

    def __len__(self):
        return len(self.paths)

    def __iter__(self):
        return iter(zip(self.paths, self.maps))

    def layer(self, k: int) -> np.ndarray:
        idx = [i for i, path in enumerate(self.paths) if len(path) == k]
        return self.maps[idx]


def _smooth(x_hat: np.ndarray, phi: np.ndarray) -> np.ndarray:
    return np.fft.ifft2(x_hat * phi).real


def scatter(img, bank: FilterBank, config: ScatteringConfig | None = None) -> ScatteringMaps:
    """Compute every scattering map of ``img`` up to order ``config.m``.

    Maps are kept at full input resolution (no subsampling).
    """
    x = check_gray_image(img)
    if config is None:
        config = ScatteringConfig(J=bank.J, p=bank.p)
    if (config.J, config.p) != (bank.J, bank.p):
        raise SizeMismatch(f"bank built for J={bank.J}, p={bank.p}; config asks "
                           f"J={config.J}, p={config.p}")
    if x.shape != bank.shape:
        raise SizeMismatch(f"image shape {x.shape} does not match bank shape {bank.shape}")
    J, p = config.J, config.p
    psi, phi = bank.psi, bank.phi

    x_hat = np.fft.fft2(x)
    paths: list[Path_] = [()]
    maps = [_smooth(x_hat, phi)]
    if config.m >= 1:
        u1 = np.abs(np.fft.ifft2(x_hat * psi))  # (J, p, h, w)
        u1_hat = np.fft.fft2(u1)
        s1 = _smooth(u1_hat, phi)
        for j1 in range(J):
            for l1 in range(p):
                paths.append(((j1, l1),))
                maps.append(s1[j1, l1])
    if config.m >= 2:
        for j1 in range(J):
            if j1 == J - 1:
                continue
            coarser = psi[j1 + 1:]  # (J - j1 - 1, p, h, w)
            for l1 in range(p):
                u2 = np.abs(np.fft.ifft2(u1_hat[j1, l1] * coarser))
                s2 = _smooth(np.fft.fft2(u2), phi)
                for dj in range(J - j1 - 1):
                    for l2 in range(p):
                        paths.append(((j1, l1), (j1 + 1 + dj, l2)))
                        maps.append(s2[dj, l2])
    return ScatteringMaps(paths=paths, maps=np.stack(maps))


def pool_scattering(maps) -> np.ndarray:
    """Population mean and variance of each map, interleaved as (mean, var) pairs."""
    arr = maps.maps if isinstance(maps, ScatteringMaps) else np.asarray(maps, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[np.newaxis]
    if arr.ndim != 3 or arr.shape[0] == 0:
        raise ValueError("pool_scattering needs a non-empty stack of 2-D maps")
    flat = arr.reshape(arr.shape[0], -1)
    mean = flat.mean(axis=1)
    var = ((flat - mean[:, None]) ** 2).mean(axis=1)
    out = np.empty(2 * len(mean))
    out[0::2] = mean
    out[1::2] = var
    return out


def _parseval_pool(u_hat: np.ndarray, phi_half: np.ndarray, weights: np.ndarray,
                   n: int) -> tuple[np.ndarray, np.ndarray]:
    # u_hat: rfft2 of real maps; mean and variance of irfft2(u_hat * phi) without
    # the inverse transform. The DC term is excluded from the variance sum.
    mean = u_hat[..., 0, 0].real / n
    power = np.abs(u_hat * phi_half) ** 2 * weights
    power[..., 0, 0] = 0.0
    var = power.sum(axis=(-2, -1)) / n ** 2
    return mean, var


def scattering_features(img, bank: FilterBank, config: ScatteringConfig | None = None) -> np.ndarray:
    """Pooled scattering features of ``img``.

    Equal to ``pool_scattering(scatter(img, bank, config))`` up to round-off,
    but each map's mean and variance are read off its spectrum (Parseval), so
    the smoothed maps are never transformed back to space.
    """
    x = check_gray_image(img)
    if config is None:
        config = ScatteringConfig(J=bank.J, p=bank.p)
    if (config.J, config.p) != (bank.J, bank.p):
        raise SizeMismatch(f"bank built for J={bank.J}, p={bank.p}; config asks "
                           f"J={config.J}, p={config.p}")
    if x.shape != bank.shape:
        raise SizeMismatch(f"image shape {x.shape} does not match bank shape {bank.shape}")
    J, p = config.J, config.p
    h, w = x.shape
    n = h * w
    half = w // 2 + 1
    psi, phi_half = bank.psi, bank.phi[:, :half]
    # rfft2 keeps columns 0..w//2; interior columns stand for a conjugate pair
    weights = np.full(half, 2.0)
    weights[0] = 1.0
    if w % 2 == 0:
        weights[-1] = 1.0

    means = []
    variances = []
    m0, v0 = _parseval_pool(sfft.rfft2(x), phi_half, weights, n)
    means.append(np.atleast_1d(m0))
    variances.append(np.atleast_1d(v0))
    if config.m >= 1:
        u1 = np.abs(sfft.ifft2(sfft.fft2(x) * psi))
        u1_hat = sfft.rfft2(u1)
        m1, v1 = _parseval_pool(u1_hat, phi_half, weights, n)
        means.append(m1.ravel())
        variances.append(v1.ravel())
    if config.m >= 2:
        u1_full = sfft.fft2(u1)
        for j1 in range(J - 1):
            # (p, J - j1 - 1, p, h, w), already in canonical (l1, j2, l2) order
            u2 = np.abs(sfft.ifft2(u1_full[j1, :, None, None] * psi[None, j1 + 1:]))
            m2, v2 = _parseval_pool(sfft.rfft2(u2), phi_half, weights, n)
            means.append(m2.ravel())
            variances.append(v2.ravel())
    mean = np.concatenate(means)
    var = np.concatenate(variances)
    out = np.empty(2 * len(mean))
    out[0::2] = mean
    out[1::2] = var
    return out
