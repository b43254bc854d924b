"""Image I/O, resizing, dataset manifests and the synthetic iris-like corpus."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ._validation import check_gray_image
from .exceptions import (
    CorruptImage,
    IncompatibleTarget,
    ManifestError,
    TooFewImages,
    UnsupportedFormat,
)

SPLITS = ("train", "test", "validation")

# Rec. 601 luma weights, used only when color conversion is requested.
_LUMA = np.array([0.299, 0.587, 0.114])

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


# --------------------------------------------------------------------------
# image I/O
# --------------------------------------------------------------------------

def _parse_netpbm(raw: bytes):
    """Parse a P2/P5/P6 header; return (magic, width, height, maxval, offset)."""
    pos = 0
    tokens = []
    for _ in range(4):
        m = _TOKEN.match(raw, pos)
        if m is None:
            raise CorruptImage("truncated netpbm header")
        tokens.append(m.group(1))
        pos = m.end()
    magic = tokens[0]
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise CorruptImage(f"malformed netpbm header: {exc}") from None
    if width <= 0 or height <= 0 or not 0 < maxval < 65536:
        raise CorruptImage("netpbm header has invalid dimensions or maxval")
    if pos >= len(raw) and magic != b"P2":
        raise CorruptImage("netpbm file has no pixel data")
    # exactly one whitespace byte separates the header from binary data
    return magic, width, height, maxval, pos + 1


def _decode_netpbm(raw: bytes, convert_color: bool) -> np.ndarray:
    magic, width, height, maxval, offset = _parse_netpbm(raw)
    if maxval > 255:
        raise UnsupportedFormat(f"only 8-bit images are supported (maxval={maxval})")
    if magic == b"P5":
        data = np.frombuffer(raw, dtype=np.uint8, count=-1, offset=offset)
        if data.size < width * height:
            raise CorruptImage(f"expected {width * height} pixels, found {data.size}")
        pixels = data[: width * height].reshape(height, width)
    elif magic == b"P2":
        try:
            values = np.array(raw[offset - 1:].split(), dtype=np.int64)
        except ValueError:
            raise CorruptImage("non-numeric pixel data in ASCII graymap") from None
        if values.size != width * height:
            raise CorruptImage(f"expected {width * height} pixels, found {values.size}")
        if values.min(initial=0) < 0 or values.max(initial=0) > maxval:
            raise CorruptImage("pixel value outside [0, maxval]")
        pixels = values.reshape(height, width)
    elif magic == b"P6":
        if not convert_color:
            raise UnsupportedFormat("color (P6) input; enable color conversion to accept it")
        data = np.frombuffer(raw, dtype=np.uint8, count=-1, offset=offset)
        if data.size < 3 * width * height:
            raise CorruptImage(f"expected {3 * width * height} samples, found {data.size}")
        rgb = data[: 3 * width * height].reshape(height, width, 3).astype(np.float64)
        return np.clip(rgb @ _LUMA / maxval, 0.0, 1.0)
    else:
        raise UnsupportedFormat(f"unsupported netpbm magic {magic!r}")
    return pixels.astype(np.float64) / maxval


def _decode_png(path: Path, convert_color: bool) -> np.ndarray:
    try:
        from PIL import Image
    except ImportError:  # pragma: no cover - Pillow is optional
        raise UnsupportedFormat("PNG support requires Pillow") from None
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("L", "LA"):
                arr = np.asarray(im.convert("L"), dtype=np.float64)
            elif mode in ("RGB", "RGBA", "P"):
                if not convert_color:
                    raise UnsupportedFormat(f"color PNG ({mode}); enable color conversion to accept it")
                arr = np.asarray(im.convert("RGB"), dtype=np.float64) @ _LUMA
            else:
                raise UnsupportedFormat(f"unsupported PNG mode {mode}")
    except OSError as exc:
        raise CorruptImage(f"{path}: {exc}") from None
    return np.clip(arr / 255.0, 0.0, 1.0)


def load_image(path, *, convert_color: bool = False) -> np.ndarray:
    """Load an 8-bit grayscale image as a (height, width) float array in [0, 1].

    Binary (P5) and ASCII (P2) graymaps are always supported; PNG is read
    through Pillow. Color input is rejected unless ``convert_color`` is set,
    in which case it is reduced to luma.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"image not found: {path}")
    if path.suffix.lower() == ".png":
        return _decode_png(path, convert_color)
    raw = path.read_bytes()
    if len(raw) < 2 or raw[:1] != b"P":
        raise UnsupportedFormat(f"{path}: not a netpbm image")
    try:
        return _decode_netpbm(raw, convert_color)
    except (CorruptImage, UnsupportedFormat) as exc:
        raise type(exc)(f"{path}: {exc}") from None


def to_uint8(img) -> np.ndarray:
    arr = check_gray_image(img)
    return np.rint(arr * 255.0).astype(np.uint8)


def write_pgm(path, img) -> None:
    """Write ``img`` as a binary 8-bit PGM (values rounded to the nearest level)."""
    pixels = to_uint8(img)
    h, w = pixels.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + pixels.tobytes())


# --------------------------------------------------------------------------
# preprocessing
# --------------------------------------------------------------------------

def check_target(target, grid=(3, 4), J: int = 5) -> tuple[int, int]:
    """Check that a (width, height) target suits the texture grid and 2**J.

    ``grid`` is (rows, cols) of texture blocks. The width must be a multiple
    of ``2**J`` and both sides multiples of the grid.
    """
    width, height = (int(v) for v in target)
    rows, cols = grid
    if width <= 0 or height <= 0:
        raise IncompatibleTarget(f"target size must be positive, got {width}x{height}")
    step = 2 ** J
    if width % step:
        raise IncompatibleTarget(f"target width {width} not divisible by 2**J = {step}")
    if width % cols or height % rows:
        raise IncompatibleTarget(
            f"target {width}x{height} not divisible by the {cols}x{rows} block grid"
        )
    return width, height


def _resize_axis(n_out: int, n_in: int):
    # half-pixel-centre sampling; a 2x reduction averages pixel pairs exactly
    x = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    x = np.clip(x, 0.0, n_in - 1)
    lo = np.floor(x).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, x - lo


def resize_bilinear(img, size) -> np.ndarray:
    """Bilinear resize of a 2-D array to ``size`` = (width, height)."""
    arr = np.asarray(img, dtype=np.float64)
    width, height = size
    if arr.shape == (height, width):
        return arr.copy()
    r0, r1, rw = _resize_axis(height, arr.shape[0])
    c0, c1, cw = _resize_axis(width, arr.shape[1])
    top = arr[r0][:, c0] * (1 - cw) + arr[r0][:, c1] * cw
    bot = arr[r1][:, c0] * (1 - cw) + arr[r1][:, c1] * cw
    out = top * (1 - rw)[:, None] + bot * rw[:, None]
    return np.clip(out, 0.0, 1.0)


def preprocess(img, target=(64, 48), *, grid=(3, 4), J: int = 5) -> np.ndarray:
    """Resize ``img`` to ``target`` = (width, height) after checking divisibility."""
    target = check_target(target, grid, J)
    arr = check_gray_image(img)
    return resize_bilinear(arr, target)


# --------------------------------------------------------------------------
# manifests
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    path: str
    subject: str
    split: str = "train"

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ManifestError(f"unknown split tag {self.split!r} for {self.path}")
        if not self.subject or any(c in self.subject for c in "\t\n"):
            raise ManifestError(f"invalid subject id {self.subject!r}")


@dataclass
class DatasetManifest:
    """List of (path, subject, split) records; paths are relative to ``root``."""

    entries: list[ManifestEntry] = field(default_factory=list)
    root: Path = Path(".")

    def __post_init__(self):
        self.root = Path(self.root)
        self.validate()

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def validate(self) -> None:
        seen = set()
        for e in self.entries:
            if e.path in seen:
                raise ManifestError(f"duplicate path {e.path!r}")
            seen.add(e.path)
        train = {e.subject for e in self.entries if e.split == "train"}
        orphans = sorted({e.subject for e in self.entries if e.split == "test"} - train)
        if orphans:
            raise ManifestError(f"subjects in test but not in train: {orphans[:5]}")

    @property
    def subjects(self) -> list[str]:
        return sorted({e.subject for e in self.entries})

    def select(self, split: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == split]

    def resolve(self, entry: ManifestEntry) -> Path:
        return self.root / entry.path


def read_manifest(path) -> DatasetManifest:
    """Read a tab-separated ``path<TAB>subject<TAB>split`` manifest file."""
    path = Path(path)
    entries = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ManifestError(f"{path}:{lineno}: expected 3 tab-separated fields")
        try:
            entries.append(ManifestEntry(*(p.strip() for p in parts)))
        except ManifestError as exc:
            raise ManifestError(f"{path}:{lineno}: {exc}") from None
    try:
        return DatasetManifest(entries, root=path.parent)
    except ManifestError as exc:
        raise ManifestError(f"{path}: {exc}") from None


def write_manifest(manifest: DatasetManifest, path) -> None:
    lines = ["# path\tsubject\tsplit"]
    lines += [f"{e.path}\t{e.subject}\t{e.split}" for e in manifest.entries]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def split_dataset(manifest: DatasetManifest, train_fraction: float = 0.5,
                  seed: int = 0) -> DatasetManifest:
    """Tag each subject's images train/test at ``train_fraction``.

    The train count per subject is ``floor(n * fraction + 0.5)``, clamped to at
    least one so no subject appears only in test. Entries tagged
    ``validation`` are left alone.
    """
    if not 0.0 < train_fraction <= 1.0:
        raise ValueError("train_fraction must be in (0, 1]")
    by_subject: dict[str, list[int]] = {}
    for i, e in enumerate(manifest.entries):
        if e.split != "validation":
            by_subject.setdefault(e.subject, []).append(i)
    rng = np.random.default_rng(seed)
    tags = {}
    for subject in sorted(by_subject):
        idx = by_subject[subject]
        if len(idx) < 2:
            raise TooFewImages(f"subject {subject!r} has {len(idx)} image(s); need >= 2")
        n_train = max(1, math.floor(len(idx) * train_fraction + 0.5))
        order = rng.permutation(len(idx))
        for rank, k in enumerate(order):
            tags[idx[k]] = "train" if rank < n_train else "test"
    entries = [replace(e, split=tags.get(i, e.split)) for i, e in enumerate(manifest.entries)]
    return DatasetManifest(entries, root=manifest.root)


# --------------------------------------------------------------------------
# synthetic corpus
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the synthetic corpus.

    Each class owns a spectral signature: a few oriented band-pass lobes with
    random orientation and radial frequency. A class template is drawn once
    from that signature; each image is the template under a random sub-pixel
    circular shift plus ``noise`` times a fresh draw from the same signature.
    """

    n_classes: int = 10
    per_class: int = 10
    size: tuple[int, int] = (64, 48)
    noise: float = 0.35
    n_lobes: int = 3
    freq_range: tuple[float, float] = (0.06, 0.32)
    bandwidth: float = 0.035
    angular_width: float = 0.35
    max_shift: float = 1.5
    contrast: float = 0.16
    train_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError("n_classes must be >= 2")
        if self.per_class < 2:
            raise ValueError("per_class must be >= 2")
        if min(self.size) < 2:
            raise ValueError("size must be at least 2x2")


def _class_signature(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    """Amplitude spectrum (height, width) of one class."""
    width, height = spec.size
    fy = np.fft.fftfreq(height)[:, None]
    fx = np.fft.fftfreq(width)[None, :]
    radius = np.hypot(fx, fy)
    angle = np.arctan2(fy, fx)
    amp = np.zeros((height, width))
    for _ in range(spec.n_lobes):
        theta = rng.uniform(0.0, np.pi)
        f0 = rng.uniform(*spec.freq_range)
        weight = rng.uniform(0.5, 1.0)
        # orientation distance modulo pi: the spectrum of a real image is symmetric
        d = np.angle(np.exp(2j * (angle - theta))) / 2
        amp += weight * np.exp(-0.5 * ((radius - f0) / spec.bandwidth) ** 2
                               - 0.5 * (d / spec.angular_width) ** 2)
    amp[0, 0] = 0.0
    return amp


def _filtered_noise(amp: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    white = rng.standard_normal(amp.shape)
    field_ = np.fft.ifft2(np.fft.fft2(white) * amp).real
    return field_ / field_.std()


def _subpixel_shift(x: np.ndarray, dy: float, dx: float) -> np.ndarray:
    fy = np.fft.fftfreq(x.shape[0])[:, None]
    fx = np.fft.fftfreq(x.shape[1])[None, :]
    phase = np.exp(-2j * np.pi * (fy * dy + fx * dx))
    return np.fft.ifft2(np.fft.fft2(x) * phase).real


def synthesize_images(spec: SyntheticSpec):
    """Yield (class index, image index, image array) for the whole corpus."""
    root = np.random.SeedSequence(spec.seed)
    for c, class_seq in enumerate(root.spawn(spec.n_classes)):
        rng = np.random.default_rng(class_seq)
        amp = _class_signature(spec, rng)
        template = _filtered_noise(amp, rng)
        for k in range(spec.per_class):
            dy, dx = rng.uniform(-spec.max_shift, spec.max_shift, size=2)
            x = _subpixel_shift(template, dy, dx) + spec.noise * _filtered_noise(amp, rng)
            x /= np.sqrt(1.0 + spec.noise ** 2)
            img = np.clip(0.5 + spec.contrast * x, 0.0, 1.0)
            yield c, k, img


def generate_synthetic(spec: SyntheticSpec, out_dir) -> DatasetManifest:
    """Write the synthetic corpus as PGM files plus ``manifest.tsv``.

    Output is bit-identical for a fixed ``spec.seed``. Images are split
    per class at ``spec.train_fraction`` using the same seed.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for c, k, img in synthesize_images(spec):
        name = f"s{c:03d}_{k:03d}.pgm"
        write_pgm(out_dir / name, img)
        entries.append(ManifestEntry(name, f"s{c:03d}", "train"))
    manifest = split_dataset(DatasetManifest(entries, root=out_dir),
                             spec.train_fraction, spec.seed)
    write_manifest(manifest, out_dir / "manifest.tsv")
    return manifest
