"""Versioned binary containers for feature vectors, PCA models, galleries and filter banks.

Layout of every file::

    b"SCIR"                magic
    u16                    format version
    u8                     record kind
    u32                    length of the JSON header in bytes
    JSON header (UTF-8)    metadata plus an ``arrays`` list of {name, shape}
    float64 payload        the listed arrays, little-endian, C order, back to back

JSON is written with sorted keys and no timestamps so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .exceptions import FormatError
from .features import FeatureVector, PcaModel
from .matcher import Gallery
from .scattering import FilterBank, build_filter_bank

MAGIC = b"SCIR"
VERSION = 1
_PREFIX = struct.Struct("<4sHBI")

KIND_FEATURE = 1
KIND_PCA = 2
KIND_GALLERY = 3
KIND_FILTER_BANK = 4
_KIND_NAMES = {KIND_FEATURE: "feature vector", KIND_PCA: "PCA model",
               KIND_GALLERY: "gallery", KIND_FILTER_BANK: "filter bank"}


def write_record(path, kind: int, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    meta = dict(meta)
    meta["arrays"] = [{"name": k, "shape": list(np.shape(v))} for k, v in arrays.items()]
    header = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    chunks = [_PREFIX.pack(MAGIC, VERSION, kind, len(header)), header]
    chunks += [np.ascontiguousarray(v, dtype="<f8").tobytes() for v in arrays.values()]
    Path(path).write_bytes(b"".join(chunks))


def read_record(path, kind: int) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    if len(raw) < _PREFIX.size:
        raise FormatError(f"{path}: file too short")
    magic, version, got_kind, n = _PREFIX.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    if got_kind != kind:
        raise FormatError(f"{path}: expected a {_KIND_NAMES.get(kind)}, "
                          f"found a {_KIND_NAMES.get(got_kind, got_kind)}")
    try:
        meta = json.loads(raw[_PREFIX.size:_PREFIX.size + n].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: corrupt header ({exc})") from None
    offset = _PREFIX.size + n
    arrays = {}
    for spec in meta.pop("arrays", []):
        shape = tuple(spec["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        end = offset + 8 * count
        if end > len(raw):
            raise FormatError(f"{path}: payload truncated")
        arrays[spec["name"]] = np.frombuffer(raw, "<f8", count, offset).reshape(shape).copy()
        offset = end
    if offset != len(raw):
        raise FormatError(f"{path}: {len(raw) - offset} trailing bytes")
    return meta, arrays


# feature vectors -----------------------------------------------------------

def save_feature(path, fv: FeatureVector, **meta) -> None:
    meta.update(n_scatter=fv.n_scatter, n_texture=fv.n_texture)
    write_record(path, KIND_FEATURE, meta, {"values": fv.values})


def load_feature(path) -> tuple[FeatureVector, dict]:
    meta, arrays = read_record(path, KIND_FEATURE)
    try:
        fv = FeatureVector(arrays["values"], int(meta["n_scatter"]), int(meta["n_texture"]))
    except KeyError as exc:
        raise FormatError(f"{path}: missing field {exc}") from None
    return fv, meta


# PCA models ------------------------------------------------------------------

def save_pca(path, model: PcaModel, **meta) -> None:
    meta.update(n_samples=model.n_samples, fingerprint=model.fingerprint,
                standardized=model.scale is not None)
    arrays = {"mean": model.mean, "eigenvalues": model.eigenvalues,
              "components": model.components}
    if model.scale is not None:
        arrays["scale"] = model.scale
    write_record(path, KIND_PCA, meta, arrays)


def load_pca(path) -> tuple[PcaModel, dict]:
    meta, arrays = read_record(path, KIND_PCA)
    try:
        model = PcaModel(mean=arrays["mean"], eigenvalues=arrays["eigenvalues"],
                         components=arrays["components"], n_samples=int(meta["n_samples"]),
                         scale=arrays.get("scale"))
    except KeyError as exc:
        raise FormatError(f"{path}: missing field {exc}") from None
    if model.fingerprint != meta.get("fingerprint"):
        raise FormatError(f"{path}: content hash does not match stored fingerprint")
    return model, meta


# galleries ----------------------------------------------------------------

def save_gallery(path, gallery: Gallery, **meta) -> None:
    meta.update(fingerprint=gallery.fingerprint, ids=list(gallery.ids))
    write_record(path, KIND_GALLERY, meta, {"templates": gallery.templates})


def load_gallery(path) -> tuple[Gallery, dict]:
    meta, arrays = read_record(path, KIND_GALLERY)
    ids = [str(s) for s in meta.get("ids", [])]
    templates = arrays.get("templates")
    if templates is None or templates.ndim != 2 or len(ids) != templates.shape[0]:
        raise FormatError(f"{path}: ids and templates disagree")
    return Gallery(meta.get("fingerprint"), ids, templates), meta


# filter banks ---------------------------------------------------------------

def save_filter_bank(path, bank: FilterBank) -> None:
    meta = {"J": bank.J, "p": bank.p, "size": list(bank.size)}
    write_record(path, KIND_FILTER_BANK, meta, {"psi": bank.psi, "phi": bank.phi})


def load_filter_bank(path) -> FilterBank:
    meta, arrays = read_record(path, KIND_FILTER_BANK)
    psi, phi = arrays["psi"], arrays["phi"]
    psi.flags.writeable = False
    phi.flags.writeable = False
    return FilterBank(psi=psi, phi=phi, size=tuple(meta["size"]))


def cached_filter_bank(config, size, cache_dir) -> FilterBank:
    """Load the bank for (J, p, size) from ``cache_dir``, building it on a miss."""
    width, height = size
    path = Path(cache_dir) / f"bank_J{config.J}_p{config.p}_{width}x{height}.scir"
    if path.exists():
        try:
            return load_filter_bank(path)
        except FormatError:
            pass  # stale or foreign file: rebuild
    bank = build_filter_bank(config, size)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_filter_bank(path, bank)
    return bank
