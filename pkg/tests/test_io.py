from __future__ import annotations

import struct

import numpy as np
import pytest

from scatiris.exceptions import FormatError
from scatiris.features import FeatureVector, fit_pca
from scatiris.io import (
    KIND_FEATURE,
    cached_filter_bank,
    load_feature,
    load_filter_bank,
    load_gallery,
    load_pca,
    read_record,
    save_feature,
    save_filter_bank,
    save_gallery,
    save_pca,
    write_record,
)
from scatiris.matcher import Gallery
from scatiris.scattering import ScatteringConfig, build_filter_bank


def test_feature_round_trip(tmp_path):
    fv = FeatureVector(np.linspace(-1, 1, 16), 2, 14)
    save_feature(tmp_path / "f.scir", fv, subject="s1")
    back, meta = load_feature(tmp_path / "f.scir")
    np.testing.assert_array_equal(back.values, fv.values)
    assert (back.n_scatter, back.n_texture) == (2, 14) and meta["subject"] == "s1"


def test_header_layout(tmp_path):
    save_feature(tmp_path / "f.scir", FeatureVector(np.ones(3), 3, 0))
    raw = (tmp_path / "f.scir").read_bytes()
    magic, version, kind, n = struct.unpack_from("<4sHBI", raw)
    assert (magic, version, kind) == (b"SCIR", 1, KIND_FEATURE)
    assert len(raw) == 11 + n + 3 * 8
    assert np.frombuffer(raw[11 + n:], "<f8").tolist() == [1.0, 1.0, 1.0]


def test_byte_identical_writes(tmp_path):
    fv = FeatureVector(np.arange(5.0), 5, 0)
    save_feature(tmp_path / "a", fv, b=1, a=2)
    save_feature(tmp_path / "b", fv, a=2, b=1)
    assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()


def test_pca_round_trip(tmp_path):
    X = np.random.default_rng(0).standard_normal((6, 4))
    for standardize in (False, True):
        m = fit_pca(X, standardize=standardize)
        save_pca(tmp_path / "p.scir", m, note="x")
        back, meta = load_pca(tmp_path / "p.scir")
        assert back.fingerprint == m.fingerprint and meta["note"] == "x"
        np.testing.assert_array_equal(back.components, m.components)
        assert (back.scale is None) == (not standardize)


def test_pca_tamper_detected(tmp_path):
    m = fit_pca(np.random.default_rng(0).standard_normal((6, 4)))
    save_pca(tmp_path / "p.scir", m)
    raw = bytearray((tmp_path / "p.scir").read_bytes())
    raw[-1] ^= 1
    (tmp_path / "p.scir").write_bytes(bytes(raw))
    with pytest.raises(FormatError):
        load_pca(tmp_path / "p.scir")


def test_gallery_round_trip(tmp_path):
    g = Gallery().enroll_many(["a", "b", "a"], np.eye(3), "fp")
    save_gallery(tmp_path / "g.scir", g)
    back, _ = load_gallery(tmp_path / "g.scir")
    assert back.ids == g.ids and back.fingerprint == "fp"
    np.testing.assert_array_equal(back.templates, g.templates)


@pytest.mark.parametrize("mutate,err", [
    (lambda r: b"XXXX" + r[4:], "magic"),
    (lambda r: r[:4] + struct.pack("<H", 9) + r[6:], "version"),
    (lambda r: r[:-4], "truncated"),
    (lambda r: r + b"\0", "trailing"),
    (lambda r: r[:5], "short"),
])
def test_corrupt_files(tmp_path, mutate, err):
    save_feature(tmp_path / "f", FeatureVector(np.ones(2), 2, 0))
    (tmp_path / "f").write_bytes(mutate((tmp_path / "f").read_bytes()))
    with pytest.raises(FormatError, match=err):
        load_feature(tmp_path / "f")


def test_wrong_kind(tmp_path):
    save_gallery(tmp_path / "g", Gallery().enroll_many(["a"], np.ones((1, 2)), "fp"))
    with pytest.raises(FormatError, match="expected a feature vector"):
        load_feature(tmp_path / "g")


def test_generic_record(tmp_path):
    write_record(tmp_path / "r", 7, {"x": [1, 2]}, {"a": np.zeros((2, 3)), "b": np.ones(1)})
    meta, arrays = read_record(tmp_path / "r", 7)
    assert meta == {"x": [1, 2]} and arrays["a"].shape == (2, 3)


def test_filter_bank_cache(tmp_path):
    cfg = ScatteringConfig(2, 3, 2)
    bank = build_filter_bank(cfg, (8, 6))
    save_filter_bank(tmp_path / "b", bank)
    back = load_filter_bank(tmp_path / "b")
    np.testing.assert_array_equal(back.psi, bank.psi)
    assert back.size == (8, 6) and not back.phi.flags.writeable
    a = cached_filter_bank(cfg, (8, 6), tmp_path / "cache")
    assert (tmp_path / "cache" / "bank_J2_p3_8x6.scir").exists()
    b = cached_filter_bank(cfg, (8, 6), tmp_path / "cache")
    np.testing.assert_array_equal(a.phi, b.phi)
