"""Template gallery and minimum-Euclidean-distance identification."""

from __future__ import annotations

import csv
import io
import json
import time
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    BadK,
    DimensionMismatch,
    EmptyGallery,
    EmptyProbeSet,
    FingerprintMismatch,
)
from .features import ReducedVector


@dataclass
class Gallery:
    """Enrolled templates; row ``i`` of ``templates`` belongs to ``ids[i]``."""

    fingerprint: str | None = None
    ids: list[str] = field(default_factory=list)
    templates: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))

    def __len__(self):
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.templates.shape[1]

    @property
    def subjects(self) -> list[str]:
        return sorted(set(self.ids))

    def enroll(self, subject: str, template: ReducedVector) -> "Gallery":
        values = np.asarray(template.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise DimensionMismatch("a template must be a non-empty 1-D vector")
        if len(self) == 0:
            self.fingerprint = template.fingerprint
            self.templates = values[np.newaxis].copy()
        else:
            if template.fingerprint != self.fingerprint:
                raise FingerprintMismatch(
                    f"template fingerprint {template.fingerprint} != gallery {self.fingerprint}")
            if values.size != self.dim:
                raise DimensionMismatch(f"template length {values.size} != gallery {self.dim}")
            self.templates = np.vstack([self.templates, values])
        self.ids.append(str(subject))
        return self

    def enroll_many(self, subjects, templates: np.ndarray, fingerprint: str) -> "Gallery":
        for s, t in zip(subjects, np.asarray(templates, dtype=np.float64)):
            self.enroll(s, ReducedVector(t, fingerprint))
        return self


def enroll(gallery: Gallery, subject: str, template: ReducedVector) -> Gallery:
    return gallery.enroll(subject, template)


@dataclass(frozen=True)
class MatchResult:
    subject: str
    distance: float
    index: int
    runner_up_distance: float  # nearest template of any other subject; inf if none
    ranking: list[tuple[str, float]] | None = None


def _check_probe(gallery: Gallery, probe: ReducedVector, dim: int | None = None) -> np.ndarray:
    if len(gallery) == 0:
        raise EmptyGallery("cannot identify against an empty gallery")
    if probe.fingerprint != gallery.fingerprint:
        raise FingerprintMismatch(
            f"probe fingerprint {probe.fingerprint} != gallery {gallery.fingerprint}")
    values = np.asarray(probe.values, dtype=np.float64)
    dim = gallery.dim if dim is None else dim
    if values.shape[-1] < dim:
        raise DimensionMismatch(f"probe length {values.shape[-1]} < {dim}")
    return values[..., :dim]


def identify(gallery: Gallery, probe: ReducedVector, *, ranked: bool = False) -> MatchResult:
    """Nearest enrolled template; ties go to the earliest enrollment."""
    values = _check_probe(gallery, probe)
    dist = np.sqrt(np.sum((gallery.templates - values) ** 2, axis=1))
    best = int(np.argmin(dist))
    subject = gallery.ids[best]
    others = [d for d, s in zip(dist, gallery.ids) if s != subject]
    ranking = None
    if ranked:
        order = np.argsort(dist, kind="stable")
        ranking = [(gallery.ids[i], float(dist[i])) for i in order]
    return MatchResult(subject, float(dist[best]), best,
                       float(min(others)) if others else float("inf"), ranking)


def _nearest_ids(templates: np.ndarray, ids: np.ndarray, probes: np.ndarray) -> np.ndarray:
    # squared distances via direct differences keep exact-match ties exact
    out = np.empty(len(probes), dtype=object)
    for start in range(0, len(probes), 64):
        chunk = probes[start:start + 64]
        d2 = ((chunk[:, None, :] - templates[None, :, :]) ** 2).sum(axis=2)
        out[start:start + 64] = ids[np.argmin(d2, axis=1)]
    return out


@dataclass
class EvalReport:
    accuracy: float
    n_probes: int
    K: int
    curve: list[tuple[int, float]]
    confusion: dict[tuple[str, str], int]
    mean_latency_ms: float | None = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "n_probes": self.n_probes,
            "K": self.K,
            "curve": [{"K": k, "accuracy": a} for k, a in self.curve],
            "confusion": [{"true": t, "predicted": p, "count": c}
                          for (t, p), c in sorted(self.confusion.items())],
            "mean_latency_ms": self.mean_latency_ms,
            "notes": list(self.notes),
        }

    def to_json(self, **extra) -> str:
        payload = self.to_dict()
        payload.update(extra)
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["K", "accuracy"])
        for k, a in self.curve:
            writer.writerow([k, repr(a)])
        return buf.getvalue()


def evaluate(gallery: Gallery, probes, k_grid=None, *, measure_latency: bool = False) -> EvalReport:
    """Rank-1 accuracy of ``probes`` (pairs of subject id and ReducedVector).

    The accuracy curve truncates gallery and probes to their leading K'
    components for each K' in ``k_grid``; the gallery dimension is always
    included as the last point.
    """
    probes = list(probes)
    if not probes:
        raise EmptyProbeSet("no probes to evaluate")
    truth = [str(s) for s, _ in probes]
    P = np.array([_check_probe(gallery, r) for _, r in probes])
    K = gallery.dim
    grid = sorted(set(int(k) for k in (k_grid or [])) | {K})
    if grid[0] < 1 or grid[-1] > K:
        raise BadK(f"K grid values must lie in [1, {K}], got {grid}")

    ids = np.array(gallery.ids, dtype=object)
    truth_arr = np.array(truth, dtype=object)
    curve = []
    for k in grid:
        pred = _nearest_ids(gallery.templates[:, :k], ids, P[:, :k])
        curve.append((k, float(np.mean(pred == truth_arr))))
    pred = _nearest_ids(gallery.templates, ids, P)
    confusion = Counter(zip(truth, (str(p) for p in pred)))

    latency = None
    if measure_latency:
        t0 = time.perf_counter()
        for _, r in probes:
            identify(gallery, r)
        latency = 1e3 * (time.perf_counter() - t0) / len(probes)

    notes = []
    if len(set(gallery.ids)) == 1:
        msg = "gallery holds a single subject; rank-1 accuracy is trivially 1 for its probes"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    return EvalReport(accuracy=curve[-1][1], n_probes=len(probes), K=K, curve=curve,
                      confusion=dict(confusion), mean_latency_ms=latency, notes=notes)
