"""Command-line driver: synth, extract, train, evaluate, identify, bench.

Exit status is 0 on success, 1 for bad input (missing files, malformed
data, inconsistent artifacts) and 2 when an internal invariant fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import PipelineConfig, load_config
from .corpus import SyntheticSpec, generate_synthetic, load_image, read_manifest
from .estimators import IrisFeatureExtractor
from .exceptions import FingerprintMismatch, InvariantViolation, ScatIrisError, TooFewSamples
from .features import (
    FeatureVector,
    ReducedVector,
    choose_k,
    fit_pca,
    project,
    project_many,
    retained_variance,
)
from .io import load_feature, load_gallery, load_pca, save_feature, save_gallery, save_pca
from .matcher import Gallery, evaluate, identify

log = logging.getLogger("scatiris")

INDEX_NAME = "index.tsv"
DEFAULT_K_GRID = (1, 5, 10, 20, 40, 80)
ADVISORY_LATENCY_MS = 100.0


class InputError(ScatIrisError):
    pass


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------

def _pair(text: str) -> tuple[int, int]:
    parts = text.lower().replace("x", ",").split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected a pair like 64x48, got {text!r}")
    return int(parts[0]), int(parts[1])


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def resolve_config(args) -> PipelineConfig:
    config = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    overrides = {
        "size": getattr(args, "size", None),
        "J": getattr(args, "J", None),
        "p": getattr(args, "p", None),
        "m": getattr(args, "m", None),
        "grid": getattr(args, "grid", None),
        "levels": getattr(args, "levels", None),
        "offset": getattr(args, "offset", None),
        "seed": getattr(args, "seed", None),
    }
    if getattr(args, "no_texture", False):
        overrides["texture"] = False
    if getattr(args, "convert_color", False):
        overrides["convert_color"] = True
    return config.with_overrides(**overrides)


def feature_name(rel_path: str) -> str:
    return rel_path.replace("/", "__").replace(os.sep, "__") + ".scir"


def read_index(feature_dir: Path) -> list[tuple[str, str, str, str]]:
    """Rows of (feature file, image path, subject, split)."""
    index = feature_dir / INDEX_NAME
    if not index.is_file():
        raise InputError(f"no {INDEX_NAME} in {feature_dir}; run 'extract' first")
    rows = []
    for line in index.read_text(encoding="utf-8").splitlines():
        if line.startswith("#") or not line.strip():
            continue
        rows.append(tuple(line.split("\t")))
    return rows


def _extractor(config: PipelineConfig, threads: int = 1) -> IrisFeatureExtractor:
    return IrisFeatureExtractor.from_config(config, n_jobs=threads).fit()


def _load_for(config: PipelineConfig, path) -> np.ndarray:
    return load_image(path, convert_color=config.convert_color)


def _extract_paths(extractor, config, paths, threads: int) -> list[FeatureVector]:
    def one(path):
        try:
            return extractor.extract_one(_load_for(config, path))
        except (ScatIrisError, OSError) as exc:
            raise InputError(f"{path}: {exc}") from exc

    if threads > 1 and len(paths) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, paths))
    return [one(p) for p in paths]


def _check_fv(fv: FeatureVector, expected: tuple[int, int], where: str) -> None:
    if (fv.n_scatter, fv.n_texture) != expected:
        raise InvariantViolation(f"{where}: layout {(fv.n_scatter, fv.n_texture)} != {expected}")
    if not np.all(np.isfinite(fv.values)):
        raise InvariantViolation(f"{where}: non-finite feature values")


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_synth(args) -> int:
    width, height = args.size
    spec = SyntheticSpec(n_classes=args.classes, per_class=args.per_class, size=(width, height),
                         noise=args.noise, train_fraction=args.train_fraction, seed=args.seed)
    manifest = generate_synthetic(spec, args.out)
    print(f"wrote {len(manifest)} images of {len(manifest.subjects)} subjects to "
          f"{args.out} (manifest: {Path(args.out) / 'manifest.tsv'})")
    return 0


def cmd_extract(args) -> int:
    config = resolve_config(args)
    manifest = read_manifest(args.manifest)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    extractor = _extractor(config)
    entries = list(manifest)
    paths = [manifest.resolve(e) for e in entries]
    missing = [p for p in paths if not p.is_file()]
    if missing:
        raise InputError(f"image not found: {missing[0]}"
                         + (f" (and {len(missing) - 1} more)" if len(missing) > 1 else ""))
    vectors = _extract_paths(extractor, config, paths, args.threads)
    lines = ["# feature\timage\tsubject\tsplit"]
    for entry, fv in zip(entries, vectors):
        _check_fv(fv, extractor.layout_, entry.path)
        name = feature_name(entry.path)
        save_feature(out / name, fv, image=entry.path, subject=entry.subject,
                     split=entry.split, config=config.to_dict())
        lines.append(f"{name}\t{entry.path}\t{entry.subject}\t{entry.split}")
    (out / INDEX_NAME).write_text("\n".join(lines) + "\n", encoding="utf-8")
    ns, nt = extractor.layout_
    print(f"extracted {len(vectors)} feature vectors of length {ns + nt} "
          f"({ns} scattering + {nt} texture) into {out}")
    return 0


def _load_split(feature_dir: Path, split: str):
    subjects, vectors, configs = [], [], set()
    for name, _, subject, row_split in read_index(feature_dir):
        if row_split != split:
            continue
        fv, meta = load_feature(feature_dir / name)
        subjects.append(subject)
        vectors.append(fv.values)
        configs.add(json.dumps(meta.get("config"), sort_keys=True))
    if len(configs) > 1:
        raise InputError(f"feature files in {feature_dir} were extracted with differing configs")
    config = json.loads(configs.pop()) if configs else None
    return subjects, vectors, config


def cmd_train(args) -> int:
    feature_dir = Path(args.features)
    subjects, vectors, config_dict = _load_split(feature_dir, args.split)
    if len(vectors) < 2:
        raise TooFewSamples(f"need at least 2 '{args.split}' feature vectors, found {len(vectors)}")
    config = PipelineConfig.from_dict(config_dict)
    updates = {"standardize": args.standardize or config.standardize}
    if args.k is not None:
        updates["n_components"] = args.k
    elif args.epsilon is not None:
        updates.update(n_components=None, epsilon=args.epsilon)
    config = PipelineConfig.from_dict({**config.to_dict(), **updates})

    model = fit_pca(np.array(vectors), standardize=config.standardize)
    K = config.n_components if config.n_components is not None else choose_k(model, config.epsilon)
    if K > model.n_features:
        raise InputError(f"K={K} exceeds the feature dimension {model.n_features}")
    rv = retained_variance(model, K)
    if K > model.rank:
        log.warning("K=%d exceeds the rank %d of the training scatter matrix", K, model.rank)

    gallery = Gallery().enroll_many(subjects, project_many(model, np.array(vectors), K),
                                    model.fingerprint)
    meta = {"config": config.to_dict(), "K": K, "retained_variance": rv, "split": args.split}
    save_pca(args.out_model, model, **meta)
    save_gallery(args.out_gallery, gallery, **meta)
    if len(gallery.subjects) == 1:
        msg = "training split holds a single subject; identification will be trivial"
        warnings.warn(msg)
        print(f"warning: {msg}", file=sys.stderr)
    print(f"trained on {len(vectors)} vectors of dimension {model.n_features}: "
          f"K={K}, retained variance={rv:.6f}, {len(gallery.subjects)} subjects enrolled")
    return 0


def _load_artifacts(model_path, gallery_path):
    model, model_meta = load_pca(model_path)
    gallery, _ = load_gallery(gallery_path)
    if gallery.fingerprint != model.fingerprint:
        raise FingerprintMismatch(f"gallery {gallery_path} was not built from model {model_path}")
    config = PipelineConfig.from_dict(model_meta["config"])
    return model, gallery, config, model_meta


def cmd_evaluate(args) -> int:
    model, gallery, config, model_meta = _load_artifacts(args.model, args.gallery)
    manifest = read_manifest(args.manifest)
    probes_entries = manifest.select(args.split)
    if not probes_entries:
        raise InputError(f"manifest has no '{args.split}' entries")
    if args.features:
        feature_dir = Path(args.features)
        by_path = {img: name for name, img, _, _ in read_index(feature_dir)}
        vectors = []
        for e in probes_entries:
            if e.path not in by_path:
                raise InputError(f"no extracted features for {e.path} in {feature_dir}")
            vectors.append(load_feature(feature_dir / by_path[e.path])[0])
    else:
        extractor = _extractor(config)
        vectors = _extract_paths(extractor, config, [manifest.resolve(e) for e in probes_entries],
                                 args.threads)
    K = gallery.dim
    probes = [(e.subject, project(model, fv, K)) for e, fv in zip(probes_entries, vectors)]
    k_grid = [k for k in args.k_grid if k <= K]
    dropped = sorted(set(args.k_grid) - set(k_grid))
    report = evaluate(gallery, probes, k_grid)
    if dropped:
        report.notes.append(f"K grid values {dropped} exceed the gallery dimension {K}; skipped")
    out = Path(args.out)
    out.write_text(report.to_json(config=config.to_dict(), model_fingerprint=model.fingerprint,
                                  split=args.split, retained_variance=model_meta.get(
                                      "retained_variance")), encoding="utf-8")
    csv_path = Path(args.csv) if args.csv else out.with_suffix(".csv")
    csv_path.write_text(report.to_csv(), encoding="utf-8")
    for note in report.notes:
        print(f"note: {note}", file=sys.stderr)
    print(f"rank-1 accuracy {report.accuracy:.4f} on {report.n_probes} probes at K={K}; "
          f"report {out}, curve {csv_path}")
    return 0


def cmd_identify(args) -> int:
    model, gallery, config, _ = _load_artifacts(args.model, args.gallery)
    fv = _extractor(config).extract_one(_load_for(config, args.image))
    result = identify(gallery, project(model, fv, gallery.dim))
    print(f"{result.subject} {result.distance:.6g}")
    return 0


def _machine_info() -> dict:
    return {
        "platform": platform.platform(),
        "processor": platform.processor() or platform.machine(),
        "cpu_count": os.cpu_count(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scatiris": __version__,
    }


def cmd_bench(args) -> int:
    image_dir = Path(args.images)
    paths = sorted(p for p in image_dir.iterdir()
                   if p.suffix.lower() in (".pgm", ".png")) if image_dir.is_dir() else []
    if not paths:
        raise InputError(f"no .pgm/.png images in {image_dir}")
    if args.model and args.gallery:
        model, gallery, config, _ = _load_artifacts(args.model, args.gallery)
    else:
        config = resolve_config(args)
        model = gallery = None
    extractor = _extractor(config)
    images = [_load_for(config, p) for p in paths]

    if gallery is None:
        feats = np.array([extractor.extract_one(img).values for img in images])
        if len(images) >= 2:
            model = fit_pca(feats, standardize=config.standardize)
            K = min(config.n_components or choose_k(model, config.epsilon), model.n_features)
            gallery = Gallery().enroll_many([p.stem for p in paths],
                                            project_many(model, feats, K), model.fingerprint)
        else:
            gallery = Gallery().enroll_many([paths[0].stem], feats, "raw")

    timings = []
    outputs = []
    for _ in range(args.reps):
        for img in images:
            t0 = time.perf_counter()
            fv = extractor.extract_one(img)
            probe = (project(model, fv, gallery.dim) if model is not None
                     else ReducedVector(fv.values, "raw"))
            result = identify(gallery, probe)
            timings.append(1e3 * (time.perf_counter() - t0))
            outputs.append((result.subject, fv.values))
    # values must not depend on the repetition
    n = len(images)
    for i in range(n, len(outputs)):
        if not np.array_equal(outputs[i][1], outputs[i % n][1]):
            raise InvariantViolation("feature extraction is not deterministic across repetitions")

    t = np.array(timings)
    report = {
        "n_images": n,
        "reps": args.reps,
        "n_timed": len(t),
        "median_ms": float(np.median(t)),
        "p95_ms": float(np.percentile(t, 95)),
        "mean_ms": float(t.mean()),
        "advisory_bound_ms": ADVISORY_LATENCY_MS,
        "within_advisory_bound": bool(np.median(t) <= ADVISORY_LATENCY_MS),
        "config": config.to_dict(),
        "machine": _machine_info(),
    }
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(f"{len(t)} timed extract+match runs: median {report['median_ms']:.2f} ms, "
          f"p95 {report['p95_ms']:.2f} ms")
    if not report["within_advisory_bound"]:
        msg = (f"median latency {report['median_ms']:.1f} ms exceeds the advisory "
               f"{ADVISORY_LATENCY_MS:.0f} ms bound")
        warnings.warn(msg)
        print(f"warning: {msg}", file=sys.stderr)
    if not args.out:
        sys.stdout.write(text)
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI file with a [pipeline] section; flags override it")
    p.add_argument("--size", type=_pair, help="working size WIDTHxHEIGHT (default 64x48)")
    p.add_argument("--J", type=int, help="number of scattering scales")
    p.add_argument("--p", type=int, help="number of orientations")
    p.add_argument("--m", type=int, help="maximum scattering order (0-2)")
    p.add_argument("--no-texture", action="store_true", help="scattering features only")
    p.add_argument("--grid", type=_pair, help="texture block grid ROWSxCOLS (default 3x4)")
    p.add_argument("--levels", type=int, help="gray levels for co-occurrence matrices")
    p.add_argument("--offset", type=_pair, help="co-occurrence offset DX,DY (default 1,0)")
    p.add_argument("--convert-color", action="store_true", help="accept color images as luma")


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors; argparse's default status 2 is reserved
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="scatiris", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic corpus and manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--per-class", type=int, default=10)
    p.add_argument("--size", type=_pair, default=(64, 48))
    p.add_argument("--noise", type=float, default=SyntheticSpec.noise)
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="extract one feature file per manifest image")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threads", type=int, default=1)
    _add_config_flags(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="fit PCA on the train split and enroll a gallery")
    p.add_argument("--features", required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--epsilon", type=float, help="retained-variance target")
    group.add_argument("--k", type=int, help="explicit number of components")
    p.add_argument("--standardize", action="store_true", help="z-score features before PCA")
    p.add_argument("--split", default="train")
    p.add_argument("--out-model", required=True)
    p.add_argument("--out-gallery", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="rank-1 accuracy and accuracy-vs-K curve")
    p.add_argument("--model", required=True)
    p.add_argument("--gallery", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--k-grid", type=_int_list, default=list(DEFAULT_K_GRID))
    p.add_argument("--out", required=True, help="JSON report path")
    p.add_argument("--csv", help="curve CSV path (default: JSON path with .csv)")
    p.add_argument("--features", help="reuse extracted features instead of re-extracting")
    p.add_argument("--split", default="test")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("identify", help="identify a single image")
    p.add_argument("--model", required=True)
    p.add_argument("--gallery", required=True)
    p.add_argument("--image", required=True)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("bench", help="time extraction plus matching per image")
    p.add_argument("--images", required=True)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--model")
    p.add_argument("--gallery")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    _add_config_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2
    except (ScatIrisError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
