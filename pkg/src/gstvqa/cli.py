"""Command-line front end: feature extraction, training, prediction, evaluation.

Artifacts are JSON with sorted keys and full double precision, each
stamped with a hash of the feature-affecting configuration plus SHA-256
hashes of the input files, so a 200-trial study can be audited and
artifacts from mismatched configurations refuse to combine.

Subcommands::

    gstvqa features --ref ref.y4m --dist dist.y4m --out pair.json
    gstvqa train    --manifest m.csv --features-dir feats/ --out model.json
    gstvqa predict  --model model.json --features pair.json
    gstvqa evaluate --manifest m.csv --features-dir feats/ --out report.json

Raw (headerless) YUV420 inputs need --width/--height/--fps; Y4M headers
win over flags.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import errors
from .errors import ArgumentError, DataError, GstVqaError
from .evaluation import DatasetManifest, run_trials, split_by_content
from .filterbank import FilterBankConfig
from .fusion import LabeledSet, SvrModel, default_grid, fit, grid_search
from .spatial import spatial_index
from .tgreed import DEFAULT_SCALES, compute_tgreed
from .video_io import VideoMeta, read_video

__all__ = ["main", "Config"]

_EXIT_CODES = [
    (errors.IoError, 3),
    (errors.FormatError, 4),
    (errors.DimensionError, 5),
    (errors.ArgumentError, 6),
    (errors.DegenerateError, 7),
    (errors.ShapeError, 8),
    (errors.DataError, 9),
    (errors.FitError, 10),
]


@dataclass(frozen=True)
class Config:
    """Pipeline settings; the defaults reproduce the published layout
    (scales 4 and 5, 3-level bior2.2 packets, 15 fused features)."""

    scales: tuple[int, ...] = DEFAULT_SCALES
    levels: int = 3
    wavelet: str = "bior2.2"
    boundary: str = "symmetric"
    spatial_model: str = "ssim"

    def feature_config(self) -> dict:
        return {
            "scales": list(self.scales),
            "levels": self.levels,
            "wavelet": self.wavelet,
            "boundary": self.boundary,
            "spatial_model": self.spatial_model,
        }

    def config_hash(self) -> str:
        canon = json.dumps(self.feature_config(), sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def filterbank(self) -> FilterBankConfig:
        return FilterBankConfig(wavelet=self.wavelet, levels=self.levels, boundary=self.boundary)


def _sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_json(path: str | Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _video_meta(path: str, width, height, fps) -> VideoMeta:
    return VideoMeta(
        path=path,
        declared_fps=Fraction(fps) if fps is not None else None,
        width=width,
        height=height,
    )


def _parse_fractions(text: str) -> tuple[float, ...]:
    try:
        parts = tuple(float(p) for p in text.split(","))
    except ValueError as exc:
        raise DataError(f"bad fractions {text!r}") from exc
    if len(parts) not in (2, 3):
        raise DataError(f"fractions need 2 or 3 comma-separated values, got {text!r}")
    return parts


def _config_from_args(args) -> Config:
    model = args.spatial_model
    if model not in ("ssim", "msssim") and not model.startswith("external:"):
        raise ArgumentError(
            f"--spatial-model must be ssim, msssim or external:<column>, got {model!r}"
        )
    scales = tuple(args.scale) if args.scale else DEFAULT_SCALES
    return Config(scales=scales, spatial_model=model)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_features(args) -> int:
    config = _config_from_args(args)
    ref = read_video(_video_meta(args.ref, args.width, args.height, args.fps))
    dist_fps = args.dist_fps if args.dist_fps is not None else args.fps
    dist = read_video(_video_meta(args.dist, args.width, args.height, dist_fps))
    if dist.fps > ref.fps:
        raise ArgumentError(f"distorted fps {dist.fps} exceeds reference fps {ref.fps}")

    temporal = compute_tgreed(ref, dist, config.filterbank(), scales=config.scales)
    if config.spatial_model in ("ssim", "msssim"):
        index = spatial_index(ref, dist, config.spatial_model)
        spatial_payload = {"model": index.model_name, "value": index.value}
    else:
        spatial_payload = None  # supplied later from an external score column

    payload = {
        "format_version": 1,
        "config": config.feature_config(),
        "config_hash": config.config_hash(),
        "ref_path": str(args.ref),
        "dist_path": str(args.dist),
        "ref_hash": _sha256_file(args.ref),
        "dist_hash": _sha256_file(args.dist),
        "spatial": spatial_payload,
        "temporal": temporal.by_scale(),
        "scales": list(config.scales),
    }
    _write_json(args.out, payload)
    return 0


def _load_feature_file(path: Path) -> dict:
    try:
        payload = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise DataError(f"missing feature file {path}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"unparseable feature file {path}: {exc}") from exc
    if payload.get("format_version") != 1:
        raise DataError(f"{path}: unsupported feature format")
    return payload


def _vector_from_payload(payload: dict, row, config: Config, path: Path) -> np.ndarray:
    temporal = []
    for s in payload["scales"]:
        temporal.extend(payload["temporal"][f"scale{s}"])
    if payload["spatial"] is not None:
        spatial = payload["spatial"]["value"]
    else:
        column = config.spatial_model.partition(":")[2]
        if not column:
            raise DataError(
                f"{path} has no built-in spatial value; pass --spatial-model external:<column>"
            )
        value = row.extras.get(column)
        if not isinstance(value, float):
            raise DataError(
                f"manifest row {row.pair_id!r} lacks a numeric {column!r} column "
                f"for the external spatial model"
            )
        spatial = value
    return np.concatenate([[spatial], np.asarray(temporal, dtype=np.float64)])


def _load_features(
    manifest: DatasetManifest, features_dir: str | Path, config: Config
) -> tuple[dict, str]:
    """Load one feature vector per manifest row, enforcing one config hash."""
    features: dict = {}
    hashes = set()
    missing = []
    for row in manifest.rows:
        path = Path(features_dir) / f"{row.pair_id}.json"
        if not path.exists():
            missing.append(row.pair_id)
            continue
        payload = _load_feature_file(path)
        hashes.add(payload["config_hash"])
        features[row.pair_id] = _vector_from_payload(payload, row, config, path)
    if missing:
        raise DataError(f"feature files missing for pairs: {missing}")
    if len(hashes) > 1:
        raise DataError(f"feature files mix config hashes: {sorted(hashes)}")
    return features, (hashes.pop() if hashes else config.config_hash())


def cmd_train(args) -> int:
    config = _config_from_args(args)
    manifest = DatasetManifest.from_csv(args.manifest)
    features, feature_hash = _load_features(manifest, args.features_dir, config)
    fractions = _parse_fractions(args.fractions)
    if len(fractions) != 3:
        raise DataError("training requires 3 fractions (train/val/test)")
    train_m, val_m, _test_m = split_by_content(manifest, fractions, args.seed)

    def labeled(m):
        return LabeledSet.build(
            features=[features[r.pair_id] for r in m.rows],
            mos=[r.mos for r in m.rows],
            content_ids=[r.content_id for r in m.rows],
        )

    train_set, val_set = labeled(train_m), labeled(val_m)
    hp = grid_search(train_set, val_set, default_grid())
    model = fit(train_set.features, train_set.mos, hp)

    train_rmse = float(np.sqrt(np.mean((model.predict_matrix(train_set.features) - train_set.mos) ** 2)))
    val_rmse = float(np.sqrt(np.mean((model.predict_matrix(val_set.features) - val_set.mos) ** 2)))

    payload = model.to_json_dict()
    payload["config_hash"] = feature_hash
    payload["spatial_model"] = config.spatial_model
    _write_json(args.out, payload)

    report = {
        "config_hash": feature_hash,
        "seed": args.seed,
        "n_train_pairs": len(train_m),
        "n_val_pairs": len(val_m),
        "train_rmse": train_rmse,
        "val_rmse": val_rmse,
        "hyperparams": {"kernel": hp.kernel, "C": hp.C, "gamma": hp.gamma, "epsilon": hp.epsilon},
    }
    _write_json(Path(args.out).with_suffix(".report.json"), report)
    return 0


def cmd_predict(args) -> int:
    model_payload = json.loads(Path(args.model).read_text())
    model = SvrModel.from_json_dict(model_payload)
    feature_payload = _load_feature_file(Path(args.features))
    model_hash = model_payload.get("config_hash")
    if model_hash is not None and feature_payload["config_hash"] != model_hash:
        raise DataError(
            f"feature config hash {feature_payload['config_hash']} does not match "
            f"model config hash {model_hash}"
        )
    temporal = []
    for s in feature_payload["scales"]:
        temporal.extend(feature_payload["temporal"][f"scale{s}"])
    if feature_payload["spatial"] is not None:
        spatial = feature_payload["spatial"]["value"]
    elif args.spatial_value is not None:
        spatial = args.spatial_value
    else:
        raise DataError("feature file has no spatial value; pass --spatial-value")
    vector = np.concatenate([[spatial], np.asarray(temporal, dtype=np.float64)])
    score = float(model.predict_matrix(vector[None, :])[0])
    print(score)
    return 0


def cmd_evaluate(args) -> int:
    config = _config_from_args(args)
    manifest = DatasetManifest.from_csv(args.manifest)
    features, feature_hash = _load_features(manifest, args.features_dir, config)
    fractions = _parse_fractions(args.fractions)
    report = run_trials(
        manifest,
        features,
        n_trials=args.trials,
        seed=args.seed,
        fractions=fractions,
        fit_logistic=not args.no_logistic,
        per_rate=True,
    )
    payload = report.to_json_dict()
    payload["config_hash"] = feature_hash
    payload["config"] = config.feature_config()
    if args.out:
        _write_json(args.out, payload)
    else:
        print(json.dumps(payload, sort_keys=True, indent=2))
    return 0


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gstvqa",
        description="Fused spatio-temporal full-reference video quality assessment",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    feat = sub.add_parser("features", help="extract the fused feature vector for one pair")
    feat.add_argument("--ref", required=True, help="reference video (Y4M or raw YUV420)")
    feat.add_argument("--dist", required=True, help="distorted video (Y4M or raw YUV420)")
    feat.add_argument("--out", required=True, help="output feature JSON path")
    feat.add_argument("--width", type=int, help="frame width (raw YUV only)")
    feat.add_argument("--height", type=int, help="frame height (raw YUV only)")
    feat.add_argument("--fps", help="reference frame rate, e.g. 120 or 30000/1001 (raw YUV only)")
    feat.add_argument("--dist-fps", help="distorted frame rate (raw YUV only, defaults to --fps)")
    feat.add_argument("--scale", type=int, action="append", help="scale exponent (repeatable)")
    feat.add_argument("--spatial-model", default="ssim", help="ssim | msssim | external:<column>")
    feat.set_defaults(func=cmd_features)

    train = sub.add_parser("train", help="fit the quality regressor from a manifest")
    train.add_argument("--manifest", required=True)
    train.add_argument("--features-dir", required=True)
    train.add_argument("--out", required=True, help="output model JSON path")
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--fractions", default="0.7,0.15,0.15")
    train.add_argument("--scale", type=int, action="append")
    train.add_argument("--spatial-model", default="ssim")
    train.set_defaults(func=cmd_train)

    pred = sub.add_parser("predict", help="score one feature file with a trained model")
    pred.add_argument("--model", required=True)
    pred.add_argument("--features", required=True)
    pred.add_argument("--spatial-value", type=float, help="external spatial score override")
    pred.set_defaults(func=cmd_predict)

    ev = sub.add_parser("evaluate", help="run the repeated-trials protocol")
    ev.add_argument("--manifest", required=True)
    ev.add_argument("--features-dir", required=True)
    ev.add_argument("--out", help="report JSON path (stdout when omitted)")
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--trials", type=int, default=200)
    ev.add_argument("--fractions", default="0.7,0.15,0.15")
    ev.add_argument("--no-logistic", action="store_true", help="report raw PLCC/RMSE")
    ev.add_argument("--scale", type=int, action="append")
    ev.add_argument("--spatial-model", default="ssim")
    ev.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GstVqaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for klass, code in _EXIT_CODES:
            if isinstance(exc, klass):
                return code
        return 1


if __name__ == "__main__":
    sys.exit(main())
