"""Persistence: versioned binary bundles for models, run manifests, CSV and
JSONL emitters for measurements, and single-writer lock files.

Bundle format, designed to be byte-stable and digest-checked:

    line 0: ``RECAUDIT-BUNDLE v1``
    line 1: JSON header (kind, schema_version, payload_sha256, payload_size)
    payload: 8-byte big-endian meta length, JSON meta (with an array
             directory), then the raw C-order array bytes in directory order.

A truncated payload or a digest mismatch loads as corruption, never as a
partial object; a future schema_version is refused outright.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import os
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .ensemble import FirstLayer, StandardizationStats, TrainedEnsemble
from .errors import ArtifactCorruptError, ArtifactVersionError, ConfigError, HarvestExistsError
from .metrics import CalibrationCurve, FilterBubbleMatrix, TrendSeries
from .textmodel import TextHyper, TextModel, Vocabulary
from .topics import TopicReport

_MAGIC = b"RECAUDIT-BUNDLE v1"
SCHEMA_VERSION = 1


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# Generic bundle save/load
# ---------------------------------------------------------------------------


def save_bundle(path: str | Path, kind: str, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    directory = []
    blobs = []
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        raw = arr.tobytes()
        directory.append({"name": name, "dtype": str(arr.dtype), "shape": list(arr.shape), "nbytes": len(raw)})
        blobs.append(raw)
    meta_json = json.dumps({"meta": meta, "arrays": directory}, sort_keys=True).encode("utf-8")
    payload = len(meta_json).to_bytes(8, "big") + meta_json + b"".join(blobs)
    header = json.dumps(
        {
            "kind": kind,
            "schema_version": SCHEMA_VERSION,
            "payload_sha256": sha256_bytes(payload),
            "payload_size": len(payload),
        },
        sort_keys=True,
    ).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_MAGIC + b"\n" + header + b"\n" + payload)


def load_bundle(path: str | Path, kind: str) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        magic = fh.readline().rstrip(b"\n")
        if magic != _MAGIC:
            raise ArtifactCorruptError(f"{path}: not a recaudit bundle")
        try:
            header = json.loads(fh.readline().decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ArtifactCorruptError(f"{path}: unreadable header") from exc
        if header.get("schema_version", 0) > SCHEMA_VERSION:
            raise ArtifactVersionError(
                f"{path}: schema_version {header['schema_version']} is newer than supported {SCHEMA_VERSION}"
            )
        if header.get("kind") != kind:
            raise ArtifactCorruptError(f"{path}: bundle holds {header.get('kind')!r}, expected {kind!r}")
        payload = fh.read()
    if len(payload) != header["payload_size"]:
        raise ArtifactCorruptError(f"{path}: truncated payload")
    if sha256_bytes(payload) != header["payload_sha256"]:
        raise ArtifactCorruptError(f"{path}: payload digest mismatch")
    meta_len = int.from_bytes(payload[:8], "big")
    doc = json.loads(payload[8 : 8 + meta_len].decode("utf-8"))
    arrays: dict[str, np.ndarray] = {}
    offset = 8 + meta_len
    for entry in doc["arrays"]:
        raw = payload[offset : offset + entry["nbytes"]]
        offset += entry["nbytes"]
        arrays[entry["name"]] = np.frombuffer(raw, dtype=entry["dtype"]).reshape(entry["shape"]).copy()
    return doc["meta"], arrays


# ---------------------------------------------------------------------------
# Text model and ensemble codecs
# ---------------------------------------------------------------------------


def _text_model_parts(model: Optional[TextModel], prefix: str, meta: dict, arrays: dict) -> None:
    if model is None:
        meta[prefix] = None
        return
    meta[prefix] = {
        "words": list(model.vocab.words),
        "hyper": vars(model.hyper).copy(),
        "epoch_losses": list(model.epoch_losses),
    }
    observed = sorted(model.row_index, key=model.row_index.get)
    arrays[f"{prefix}.observed_ids"] = np.array(observed, dtype=np.int64)
    arrays[f"{prefix}.embedding"] = model.embedding
    arrays[f"{prefix}.head"] = model.head
    arrays[f"{prefix}.bias"] = model.bias


def _text_model_from_parts(prefix: str, meta: dict, arrays: dict) -> Optional[TextModel]:
    info = meta[prefix]
    if info is None:
        return None
    hyper = TextHyper(**info["hyper"])
    vocab = Vocabulary(words=tuple(info["words"]), buckets=hyper.buckets, min_count=hyper.min_count)
    observed = arrays[f"{prefix}.observed_ids"]
    return TextModel(
        vocab=vocab,
        hyper=hyper,
        row_index={int(fid): row for row, fid in enumerate(observed)},
        embedding=arrays[f"{prefix}.embedding"],
        head=arrays[f"{prefix}.head"],
        bias=arrays[f"{prefix}.bias"],
        epoch_losses=tuple(info["epoch_losses"]),
    )


def save_ensemble(path: str | Path, ensemble: TrainedEnsemble) -> None:
    meta: dict = {
        "seed": ensemble.seed,
        "repeats": ensemble.repeats,
        "split": ensemble.split,
        "trained_date": ensemble.trained_date.isoformat(),
        "n_examples": ensemble.n_examples,
        "stacking_bias": ensemble.stacking_bias,
        "stats": [list(s) if s is not None else None for s in ensemble.stats.stats],
        "has_attribute_head": ensemble.first_layer.attribute_head is not None,
    }
    arrays: dict[str, np.ndarray] = {"stacking_coef": ensemble.stacking_coef}
    layer = ensemble.first_layer
    _text_model_parts(layer.transcript_model, "transcript_model", meta, arrays)
    _text_model_parts(layer.snippet_model, "snippet_model", meta, arrays)
    _text_model_parts(layer.comments_model, "comments_model", meta, arrays)
    if layer.attribute_head is not None:
        coef, bias = layer.attribute_head
        arrays["attribute_head.coef"] = coef
        meta["attribute_head.bias"] = bias
    save_bundle(path, "ensemble", meta, arrays)


def load_ensemble(path: str | Path) -> TrainedEnsemble:
    meta, arrays = load_bundle(path, "ensemble")
    attribute_head = None
    if meta["has_attribute_head"]:
        attribute_head = (arrays["attribute_head.coef"], float(meta["attribute_head.bias"]))
    layer = FirstLayer(
        transcript_model=_text_model_from_parts("transcript_model", meta, arrays),
        snippet_model=_text_model_from_parts("snippet_model", meta, arrays),
        comments_model=_text_model_from_parts("comments_model", meta, arrays),
        attribute_head=attribute_head,
    )
    stats = StandardizationStats(
        stats=tuple(tuple(s) if s is not None else None for s in meta["stats"])
    )
    return TrainedEnsemble(
        first_layer=layer,
        stats=stats,
        stacking_coef=arrays["stacking_coef"],
        stacking_bias=float(meta["stacking_bias"]),
        seed=meta["seed"],
        repeats=meta["repeats"],
        split=meta["split"],
        trained_date=dt.date.fromisoformat(meta["trained_date"]),
        n_examples=meta["n_examples"],
    )


def save_text_model(path: str | Path, model: TextModel) -> None:
    meta: dict = {}
    arrays: dict[str, np.ndarray] = {}
    _text_model_parts(model, "model", meta, arrays)
    save_bundle(path, "text_model", meta, arrays)


def load_text_model(path: str | Path) -> TextModel:
    meta, arrays = load_bundle(path, "text_model")
    model = _text_model_from_parts("model", meta, arrays)
    if model is None:
        raise ArtifactCorruptError(f"{path}: empty text model")
    return model


# ---------------------------------------------------------------------------
# Run manifests
# ---------------------------------------------------------------------------


@dataclass
class RunManifest:
    command: str
    config_digest: str
    code_version: str
    seed: Optional[int]
    created_at: str
    inputs: dict[str, str]
    outputs: dict[str, str]

    def write(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(vars(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @staticmethod
    def read(path: str | Path) -> "RunManifest":
        return RunManifest(**json.loads(Path(path).read_text(encoding="utf-8")))


def build_manifest(
    command: str,
    config_digest: str,
    seed: Optional[int],
    inputs: list[str | Path],
    outputs: list[str | Path],
) -> RunManifest:
    return RunManifest(
        command=command,
        config_digest=config_digest,
        code_version=__version__,
        seed=seed,
        created_at=dt.datetime.now(dt.timezone.utc).isoformat(),
        inputs={str(p): sha256_file(p) for p in inputs if Path(p).exists()},
        outputs={str(p): sha256_file(p) for p in outputs},
    )


def outputs_are_current(manifest_path: str | Path) -> bool:
    """True when a previous run's outputs all exist with matching digests."""
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        return False
    try:
        manifest = RunManifest.read(manifest_path)
    except (json.JSONDecodeError, TypeError):
        return False
    for path, digest in manifest.outputs.items():
        if not Path(path).exists() or sha256_file(path) != digest:
            return False
    return bool(manifest.outputs)


# ---------------------------------------------------------------------------
# Measurement emitters (CSV rows are plot-ready and byte-stable)
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_trends_csv(path: str | Path, series: TrendSeries, window_days: int) -> None:
    from .metrics import rolling_mean

    raw_rolled = rolling_mean([(p.date, p.raw) for p in series.points], window_days)
    weighted_rolled = rolling_mean([(p.date, p.weighted) for p in series.points], window_days)
    lines = ["date,raw_frequency,weighted_frequency,coverage,raw_rolling,weighted_rolling"]
    for point, (_, rr), (_, wr) in zip(series.points, raw_rolled, weighted_rolled):
        lines.append(
            ",".join(
                [
                    point.date.isoformat(),
                    _fmt(point.raw),
                    _fmt(point.weighted),
                    _fmt(point.coverage),
                    _fmt(rr),
                    _fmt(wr),
                ]
            )
        )
    _write_text(path, "\n".join(lines) + "\n")


def write_calibration_csv(path: str | Path, curve: CalibrationCurve) -> None:
    lines = ["bin_lower,bin_upper,n,k,proportion,ci_low,ci_high"]
    for b in curve.bins:
        lines.append(
            ",".join(
                [_fmt(b.lower), _fmt(b.upper), str(b.n), str(b.k), _fmt(b.proportion), _fmt(b.ci_low), _fmt(b.ci_high)]
            )
        )
    _write_text(path, "\n".join(lines) + "\n")


def read_calibration_csv(path: str | Path, alpha: float = 0.05) -> CalibrationCurve:
    from .metrics import CalibrationBin

    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    bins = []
    for line in lines[1:]:  # past the header row
        lower, upper, n, k, proportion, ci_low, ci_high = line.split(",")
        bins.append(
            CalibrationBin(
                lower=float(lower),
                upper=float(upper),
                n=int(n),
                k=int(k),
                proportion=float(proportion) if proportion else None,
                ci_low=float(ci_low) if ci_low else None,
                ci_high=float(ci_high) if ci_high else None,
            )
        )
    return CalibrationCurve(bins=tuple(bins), alpha=alpha)


def write_bubble_csv(path: str | Path, matrix: FilterBubbleMatrix) -> None:
    lines = ["period_start,period_end,bin_lower,bin_upper,proportion,edge_count"]
    for pi, period in enumerate(matrix.periods):
        for b in range(matrix.bin_count):
            lines.append(
                ",".join(
                    [
                        period.start.isoformat(),
                        period.end.isoformat(),
                        _fmt(b / matrix.bin_count),
                        _fmt((b + 1) / matrix.bin_count),
                        _fmt(matrix.cells[pi][b]),
                        str(matrix.edge_counts[pi][b]),
                    ]
                )
            )
    _write_text(path, "\n".join(lines) + "\n")


def write_topics(json_path: str | Path, csv_path: str | Path, report: TopicReport) -> None:
    doc = [
        {
            "topic": row.topic,
            "pct_recommendations": row.pct_recommendations,
            "pct_videos": row.pct_videos,
            "top_words": list(row.top_words),
        }
        for row in report.rows
    ]
    _write_text(json_path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    lines = ["topic,pct_recommendations,pct_videos,top_words"]
    for row in report.rows:
        lines.append(
            ",".join(
                [str(row.topic), _fmt(row.pct_recommendations), _fmt(row.pct_videos), " ".join(row.top_words)]
            )
        )
    _write_text(csv_path, "\n".join(lines) + "\n")


def _write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# Small JSONL sidecars (likelihoods, ground truth, seed lists)
# ---------------------------------------------------------------------------


def write_likelihoods(path: str | Path, likelihoods: dict[str, Optional[float]]) -> None:
    lines = [
        json.dumps({"video_id": vid, "likelihood": like}, sort_keys=True)
        for vid, like in sorted(likelihoods.items())
    ]
    _write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_likelihoods(path: str | Path) -> dict[str, Optional[float]]:
    out: dict[str, Optional[float]] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            doc = json.loads(line)
            out[doc["video_id"]] = doc["likelihood"]
    return out


def write_ground_truth(path: str | Path, truth: dict[str, int]) -> None:
    lines = [
        json.dumps({"video_id": vid, "label": label}, sort_keys=True)
        for vid, label in sorted(truth.items())
    ]
    _write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_ground_truth(path: str | Path) -> dict[str, int]:
    out: dict[str, int] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            doc = json.loads(line)
            out[doc["video_id"]] = int(doc["label"])
    return out


def write_seed_list(path: str | Path, channel_ids: list[str]) -> None:
    _write_text(path, "\n".join(channel_ids) + ("\n" if channel_ids else ""))


def read_seed_list(path: str | Path) -> list[str]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"seed list {path} does not exist")
    return [line.strip() for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


def snapshot_path(out_dir: str | Path, day: dt.date) -> Path:
    return Path(out_dir) / "snapshots" / f"{day.isoformat()}.jsonl"


def ensure_snapshot_writable(path: Path, overwrite: bool) -> None:
    if path.exists() and not overwrite:
        raise HarvestExistsError(f"{path} already exists; pass --overwrite to replace it")


# ---------------------------------------------------------------------------
# One writer per output path
# ---------------------------------------------------------------------------


@contextmanager
def output_lock(path: str | Path):
    lock_path = Path(str(path) + ".lock")
    lock_path.parent.mkdir(parents=True, exist_ok=True)
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(f"{path} is locked by another writer ({lock_path})") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock_path.unlink(missing_ok=True)
