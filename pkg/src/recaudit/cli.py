"""Command-line surface for the audit pipeline.

Subcommands: simulate, snowball, harvest, train, score, trends, calibrate,
bubble, topics, validate. Every subcommand writes its artifacts under the
configured output directory plus a run manifest with input/output digests;
re-running a subcommand whose outputs are still digest-valid is a no-op
unless --overwrite is passed. Exit codes: 0 success, 1 usage or config
error, 2 data or invariant error, 3 source fetch failure.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

from . import __version__, corpus, store
from .attributes import LexiconAttributeScorer, score_comment_attributes
from .community import cluster_channels, modularity
from .config import PipelineConfig, load_config
from .crawler import daily_harvest, select_seed_cluster, snowball_channels
from .ensemble import classify_video, train_ensemble
from .errors import (
    ArtifactCorruptError,
    ArtifactVersionError,
    ChannelNotFoundError,
    ChannelStalledError,
    CommentsDisabledError,
    ConfigError,
    CorpusViolationError,
    DegenerateTrainingError,
    HarvestExistsError,
    RecauditError,
    ScorerUnavailableError,
    TransientFetchError,
    UnclassifiableVideoError,
    VideoNotFoundError,
)
from .live import LiveAdapter
from .metrics import (
    Period,
    TrendPoint,
    TrendSeries,
    apply_calibration,
    calibration_curve,
    coverage,
    filter_bubble_matrix,
    raw_frequency,
    weighted_frequency,
)
from .sources import PlatformSpec, SimulatedPlatform, generate_labeled_set, generate_platform
from .textmodel import TextHyper
from .topics import fit_topic_model, topic_report

logger = logging.getLogger(__name__)

_USAGE_ERRORS = (ConfigError, ValueError)
_DATA_ERRORS = (
    ArtifactCorruptError,
    ArtifactVersionError,
    DegenerateTrainingError,
    HarvestExistsError,
    UnclassifiableVideoError,
)
_FETCH_ERRORS = (
    ChannelNotFoundError,
    ChannelStalledError,
    CommentsDisabledError,
    ScorerUnavailableError,
    TransientFetchError,
    VideoNotFoundError,
)


def _config_digest(config: PipelineConfig) -> str:
    canonical = json.dumps(vars(config), sort_keys=True, default=str)
    return store.sha256_bytes(canonical.encode("utf-8"))


def _out(config: PipelineConfig) -> Path:
    return Path(config.out_dir)


def _text_hyper(config: PipelineConfig, seed: int) -> TextHyper:
    return TextHyper(
        dim=config.text_dim,
        ngram=config.text_ngram,
        buckets=config.text_buckets,
        lr=config.text_lr,
        epochs=config.text_epochs,
        min_count=config.text_min_count,
        seed=seed,
    )


def _load_platform(config: PipelineConfig) -> SimulatedPlatform:
    out = _out(config)
    channels = tuple(corpus.read_jsonl(out / "channels.jsonl", corpus.ChannelRecord))
    videos = tuple(corpus.read_jsonl(out / "videos.jsonl", corpus.VideoRecord))
    truth = store.read_ground_truth(out / "ground_truth.jsonl")
    state_path = out / "platform_state.json"
    video_dates: dict[str, dt.date] = {}
    disabled: frozenset[str] = frozenset()
    if state_path.exists():
        state = json.loads(state_path.read_text(encoding="utf-8"))
        video_dates = {
            vid: dt.date.fromisoformat(day) for vid, day in state["video_dates"].items()
        }
        disabled = frozenset(state["comments_disabled"])
    q = config.sim_homophily if config.sim_homophily is not None else config.sim_base_rate
    return SimulatedPlatform(
        channels=channels,
        videos=videos,
        ground_truth=truth,
        homophily=q,
        base_rate=config.sim_base_rate,
        seed=config.sim_seed,
        video_dates=video_dates,
        comments_disabled=disabled,
    )


def _source(config: PipelineConfig):
    if config.source == "live":
        return LiveAdapter.from_env()
    return _load_platform(config)


def _read_snapshots(config: PipelineConfig) -> list[corpus.DailySnapshot]:
    snap_dir = _out(config) / "snapshots"
    if not snap_dir.exists():
        raise ConfigError(f"no snapshots under {snap_dir}; run `harvest` first")
    snaps = []
    for path in sorted(snap_dir.glob("*.jsonl")):
        snaps.extend(corpus.read_jsonl(path, corpus.DailySnapshot))
    if not snaps:
        raise ConfigError(f"no snapshots under {snap_dir}")
    return sorted(snaps, key=lambda s: s.date)


def _read_videos(config: PipelineConfig) -> dict[str, corpus.VideoRecord]:
    out = _out(config)
    records: dict[str, corpus.VideoRecord] = {}
    paths = [out / "videos.jsonl"]
    if (out / "videos").exists():
        paths.extend(sorted((out / "videos").glob("*.jsonl")))
    for path in paths:
        if Path(path).exists():
            for video in corpus.read_jsonl(path, corpus.VideoRecord):
                records[video.video_id] = video
    if not records:
        raise ConfigError(f"no video records under {out}")
    return records


# ---------------------------------------------------------------------------
# Subcommand implementations. Each returns (inputs, outputs) for the manifest.
# ---------------------------------------------------------------------------


def _cmd_simulate(config: PipelineConfig, args) -> tuple[list, list]:
    out = _out(config)
    spec = PlatformSpec(
        n_channels=config.sim_channels,
        videos_per_channel=config.sim_videos_per_channel,
        base_rate=config.sim_base_rate,
        homophily=config.sim_homophily,
        conspiratorial_share=config.sim_share,
        comments_per_video=config.sim_comments_per_video,
        comments_disabled_rate=config.sim_comments_disabled_rate,
        transcript_missing_rate=config.sim_transcript_missing_rate,
        seed=config.sim_seed,
    )
    platform = generate_platform(spec)
    labeled = generate_labeled_set(platform, config.sim_labeled_count, seed=config.sim_seed)
    corpus.write_jsonl(out / "channels.jsonl", platform.channels)
    corpus.write_jsonl(out / "videos.jsonl", platform.videos)
    store.write_ground_truth(out / "ground_truth.jsonl", platform.ground_truth)
    corpus.write_jsonl(out / "labeled.jsonl", labeled)
    store.write_seed_list(out / "seeds.txt", platform.channel_ids())
    state = {
        "video_dates": {vid: day.isoformat() for vid, day in sorted(platform.video_dates.items())},
        "comments_disabled": sorted(platform.comments_disabled),
    }
    out.mkdir(parents=True, exist_ok=True)
    (out / "platform_state.json").write_text(
        json.dumps(state, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    outputs = [
        "channels.jsonl",
        "videos.jsonl",
        "ground_truth.jsonl",
        "labeled.jsonl",
        "seeds.txt",
        "platform_state.json",
    ]
    return [], [out / name for name in outputs]


def _cmd_snowball(config: PipelineConfig, args) -> tuple[list, list]:
    out = _out(config)
    source = _source(config)
    seeds_path = Path(config.snowball_seeds_path)
    initial = store.read_seed_list(seeds_path)[: config.snowball_initial]
    result = snowball_channels(
        source,
        initial,
        config.snowball_target,
        k=config.snowball_k,
        binary_weights=config.snowball_binary_weights,
    )
    if result.under_target:
        logger.warning(
            "snowball exhausted the source at %d of %d channels",
            len(result.channels),
            config.snowball_target,
        )
    partition = cluster_channels(result.graph)
    q = modularity(result.graph, partition)

    store.write_seed_list(out / "snowball" / "channels.txt", list(result.channels))
    clusters_doc = {
        "modularity": q,
        "under_target": result.under_target,
        "dead_channels": list(result.dead_channels),
        "communities": {str(cid): members for cid, members in partition.communities().items()},
    }
    (out / "snowball").mkdir(parents=True, exist_ok=True)
    (out / "snowball" / "clusters.json").write_text(
        json.dumps(clusters_doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    outputs = [out / "snowball" / "channels.txt", out / "snowball" / "clusters.json"]

    anchors = [a.strip() for a in config.cluster_anchors.split(",") if a.strip()]
    if config.cluster_id is not None or anchors:
        manual = (
            store.read_seed_list(config.manual_additions_path)
            if config.manual_additions_path
            else []
        )
        selected = select_seed_cluster(
            partition,
            result.graph,
            manual_additions=manual,
            cluster_id=config.cluster_id,
            anchors=anchors,
        )
        store.write_seed_list(out / "seeds.txt", selected)
        outputs.append(out / "seeds.txt")
    return [seeds_path], outputs


def _cmd_harvest(config: PipelineConfig, args) -> tuple[list, list]:
    if not args.date:
        raise ConfigError("harvest requires --date YYYY-MM-DD")
    day = dt.date.fromisoformat(args.date)
    out = _out(config)
    source = _source(config)
    seeds = store.read_seed_list(out / "seeds.txt")
    snap_path = store.snapshot_path(out, day)
    store.ensure_snapshot_writable(snap_path, args.overwrite)

    result = daily_harvest(source, seeds, day, k=config.harvest_k, retain=config.harvest_retain)
    corpus.write_jsonl(snap_path, [result.snapshot])
    outputs = [snap_path]

    if config.source == "live":
        # Persist the records behind this snapshot; the simulator's are already on disk.
        scorer = LexiconAttributeScorer.bundled()
        wanted = sorted(
            {e.source_video_id for e in result.snapshot.edges}
            | set(result.snapshot.retained_video_ids)
        )
        fetched = []
        for vid in wanted:
            try:
                fetched.append(_enrich_video(source, source.fetch_video(vid), config.comments_limit, scorer))
            except _FETCH_ERRORS as exc:
                logger.warning("could not fetch video %s: %s", vid, exc)
        videos_path = out / "videos" / f"{day.isoformat()}.jsonl"
        corpus.write_jsonl(videos_path, fetched)
        outputs.append(videos_path)

    if result.failures:
        logger.warning("harvest %s: %d channels failed", day, len(result.failures))
    return [out / "seeds.txt"], outputs


def _enrich_video(source, video: corpus.VideoRecord, limit: int, scorer) -> corpus.VideoRecord:
    comments = list(video.comments[:limit])
    if not comments and source.supports_comments:
        try:
            comments = source.fetch_comments(video.video_id, limit)
        except CommentsDisabledError:
            comments = []
    scored = []
    for comment in comments:
        if comment.attribute_scores is None:
            try:
                scores = score_comment_attributes(scorer, comment)
                comment = corpus.Comment(text=comment.text, attribute_scores=scores)
            except ScorerUnavailableError:
                pass
        scored.append(comment)
    return replace(video, comments=tuple(scored))


def _cmd_train(config: PipelineConfig, args) -> tuple[list, list]:
    out = _out(config)
    labeled_path = _require(out / "labeled.jsonl", "simulate")
    labeled = list(corpus.read_jsonl(labeled_path, corpus.LabeledExample))
    ensemble = train_ensemble(
        labeled,
        repeats=config.ensemble_repeats,
        split=config.ensemble_split,
        seed=config.ensemble_seed,
        text_hyper=_text_hyper(config, config.ensemble_seed),
        l2=config.ensemble_l2,
    )
    model_path = out / "ensemble.bin"
    store.save_ensemble(model_path, ensemble)
    weights_path = out / "ensemble_weights.json"
    weights_path.write_text(
        json.dumps(ensemble.relative_weights(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return [labeled_path], [model_path, weights_path]


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise ConfigError(f"{path} does not exist; run `{hint}` first")
    return path


def _cmd_score(config: PipelineConfig, args) -> tuple[list, list]:
    out = _out(config)
    model_path = _require(out / "ensemble.bin", "train")
    ensemble = store.load_ensemble(model_path)
    snapshots = _read_snapshots(config)
    videos = _read_videos(config)
    wanted = sorted(
        {e.recommended_video_id for s in snapshots for e in s.edges}
        | {e.source_video_id for s in snapshots for e in s.edges}
    )
    likelihoods: dict[str, Optional[float]] = {}
    for vid in wanted:
        video = videos.get(vid)
        if video is None:
            likelihoods[vid] = None
            continue
        try:
            likelihoods[vid] = classify_video(ensemble, video)
        except UnclassifiableVideoError:
            likelihoods[vid] = None
    path = out / "likelihoods.jsonl"
    store.write_likelihoods(path, likelihoods)
    return [model_path], [path]


def _trend_series(config: PipelineConfig) -> TrendSeries:
    snapshots = _read_snapshots(config)
    likelihoods = store.read_likelihoods(_require(_out(config) / "likelihoods.jsonl", "score"))
    if config.trends_calibrated:
        curve = store.read_calibration_csv(
            _require(_out(config) / "calibration.csv", "calibrate"), alpha=config.alpha
        )
        likelihoods = apply_calibration(likelihoods, curve)
    videos = _read_videos(config)
    views = {vid: v.view_count for vid, v in videos.items()}
    points = []
    for snap in snapshots:
        raw = raw_frequency(snap.edges, likelihoods, config.threshold)
        weighted = (
            weighted_frequency(snap.edges, likelihoods, views, config.threshold)
            if all(e.source_video_id in views for e in snap.edges)
            else None
        )
        points.append(
            TrendPoint(
                date=snap.date,
                raw=raw,
                weighted=weighted,
                coverage=coverage(snap.edges, likelihoods),
            )
        )
    return TrendSeries(points=tuple(points))


def _cmd_trends(config: PipelineConfig, args) -> tuple[list, list]:
    out = _out(config)
    series = _trend_series(config)
    csv_path = out / "trends.csv"
    store.write_trends_csv(csv_path, series, config.window_days)
    defined = [p.raw for p in series.points if p.raw is not None]
    summary = {
        "days": len(series.points),
        "window_days": config.window_days,
        "threshold": config.threshold,
        "calibrated": config.trends_calibrated,
        "mean_raw_frequency": sum(defined) / len(defined) if defined else None,
        "mean_coverage": sum(p.coverage for p in series.points) / len(series.points),
    }
    summary_path = out / "trends_summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return [out / "likelihoods.jsonl"], [csv_path, summary_path]


def _cmd_calibrate(config: PipelineConfig, args) -> tuple[list, list]:
    out = _out(config)
    likelihoods = store.read_likelihoods(_require(out / "likelihoods.jsonl", "score"))
    labels_path = Path(args.labels) if args.labels else out / "ground_truth.jsonl"
    truth = store.read_ground_truth(_require(labels_path, "simulate"))
    pairs = [
        (like, truth[vid])
        for vid, like in sorted(likelihoods.items())
        if like is not None and vid in truth
    ]
    if not pairs:
        raise ConfigError("no scored videos overlap the label file")
    curve = calibration_curve(
        [p for p, _ in pairs],
        [y for _, y in pairs],
        bin_count=config.calibration_bins,
        alpha=config.alpha,
    )
    csv_path = out / "calibration.csv"
    store.write_calibration_csv(csv_path, curve)
    summary = {
        "pairs": len(pairs),
        "bins": config.calibration_bins,
        "alpha": config.alpha,
        "populated_bins": sum(1 for b in curve.bins if b.n),
    }
    summary_path = out / "calibration_summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return [out / "likelihoods.jsonl", labels_path], [csv_path, summary_path]


def _parse_periods(config: PipelineConfig, snapshots) -> list[Period]:
    if config.bubble_periods:
        periods = []
        for chunk in config.bubble_periods.split(","):
            start_s, _, end_s = chunk.strip().partition(":")
            if not end_s:
                raise ConfigError(f"bad period {chunk!r}; expected start:end")
            periods.append(Period(dt.date.fromisoformat(start_s), dt.date.fromisoformat(end_s)))
        return periods
    first, last = snapshots[0].date, snapshots[-1].date
    total = (last - first).days + 1
    span = max(total // 3, 1)
    bounds = [first, first + dt.timedelta(days=span), first + dt.timedelta(days=2 * span)]
    ends = [bounds[1] - dt.timedelta(days=1), bounds[2] - dt.timedelta(days=1), last]
    return [Period(s, e) for s, e in zip(bounds, ends) if s <= e]


def _cmd_bubble(config: PipelineConfig, args) -> tuple[list, list]:
    out = _out(config)
    snapshots = _read_snapshots(config)
    likelihoods = store.read_likelihoods(_require(out / "likelihoods.jsonl", "score"))
    periods = _parse_periods(config, snapshots)
    edges = [e for s in snapshots for e in s.edges]
    matrix = filter_bubble_matrix(
        edges, likelihoods, periods, source_bins=config.bubble_bins, threshold=config.threshold
    )
    csv_path = out / "bubble.csv"
    store.write_bubble_csv(csv_path, matrix)
    summary = {
        "periods": [[p.start.isoformat(), p.end.isoformat()] for p in matrix.periods],
        "bins": matrix.bin_count,
        "threshold": config.threshold,
        "total_edges": sum(sum(row) for row in matrix.edge_counts),
    }
    summary_path = out / "bubble_summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return [out / "likelihoods.jsonl"], [csv_path, summary_path]


def _cmd_topics(config: PipelineConfig, args) -> tuple[list, list]:
    out = _out(config)
    snapshots = _read_snapshots(config)
    likelihoods = store.read_likelihoods(_require(out / "likelihoods.jsonl", "score"))
    videos = _read_videos(config)
    conspiratorial = [
        videos[vid]
        for vid, like in sorted(likelihoods.items())
        if like is not None and like > config.threshold and vid in videos
    ]
    if len(conspiratorial) < 2:
        raise ConfigError("fewer than two conspiratorial videos; nothing to model")
    model = fit_topic_model(
        conspiratorial,
        k=config.topics_k,
        max_iter=config.topics_max_iter,
        tol=config.topics_tol,
        seed=config.topics_seed,
        field=config.topics_field,
        use_tfidf=config.topics_use_tfidf,
    )
    edges = [e for s in snapshots for e in s.edges]
    report = topic_report(
        model,
        edges,
        likelihoods,
        threshold=config.threshold,
        top_words=config.topics_top_words,
        report_top=config.topics_report_top,
    )
    json_path = out / "topics.json"
    csv_path = out / "topics.csv"
    store.write_topics(json_path, csv_path, report)
    return [out / "likelihoods.jsonl"], [json_path, csv_path]


def _cmd_validate(config: PipelineConfig, args) -> tuple[list, list]:
    out = _out(config)
    channels = tuple(corpus.read_jsonl(out / "channels.jsonl", corpus.ChannelRecord)) if (out / "channels.jsonl").exists() else ()
    videos = tuple(corpus.read_jsonl(out / "videos.jsonl", corpus.VideoRecord)) if (out / "videos.jsonl").exists() else ()
    labeled = tuple(corpus.read_jsonl(out / "labeled.jsonl", corpus.LabeledExample)) if (out / "labeled.jsonl").exists() else ()
    snapshots: list[corpus.DailySnapshot] = []
    snap_dir = out / "snapshots"
    if snap_dir.exists():
        for path in sorted(snap_dir.glob("*.jsonl")):
            snapshots.extend(corpus.read_jsonl(path, corpus.DailySnapshot))
    bag = corpus.Corpus(
        channels=channels, videos=videos, snapshots=tuple(snapshots), labeled=labeled
    )
    violations = corpus.validate_corpus(bag, max_rank=config.harvest_k)
    report_path = out / "validation.json"
    report_path.write_text(
        json.dumps([vars(v) for v in violations], indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    for v in violations:
        logger.error("%s", v)
    if violations:
        raise CorpusViolationError(f"{len(violations)} corpus violations; see {report_path}")
    return [], [report_path]


_COMMANDS = {
    "simulate": _cmd_simulate,
    "snowball": _cmd_snowball,
    "harvest": _cmd_harvest,
    "train": _cmd_train,
    "score": _cmd_score,
    "trends": _cmd_trends,
    "calibrate": _cmd_calibrate,
    "bubble": _cmd_bubble,
    "topics": _cmd_topics,
    "validate": _cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="recaudit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"recaudit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or "").strip() or name)
        p.add_argument("--config", default=None, help="key-value config file")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--date", default=None, help="day to operate on (YYYY-MM-DD)")
        p.add_argument("--threshold", type=float, default=None, help="decision threshold override")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--overwrite", action="store_true", help="replace existing outputs")
        p.add_argument("--json-errors", action="store_true", help="emit machine-readable errors")
        if name == "calibrate":
            p.add_argument("--labels", default=None, help="human label JSONL (video_id, label)")
    return parser


def _effective_config(args) -> PipelineConfig:
    config = load_config(args.config)
    if args.out is not None:
        config.out_dir = args.out
    if args.threshold is not None:
        config.threshold = args.threshold
    if args.seed is not None:
        config.sim_seed = args.seed
        config.ensemble_seed = args.seed
        config.topics_seed = args.seed
    config.validate()
    return config


def _manifest_path(config: PipelineConfig, args) -> Path:
    name = args.command if not args.date else f"{args.command}-{args.date}"
    return _out(config) / "manifests" / f"{name}.json"


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad usage; keep the contract
        return 0 if exc.code == 0 else 1
    try:
        config = _effective_config(args)
        manifest_path = _manifest_path(config, args)
        if not args.overwrite and store.outputs_are_current(manifest_path):
            print(f"{args.command}: outputs are current, skipping (see {manifest_path})")
            return 0
        with store.output_lock(manifest_path):
            inputs, outputs = _COMMANDS[args.command](config, args)
            manifest = store.build_manifest(
                command=args.command,
                config_digest=_config_digest(config),
                seed=args.seed,
                inputs=inputs,
                outputs=outputs,
            )
            manifest.write(manifest_path)
        for path in outputs:
            print(f"{args.command}: wrote {path}")
        return 0
    except _USAGE_ERRORS as exc:
        _report_error(args, exc)
        return 1
    except _DATA_ERRORS as exc:
        _report_error(args, exc)
        return 2
    except _FETCH_ERRORS as exc:
        _report_error(args, exc)
        return 3
    except RecauditError as exc:  # anything typed but unanticipated is a data error
        _report_error(args, exc)
        return 2


def _report_error(args, exc: Exception) -> None:
    if getattr(args, "json_errors", False):
        doc = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(doc, sort_keys=True), file=sys.stderr)
    else:
        print(f"error: {exc}", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
