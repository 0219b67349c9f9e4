"""Shared domain types for crawled platform objects, plus corpus validation.

Every other module speaks these types. All of them are frozen dataclasses
with tuple-valued collections, so instances are immutable after construction
and safe to share across concurrent readers. Text fields are normalized to
NFC at construction so that downstream tokenization is deterministic.

Range invariants (non-negative counts, rank bounds, retained-set consistency)
are deliberately NOT enforced in constructors: bad data must be representable
so that ``validate_corpus`` can report it. Shape invariants that would break
the representation itself (a 5-element attribute vector, say) do raise.
"""

from __future__ import annotations

import datetime as dt
import json
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional

ATTRIBUTE_NAMES = (
    "toxicity",
    "spam",
    "unsubstantial",
    "threat",
    "incoherent",
    "profanity",
    "inflammatory",
)

#: Conventional caps mirrored by the harvest defaults.
MAX_COMMENTS = 200
MAX_RANK = 20
MAX_RETAINED = 1000

CONSPIRATORIAL = 1
NON_CONSPIRATORIAL = 0


def _nfc(value: str) -> str:
    return unicodedata.normalize("NFC", value)


@dataclass(frozen=True)
class ChannelRecord:
    channel_id: str
    title: str = ""
    subscriber_count: int = 0
    last_video_id: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "title", _nfc(self.title))


@dataclass(frozen=True)
class Comment:
    text: str
    attribute_scores: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "text", _nfc(self.text))
        if self.attribute_scores is not None:
            scores = tuple(float(s) for s in self.attribute_scores)
            if len(scores) != len(ATTRIBUTE_NAMES):
                raise ValueError(
                    f"attribute_scores must have {len(ATTRIBUTE_NAMES)} entries, got {len(scores)}"
                )
            object.__setattr__(self, "attribute_scores", scores)


@dataclass(frozen=True)
class VideoRecord:
    video_id: str
    channel_id: str
    title: str = ""
    description: str = ""
    tags: tuple[str, ...] = ()
    transcript: Optional[str] = None
    view_count: int = 0
    comments: tuple[Comment, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "title", _nfc(self.title))
        object.__setattr__(self, "description", _nfc(self.description))
        object.__setattr__(self, "tags", tuple(_nfc(t) for t in self.tags))
        if self.transcript is not None:
            object.__setattr__(self, "transcript", _nfc(self.transcript))
        object.__setattr__(self, "comments", tuple(self.comments))

    def snippet(self) -> str:
        """Title, description and tags folded into one text field.

        Always defined, even when every part is empty. A missing transcript is
        a different state from an empty one; the snippet has no such split.
        """
        return "\n".join([self.title, self.description, " ".join(self.tags)])


@dataclass(frozen=True)
class RecommendationEdge:
    date: dt.date
    source_video_id: str
    recommended_video_id: str
    rank: int


@dataclass(frozen=True)
class DailySnapshot:
    date: dt.date
    edges: tuple[RecommendationEdge, ...]
    retained_video_ids: frozenset[str]
    coverage: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "retained_video_ids", frozenset(self.retained_video_ids))


@dataclass(frozen=True)
class LabeledExample:
    video: VideoRecord
    label: int
    provenance: str = ""


@dataclass(frozen=True)
class Corpus:
    """A bag of crawled objects, as loaded from disk or built by the simulator."""

    channels: tuple[ChannelRecord, ...] = ()
    videos: tuple[VideoRecord, ...] = ()
    snapshots: tuple[DailySnapshot, ...] = ()
    labeled: tuple[LabeledExample, ...] = ()


@dataclass(frozen=True)
class Violation:
    kind: str
    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind}[{self.subject}]: {self.message}"


def top_recommended(edges: Iterable[RecommendationEdge], retain: int) -> frozenset[str]:
    """Video ids of the ``retain`` most recommended videos, by in-edge count.

    Ties break lexicographically on video id so every caller retains the same
    set for the same edges.
    """
    counts: dict[str, int] = {}
    for edge in edges:
        counts[edge.recommended_video_id] = counts.get(edge.recommended_video_id, 0) + 1
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return frozenset(vid for vid, _ in ranked[:retain])


def validate_corpus(corpus: Corpus, max_rank: int = MAX_RANK) -> list[Violation]:
    """Check every declared invariant; return violations (empty on success).

    Never mutates or raises on bad data: violations are data. The result is
    order-insensitive over edge lists and calling twice returns the same list.
    ``max_rank`` tracks the configured watch-next depth (20 by default).
    """
    out: list[Violation] = []

    seen_channels: set[str] = set()
    for ch in corpus.channels:
        if not ch.channel_id:
            out.append(Violation("channel", "<empty>", "channel_id is empty"))
        elif ch.channel_id in seen_channels:
            out.append(Violation("channel", ch.channel_id, "duplicate channel_id"))
        else:
            seen_channels.add(ch.channel_id)
        if ch.subscriber_count < 0:
            out.append(
                Violation("channel", ch.channel_id, f"subscriber_count {ch.subscriber_count} < 0")
            )

    seen_videos: set[str] = set()
    for v in corpus.videos:
        if not v.video_id:
            out.append(Violation("video", "<empty>", "video_id is empty"))
        elif v.video_id in seen_videos:
            out.append(Violation("video", v.video_id, "duplicate video_id"))
        else:
            seen_videos.add(v.video_id)
        if v.view_count < 0:
            out.append(Violation("video", v.video_id, f"view_count {v.view_count} < 0"))
        if len(v.comments) > MAX_COMMENTS:
            out.append(
                Violation("video", v.video_id, f"{len(v.comments)} comments > {MAX_COMMENTS}")
            )
        for i, c in enumerate(v.comments):
            if c.attribute_scores is not None:
                bad = [s for s in c.attribute_scores if not 0.0 <= s <= 1.0]
                if bad:
                    out.append(
                        Violation(
                            "comment",
                            f"{v.video_id}#{i}",
                            f"attribute scores outside [0, 1]: {bad}",
                        )
                    )

    for snap in corpus.snapshots:
        out.extend(_validate_snapshot(snap, max_rank))

    for ex in corpus.labeled:
        if ex.label not in (CONSPIRATORIAL, NON_CONSPIRATORIAL):
            out.append(Violation("labeled", ex.video.video_id, f"label {ex.label} not in {{0, 1}}"))

    return out


def _validate_snapshot(snap: DailySnapshot, max_rank: int) -> list[Violation]:
    out: list[Violation] = []
    day = snap.date.isoformat()

    slots: set[tuple[dt.date, str, int]] = set()
    for edge in snap.edges:
        subject = f"{day}:{edge.source_video_id}->{edge.recommended_video_id}"
        if not 1 <= edge.rank <= max_rank:
            out.append(Violation("edge", subject, f"rank {edge.rank} outside [1, {max_rank}]"))
        if edge.source_video_id == edge.recommended_video_id:
            out.append(Violation("edge", subject, "source equals recommended"))
        slot = (edge.date, edge.source_video_id, edge.rank)
        if slot in slots:
            out.append(
                Violation("edge", subject, f"duplicate rank {edge.rank} for this source and date")
            )
        slots.add(slot)
        if edge.date != snap.date:
            out.append(Violation("edge", subject, f"edge dated {edge.date} in snapshot {day}"))

    recommended = {e.recommended_video_id for e in snap.edges}
    stray = sorted(snap.retained_video_ids - recommended)
    for vid in stray:
        out.append(Violation("snapshot", day, f"retained video {vid} has no in-edge"))
    if len(snap.retained_video_ids) > MAX_RETAINED:
        out.append(
            Violation("snapshot", day, f"{len(snap.retained_video_ids)} retained > {MAX_RETAINED}")
        )
    if not stray:
        expected = top_recommended(snap.edges, len(snap.retained_video_ids))
        if expected != snap.retained_video_ids:
            out.append(
                Violation("snapshot", day, "retained set is not the top videos by in-edge count")
            )
    if not 0.0 <= snap.coverage <= 1.0:
        out.append(Violation("snapshot", day, f"coverage {snap.coverage} outside [0, 1]"))
    return out


# ---------------------------------------------------------------------------
# JSON Lines codec. One record per line, one file per type, snake_case field
# names exactly as the dataclass definitions. decode(encode(x)) == x.
# ---------------------------------------------------------------------------


def encode_record(obj) -> dict:
    if isinstance(obj, ChannelRecord):
        return {
            "channel_id": obj.channel_id,
            "title": obj.title,
            "subscriber_count": obj.subscriber_count,
            "last_video_id": obj.last_video_id,
        }
    if isinstance(obj, Comment):
        return {
            "text": obj.text,
            "attribute_scores": list(obj.attribute_scores)
            if obj.attribute_scores is not None
            else None,
        }
    if isinstance(obj, VideoRecord):
        return {
            "video_id": obj.video_id,
            "channel_id": obj.channel_id,
            "title": obj.title,
            "description": obj.description,
            "tags": list(obj.tags),
            "transcript": obj.transcript,
            "view_count": obj.view_count,
            "comments": [encode_record(c) for c in obj.comments],
        }
    if isinstance(obj, RecommendationEdge):
        return {
            "date": obj.date.isoformat(),
            "source_video_id": obj.source_video_id,
            "recommended_video_id": obj.recommended_video_id,
            "rank": obj.rank,
        }
    if isinstance(obj, DailySnapshot):
        return {
            "date": obj.date.isoformat(),
            "edges": [encode_record(e) for e in obj.edges],
            "retained_video_ids": sorted(obj.retained_video_ids),
            "coverage": obj.coverage,
        }
    if isinstance(obj, LabeledExample):
        return {
            "video": encode_record(obj.video),
            "label": obj.label,
            "provenance": obj.provenance,
        }
    raise TypeError(f"no codec for {type(obj).__name__}")


def decode_record(cls, data: dict):
    if cls is ChannelRecord:
        return ChannelRecord(
            channel_id=data["channel_id"],
            title=data.get("title", ""),
            subscriber_count=data.get("subscriber_count", 0),
            last_video_id=data.get("last_video_id"),
        )
    if cls is Comment:
        scores = data.get("attribute_scores")
        return Comment(
            text=data["text"],
            attribute_scores=tuple(scores) if scores is not None else None,
        )
    if cls is VideoRecord:
        return VideoRecord(
            video_id=data["video_id"],
            channel_id=data["channel_id"],
            title=data.get("title", ""),
            description=data.get("description", ""),
            tags=tuple(data.get("tags", ())),
            transcript=data.get("transcript"),
            view_count=data.get("view_count", 0),
            comments=tuple(decode_record(Comment, c) for c in data.get("comments", ())),
        )
    if cls is RecommendationEdge:
        return RecommendationEdge(
            date=dt.date.fromisoformat(data["date"]),
            source_video_id=data["source_video_id"],
            recommended_video_id=data["recommended_video_id"],
            rank=data["rank"],
        )
    if cls is DailySnapshot:
        return DailySnapshot(
            date=dt.date.fromisoformat(data["date"]),
            edges=tuple(decode_record(RecommendationEdge, e) for e in data.get("edges", ())),
            retained_video_ids=frozenset(data.get("retained_video_ids", ())),
            coverage=data.get("coverage", 1.0),
        )
    if cls is LabeledExample:
        return LabeledExample(
            video=decode_record(VideoRecord, data["video"]),
            label=data["label"],
            provenance=data.get("provenance", ""),
        )
    raise TypeError(f"no codec for {cls.__name__}")


def write_jsonl(path: str | Path, records: Iterable) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(encode_record(rec), ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def read_jsonl(path: str | Path, cls) -> Iterator:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield decode_record(cls, json.loads(line))
