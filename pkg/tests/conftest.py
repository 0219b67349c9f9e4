import datetime as dt

import pytest

from recaudit.corpus import ChannelRecord, Comment, RecommendationEdge, VideoRecord
from recaudit.sources import SimulatedPlatform


def make_video(video_id, channel_id="chan", comments=(), transcript=None, **kwargs):
    return VideoRecord(
        video_id=video_id,
        channel_id=channel_id,
        comments=tuple(Comment(text=c) if isinstance(c, str) else c for c in comments),
        transcript=transcript,
        **kwargs,
    )


def make_edge(src, rec, rank=1, day=dt.date(2019, 6, 1)):
    return RecommendationEdge(
        date=day, source_video_id=src, recommended_video_id=rec, rank=rank
    )


@pytest.fixture
def hand_platform():
    """Two channels, six videos with known labels and dates; q=1, p=0."""
    channels = (
        ChannelRecord(channel_id="alpha", title="Alpha", last_video_id="a2"),
        ChannelRecord(channel_id="beta", title="Beta", last_video_id="b3"),
    )
    videos = tuple(
        make_video(vid, channel_id=chan, comments=comments)
        for vid, chan, comments in [
            ("a1", "alpha", ["first comment", "second comment", "third comment"]),
            ("a2", "alpha", []),
            ("b1", "beta", ["hello"]),
            ("b2", "beta", ["one", "two"]),
            ("b3", "beta", ["x"]),
            ("b4", "beta", []),
        ]
    )
    truth = {"a1": 1, "a2": 1, "b1": 0, "b2": 0, "b3": 0, "b4": 0}
    dates = {
        "a1": dt.date(2019, 1, 1),
        "a2": dt.date(2019, 1, 5),
        "b1": dt.date(2019, 1, 1),
        "b2": dt.date(2019, 1, 2),
        "b3": dt.date(2019, 1, 9),
        "b4": dt.date(2019, 1, 3),
    }
    return SimulatedPlatform(
        channels=channels,
        videos=videos,
        ground_truth=truth,
        homophily=1.0,
        base_rate=0.0,
        seed=42,
        video_dates=dates,
        comments_disabled=frozenset({"b4"}),
    )
