"""Best-effort HTTP adapter for a real platform API.

Requests are plain GETs with no identifying cookies. Every call has a bounded
timeout and maps failures to typed errors, so the pipeline can skip and keep
going instead of blocking. Endpoint base URL and credentials come from the
environment; retry count and backoff are configuration values.

This adapter is deliberately thin glue: it is excluded from the deterministic
test oracles (the simulator covers those) and unit-tested against a local
HTTP stub.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass

import requests

from .corpus import ATTRIBUTE_NAMES, Comment, VideoRecord, decode_record
from .errors import (
    ChannelNotFoundError,
    ChannelStalledError,
    CommentsDisabledError,
    ConfigError,
    ScorerUnavailableError,
    TransientFetchError,
    VideoNotFoundError,
)

BASE_URL_ENV = "RECAUDIT_API_BASE"
API_KEY_ENV = "RECAUDIT_API_KEY"


@dataclass
class LiveAdapter:
    base_url: str
    api_key: str = ""
    timeout: float = 10.0
    max_retries: int = 2
    backoff: float = 0.5

    supports_comments: bool = True
    supports_transcripts: bool = True

    @classmethod
    def from_env(cls, **overrides) -> "LiveAdapter":
        base = os.environ.get(BASE_URL_ENV, "")
        if not base:
            raise ConfigError(f"{BASE_URL_ENV} is not set")
        return cls(base_url=base, api_key=os.environ.get(API_KEY_ENV, ""), **overrides)

    def _get(self, path: str, params: dict | None = None) -> requests.Response:
        url = self.base_url.rstrip("/") + path
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            try:
                # cookies={} keeps each request cookie-free.
                resp = requests.get(
                    url, params=params, headers=headers, timeout=self.timeout, cookies={}
                )
            except requests.RequestException as exc:
                last_error = exc
            else:
                if resp.status_code < 500:
                    return resp
                last_error = TransientFetchError(f"{url} returned {resp.status_code}")
            if attempt < self.max_retries:
                time.sleep(self.backoff * 2**attempt)
        raise TransientFetchError(f"GET {url} failed after {self.max_retries + 1} attempts: {last_error}")

    def fetch_last_video(self, channel_id: str) -> VideoRecord:
        resp = self._get(f"/channels/{channel_id}/last-video")
        if resp.status_code == 404:
            raise ChannelNotFoundError(channel_id)
        if resp.status_code == 204:
            raise ChannelStalledError(channel_id)
        resp.raise_for_status()
        return decode_record(VideoRecord, resp.json())

    def fetch_video(self, video_id: str) -> VideoRecord:
        resp = self._get(f"/videos/{video_id}")
        if resp.status_code == 404:
            raise VideoNotFoundError(video_id)
        resp.raise_for_status()
        return decode_record(VideoRecord, resp.json())

    def fetch_watch_next(self, video_id: str, k: int) -> list[str]:
        if k < 1:
            raise ValueError("k must be at least 1")
        resp = self._get(f"/videos/{video_id}/watch-next", params={"k": k})
        if resp.status_code == 404:
            raise VideoNotFoundError(video_id)
        resp.raise_for_status()
        ids = resp.json()["video_ids"]
        seen: set[str] = set()
        out = []
        for vid in ids:
            if vid != video_id and vid not in seen:
                out.append(vid)
                seen.add(vid)
        return out[:k]

    def fetch_comments(self, video_id: str, n: int) -> list[Comment]:
        if n < 1:
            raise ValueError("n must be at least 1")
        resp = self._get(f"/videos/{video_id}/comments", params={"n": n})
        if resp.status_code == 404:
            raise VideoNotFoundError(video_id)
        if resp.status_code == 403:
            raise CommentsDisabledError(video_id)
        resp.raise_for_status()
        payload = resp.json()
        if payload.get("disabled"):
            raise CommentsDisabledError(video_id)
        return [decode_record(Comment, c) for c in payload["comments"]][:n]


@dataclass
class HttpAttributeScorer:
    """Adapter for a remote comment-attribute scoring service.

    Degrades to :class:`~recaudit.errors.ScorerUnavailableError` on any
    failure so the caller can mark the modality absent.
    """

    base_url: str
    api_key: str = ""
    timeout: float = 10.0

    attribute_names = ATTRIBUTE_NAMES

    def score(self, comment: Comment) -> tuple[float, ...]:
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = requests.post(
                self.base_url.rstrip("/") + "/score",
                json={"text": comment.text},
                headers=headers,
                timeout=self.timeout,
                cookies={},
            )
            resp.raise_for_status()
            payload = resp.json()
            return tuple(float(payload[name]) for name in ATTRIBUTE_NAMES)
        except (requests.RequestException, KeyError, ValueError) as exc:
            raise ScorerUnavailableError(str(exc)) from exc
