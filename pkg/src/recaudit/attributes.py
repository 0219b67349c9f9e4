"""Comment-attribute scoring: the seven-property scorer abstraction.

The offline stand-in scores each property with a keyword lexicon (capped sum
of matched-token weights), shipped as data files so CI needs no network. A
remote scoring service plugs in through the same interface; see ``live``.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Protocol

from .corpus import ATTRIBUTE_NAMES, Comment
from .textmodel import tokenize


class AttributeScorer(Protocol):
    """Scores one comment on the fixed seven attributes, each in [0, 1]."""

    attribute_names: tuple[str, ...]

    def score(self, comment: Comment) -> tuple[float, ...]: ...


def score_comment_attributes(scorer: AttributeScorer, comment: Comment) -> tuple[float, ...]:
    """Run the scorer and enforce the range contract on its output."""
    if comment.text is None:
        raise ValueError("comment text must not be null")
    scores = tuple(float(s) for s in scorer.score(comment))
    if len(scores) != len(ATTRIBUTE_NAMES):
        raise ValueError(f"scorer returned {len(scores)} values, expected {len(ATTRIBUTE_NAMES)}")
    for name, s in zip(ATTRIBUTE_NAMES, scores):
        if not 0.0 <= s <= 1.0:
            raise ValueError(f"{name} score {s} outside [0, 1]")
    return scores


def _parse_lexicon(text: str) -> dict[str, float]:
    lexicon: dict[str, float] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        token, weight = line.split()
        lexicon[token.lower()] = float(weight)
    return lexicon


class LexiconAttributeScorer:
    """Deterministic offline scorer: per attribute, the capped sum of weights
    of lexicon tokens found in the comment. Empty text scores all zeros."""

    attribute_names = ATTRIBUTE_NAMES

    def __init__(self, lexicons: dict[str, dict[str, float]]):
        missing = set(ATTRIBUTE_NAMES) - set(lexicons)
        if missing:
            raise ValueError(f"missing lexicons for {sorted(missing)}")
        self._lexicons = [lexicons[name] for name in ATTRIBUTE_NAMES]

    @classmethod
    def bundled(cls) -> "LexiconAttributeScorer":
        """Load the lexicon files shipped with the package."""
        root = resources.files("recaudit").joinpath("data/lexicons")
        lexicons = {
            name: _parse_lexicon(root.joinpath(f"{name}.txt").read_text(encoding="utf-8"))
            for name in ATTRIBUTE_NAMES
        }
        return cls(lexicons)

    @classmethod
    def from_directory(cls, directory: str | Path) -> "LexiconAttributeScorer":
        directory = Path(directory)
        lexicons = {
            name: _parse_lexicon((directory / f"{name}.txt").read_text(encoding="utf-8"))
            for name in ATTRIBUTE_NAMES
        }
        return cls(lexicons)

    def score(self, comment: Comment) -> tuple[float, ...]:
        tokens = tokenize(comment.text)
        out = []
        for lexicon in self._lexicons:
            total = sum(lexicon.get(tok, 0.0) for tok in tokens)
            out.append(min(1.0, total))
        return tuple(out)
