"""The video-level conspiracy classifier: four per-modality scoring modules
stacked under a logistic layer.

Modules score the transcript, the snippet (title + description + tags), the
comment texts (median of per-comment scores), and a 35-D summary of the
comment attribute vectors. Module scores are standardized to zero mean and
unit variance, so a missing modality contributes exactly zero to the stacked
logit. Training repeats a 60/40 split: the 60% side fits the four modules,
the 40% side is scored, standardized and used to fit the stacking logistic;
the stacking coefficients reported are the element-wise mean over all
repetitions.
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .corpus import LabeledExample, VideoRecord
from .errors import DegenerateTrainingError, UnclassifiableVideoError
from .textmodel import TextHyper, TextModel, predict_proba, train_text_classifier

MODULE_NAMES = ("transcript", "snippet", "comments", "attributes")

_SPLIT_RETRIES = 1000


# ---------------------------------------------------------------------------
# Module-level scoring
# ---------------------------------------------------------------------------


def score_comments(model: TextModel, comments: Sequence) -> Optional[float]:
    """Median per-comment score; the even-count median is the mean of the two
    middle values. None marks the modality absent (no comments)."""
    if not comments:
        return None
    scores = [predict_proba(model, c.text) for c in comments]
    return float(np.median(scores))


def attribute_features(vectors: Sequence[Sequence[float]]) -> Optional[np.ndarray]:
    """35-D summary of per-comment attribute vectors.

    Layout: the 7 per-attribute medians, then the 7 population standard
    deviations, then the 21 medians of per-comment pairwise products in
    (i < j) attribute order. None when no comment was scored.
    """
    rows = [np.asarray(v, dtype=float) for v in vectors if v is not None]
    if not rows:
        return None
    V = np.vstack(rows)
    if V.shape[1] != 7:
        raise ValueError(f"attribute vectors must have 7 entries, got {V.shape[1]}")
    medians = np.median(V, axis=0)
    stds = np.std(V, axis=0)
    products = [np.median(V[:, i] * V[:, j]) for i in range(7) for j in range(i + 1, 7)]
    return np.concatenate([medians, stds, np.array(products)])


@dataclass(frozen=True)
class ModuleScores:
    transcript: Optional[float]
    snippet: Optional[float]
    comments: Optional[float]
    attributes: Optional[float]

    def as_tuple(self) -> tuple[Optional[float], ...]:
        return (self.transcript, self.snippet, self.comments, self.attributes)

    def availability(self) -> tuple[bool, bool, bool, bool]:
        return tuple(s is not None for s in self.as_tuple())


# ---------------------------------------------------------------------------
# Logistic regression (used by the attribute head and the stacking layer)
# ---------------------------------------------------------------------------


def logistic_loss_and_grad(
    w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float
):
    """Mean logistic loss with an L2 penalty on the weights (not the bias),
    plus its analytic gradient. Labels are 0/1."""
    s = 2.0 * y - 1.0  # {-1, +1}
    z = X @ w + b
    loss = float(np.mean(np.logaddexp(0.0, -s * z))) + 0.5 * l2 * float(w @ w)
    r = -s / (1.0 + np.exp(s * z))  # d loss_i / d z_i
    gw = X.T @ r / len(y) + l2 * w
    gb = float(np.mean(r))
    return loss, gw, gb


def train_logistic(
    features: Sequence[Sequence[float]],
    labels: Sequence[int],
    l2: float = 1e-3,
    tol: float = 1e-6,
    max_iter: int = 200_000,
) -> tuple[np.ndarray, float]:
    """Fit L2-regularized logistic regression by gradient descent.

    Backtracking line search with step growth; iterates until the gradient
    norm falls below ``tol``. Deterministic (zero start, no randomness).
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("features must be a matrix aligned with labels")
    if not np.isfinite(X).all():
        raise ValueError("features must be finite")
    if set(np.unique(y)) - {0.0, 1.0}:
        raise ValueError("labels must be 0 or 1")
    if len(set(y.tolist())) < 2:
        raise DegenerateTrainingError("need both classes to fit a logistic model")

    w = np.zeros(X.shape[1])
    b = 0.0
    step = 1.0
    loss, gw, gb = logistic_loss_and_grad(w, b, X, y, l2)
    for _ in range(max_iter):
        gnorm_sq = float(gw @ gw) + gb * gb
        if np.sqrt(gnorm_sq) < tol:
            break
        while True:
            w_new = w - step * gw
            b_new = b - step * gb
            loss_new, gw_new, gb_new = logistic_loss_and_grad(w_new, b_new, X, y, l2)
            if loss_new <= loss - 1e-4 * step * gnorm_sq:
                break
            step *= 0.5
            if step < 1e-18:
                raise ArithmeticError("line search stalled before reaching tolerance")
        w, b, loss, gw, gb = w_new, b_new, loss_new, gw_new, gb_new
        step *= 2.0
    else:
        raise ArithmeticError(f"gradient descent did not reach tolerance {tol}")
    return w, b


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + np.exp(-z))
    e = np.exp(z)
    return e / (1.0 + e)


# ---------------------------------------------------------------------------
# First layer and the trained ensemble
# ---------------------------------------------------------------------------


@dataclass
class FirstLayer:
    transcript_model: Optional[TextModel]
    snippet_model: Optional[TextModel]
    comments_model: Optional[TextModel]
    attribute_head: Optional[tuple[np.ndarray, float]]

    def score(self, video: VideoRecord) -> ModuleScores:
        transcript = None
        if self.transcript_model is not None and video.transcript is not None:
            transcript = predict_proba(self.transcript_model, video.transcript)
        snippet = None
        if self.snippet_model is not None:
            snippet = predict_proba(self.snippet_model, video.snippet())
        comments = None
        if self.comments_model is not None:
            comments = score_comments(self.comments_model, video.comments)
        attributes = None
        if self.attribute_head is not None:
            feats = attribute_features([c.attribute_scores for c in video.comments])
            if feats is not None:
                coef, bias = self.attribute_head
                attributes = _sigmoid(float(feats @ coef) + bias)
        return ModuleScores(transcript, snippet, comments, attributes)


@dataclass(frozen=True)
class StandardizationStats:
    """Per-module score mean and population standard deviation; None for a
    module that never produced scores during training."""

    stats: tuple[Optional[tuple[float, float]], ...]  # aligned with MODULE_NAMES

    def __post_init__(self):
        for entry in self.stats:
            if entry is not None and entry[1] <= 0:
                raise ValueError("standardization std must be positive")

    def standardize(self, scores: ModuleScores) -> np.ndarray:
        out = np.zeros(len(MODULE_NAMES))
        for i, value in enumerate(scores.as_tuple()):
            if value is not None and self.stats[i] is not None:
                mean, std = self.stats[i]
                out[i] = (value - mean) / std
        return out


@dataclass
class TrainedEnsemble:
    first_layer: FirstLayer
    stats: StandardizationStats
    stacking_coef: np.ndarray  # (4,), aligned with MODULE_NAMES
    stacking_bias: float
    seed: int
    repeats: int
    split: float
    trained_date: dt.date
    n_examples: int

    def relative_weights(self) -> dict[str, float]:
        """Percent share of each module in the stacking layer, by absolute
        coefficient on the standardized features. Sums to 100."""
        total = float(np.abs(self.stacking_coef).sum())
        if total == 0:
            raise DegenerateTrainingError("all stacking coefficients are zero")
        return {
            name: 100.0 * abs(float(c)) / total
            for name, c in zip(MODULE_NAMES, self.stacking_coef)
        }


def classify_video(ensemble: TrainedEnsemble, video: VideoRecord) -> float:
    """Conspiracy likelihood in [0, 1] for one video.

    Missing modalities contribute exactly zero after standardization. A video
    with all four modalities absent cannot be classified at all.
    """
    scores = ensemble.first_layer.score(video)
    if not any(scores.availability()):
        raise UnclassifiableVideoError(video.video_id)
    z = ensemble.stats.standardize(scores)
    return _sigmoid(float(z @ ensemble.stacking_coef) + ensemble.stacking_bias)


# ---------------------------------------------------------------------------
# The repeated-split training protocol
# ---------------------------------------------------------------------------


def _train_first_layer(
    examples: Sequence[LabeledExample], hyper: TextHyper, seed: int
) -> FirstLayer:
    """Fit the four modules on one training side. A module whose training
    slice is single-class or empty is disabled for this layer."""

    def text_model(pairs: list[tuple[str, int]], module_seed: int) -> Optional[TextModel]:
        try:
            return train_text_classifier(pairs, replace(hyper, seed=module_seed))
        except DegenerateTrainingError:
            return None

    transcript_pairs = [
        (ex.video.transcript, ex.label) for ex in examples if ex.video.transcript is not None
    ]
    snippet_pairs = [(ex.video.snippet(), ex.label) for ex in examples]
    comment_pairs = [
        (comment.text, ex.label) for ex in examples for comment in ex.video.comments
    ]

    attr_rows = []
    attr_labels = []
    for ex in examples:
        feats = attribute_features([c.attribute_scores for c in ex.video.comments])
        if feats is not None:
            attr_rows.append(feats)
            attr_labels.append(ex.label)
    attribute_head = None
    if attr_rows and len(set(attr_labels)) == 2:
        try:
            attribute_head = train_logistic(np.vstack(attr_rows), attr_labels)
        except DegenerateTrainingError:
            attribute_head = None

    return FirstLayer(
        transcript_model=text_model(transcript_pairs, seed * 4 + 0),
        snippet_model=text_model(snippet_pairs, seed * 4 + 1),
        comments_model=text_model(comment_pairs, seed * 4 + 2),
        attribute_head=attribute_head,
    )


def _split_indices(
    rng: np.random.Generator, labels: np.ndarray, split: float
) -> tuple[np.ndarray, np.ndarray]:
    n = len(labels)
    n_train = int(round(split * n))
    if n_train < 1 or n_train >= n:
        raise DegenerateTrainingError(f"split {split} leaves an empty side for n={n}")
    for _ in range(_SPLIT_RETRIES):
        perm = rng.permutation(n)
        train, held = perm[:n_train], perm[n_train:]
        if len(set(labels[train].tolist())) == 2 and len(set(labels[held].tolist())) == 2:
            return train, held
    raise DegenerateTrainingError("could not draw a split with both classes on both sides")


def train_ensemble(
    labeled: Sequence[LabeledExample],
    repeats: int = 100,
    split: float = 0.6,
    seed: int = 0,
    text_hyper: TextHyper = TextHyper(),
    l2: float = 1e-3,
) -> TrainedEnsemble:
    """Run the repeated-split protocol and average the stacking models.

    Per repetition: fit the first layer on the ``split`` side, score the
    held-out side, standardize those scores (stats from the held-out side),
    and fit the stacking logistic on them. The final stacking coefficients
    and standardization stats are means over repetitions; the shipped first
    layer is retrained once on the full labeled set.
    """
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    if not 0.0 < split < 1.0:
        raise ValueError("split must lie in (0, 1)")
    labels = np.array([ex.label for ex in labeled])
    if len(labeled) == 0 or min(
        int((labels == 0).sum()), int((labels == 1).sum())
    ) < 10:
        raise DegenerateTrainingError("need at least 10 examples per class")

    coef_sum = np.zeros(len(MODULE_NAMES))
    bias_sum = 0.0
    stat_sums = [[0.0, 0.0, 0] for _ in MODULE_NAMES]  # mean sum, std sum, count

    for rep in range(repeats):
        rng = np.random.default_rng([seed, rep])
        train_idx, held_idx = _split_indices(rng, labels, split)
        layer = _train_first_layer(
            [labeled[i] for i in train_idx], text_hyper, seed=seed * repeats + rep
        )
        held_scores = [layer.score(labeled[i].video) for i in held_idx]
        held_labels = labels[held_idx]

        rep_stats: list[Optional[tuple[float, float]]] = []
        for m in range(len(MODULE_NAMES)):
            values = [s.as_tuple()[m] for s in held_scores if s.as_tuple()[m] is not None]
            if len(values) >= 2 and float(np.std(values)) > 0:
                rep_stats.append((float(np.mean(values)), float(np.std(values))))
            else:
                rep_stats.append(None)
        stats = StandardizationStats(stats=tuple(rep_stats))

        Z = np.vstack([stats.standardize(s) for s in held_scores])
        coef, bias = train_logistic(Z, held_labels, l2=l2)
        coef_sum += coef
        bias_sum += bias
        for m, entry in enumerate(rep_stats):
            if entry is not None:
                stat_sums[m][0] += entry[0]
                stat_sums[m][1] += entry[1]
                stat_sums[m][2] += 1

    final_stats = tuple(
        (s[0] / s[2], s[1] / s[2]) if s[2] else None for s in stat_sums
    )
    final_layer = _train_first_layer(labeled, text_hyper, seed=seed * repeats + repeats)
    return TrainedEnsemble(
        first_layer=final_layer,
        stats=StandardizationStats(stats=final_stats),
        stacking_coef=coef_sum / repeats,
        stacking_bias=bias_sum / repeats,
        seed=seed,
        repeats=repeats,
        split=split,
        trained_date=dt.date.today(),
        n_examples=len(labeled),
    )


# ---------------------------------------------------------------------------
# Accuracy reporting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PrecisionRecall:
    precision: Optional[float]  # None when nothing was predicted positive
    recall: float
    f1: Optional[float]
    threshold: float
    tp: int
    fp: int
    fn: int
    tn: int


def precision_recall(
    predictions: Sequence[float], labels: Sequence[int], threshold: float = 0.5
) -> PrecisionRecall:
    """Precision, recall and F1 at a threshold. Precision is reported as
    undefined (None), not zero, when no prediction exceeds the threshold."""
    if len(predictions) != len(labels) or not predictions:
        raise ValueError("predictions and labels must be non-empty and aligned")
    if len(set(labels)) < 2:
        raise ValueError("both classes must be present")
    tp = fp = fn = tn = 0
    for p, y in zip(predictions, labels):
        positive = p > threshold
        if positive and y == 1:
            tp += 1
        elif positive and y == 0:
            fp += 1
        elif not positive and y == 1:
            fn += 1
        else:
            tn += 1
    precision = tp / (tp + fp) if (tp + fp) > 0 else None
    recall = tp / (tp + fn)
    f1 = None
    if precision is not None and precision + recall > 0:
        f1 = 2.0 * precision * recall / (precision + recall)
    return PrecisionRecall(
        precision=precision, recall=recall, f1=f1, threshold=threshold,
        tp=tp, fp=fp, fn=fn, tn=tn,
    )
