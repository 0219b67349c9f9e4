"""Supervised linear text classifier: bag-of-words + bag-of-n-grams,
embedding projection, softmax head, trained with plain SGD.

The conceptual feature space is ``|words| + B`` ids: dense word indices
followed by B hashed n-gram buckets. A document is the multiset of its
feature ids; its representation is the mean of the corresponding embedding
rows. Embedding rows start at zero and only rows actually touched during
training are materialized, which is exactly equivalent to the full
``(|words| + B) x d`` zero-initialized matrix while keeping memory
proportional to the corpus.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateTrainingError

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_NGRAM_SEP = b"\x1f"


def tokenize(text: str) -> list[str]:
    """Lowercased NFC tokens, split on non-alphanumeric runs. Digits kept."""
    text = unicodedata.normalize("NFC", text).lower()
    return _TOKEN_RE.findall(text)


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


@dataclass(frozen=True)
class TextHyper:
    dim: int = 16
    ngram: int = 2
    buckets: int = 2**20
    lr: float = 0.1
    epochs: int = 25
    min_count: int = 2
    seed: int = 0


@dataclass(frozen=True)
class Vocabulary:
    words: tuple[str, ...]
    buckets: int
    min_count: int
    index: dict[str, int] = field(compare=False, default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "index", {w: i for i, w in enumerate(self.words)})

    @property
    def size(self) -> int:
        return len(self.words) + self.buckets


def build_vocabulary(token_lists: list[list[str]], min_count: int, buckets: int) -> Vocabulary:
    counts: dict[str, int] = {}
    for tokens in token_lists:
        for tok in tokens:
            counts[tok] = counts.get(tok, 0) + 1
    words = tuple(sorted(w for w, c in counts.items() if c >= min_count))
    return Vocabulary(words=words, buckets=buckets, min_count=min_count)


def featurize(tokens: list[str], vocab: Vocabulary, ngram: int) -> list[int]:
    """Feature ids for a token list: in-vocabulary word indices plus hashed
    n-gram bucket ids (offset past the word block). Out-of-vocabulary single
    words are dropped; n-grams are hashed whether or not their words are known.
    """
    ids = [vocab.index[tok] for tok in tokens if tok in vocab.index]
    if ngram >= 2:
        offset = len(vocab.words)
        for i in range(len(tokens) - ngram + 1):
            key = _NGRAM_SEP.join(t.encode("utf-8") for t in tokens[i : i + ngram])
            ids.append(offset + fnv1a64(key) % vocab.buckets)
    return ids


@dataclass
class TextModel:
    vocab: Vocabulary
    hyper: TextHyper
    # Compact embedding: feature id -> row of `embedding`; untouched ids are zero rows.
    row_index: dict[int, int]
    embedding: np.ndarray  # (n_observed_ids, dim)
    head: np.ndarray  # (2, dim)
    bias: np.ndarray  # (2,)
    epoch_losses: tuple[float, ...] = ()

    def doc_vector(self, ids: list[int]) -> np.ndarray:
        """Mean embedding over feature ids; the zero vector when none are given."""
        h = np.zeros(self.hyper.dim)
        if not ids:
            return h
        for fid in ids:
            row = self.row_index.get(fid)
            if row is not None:
                h += self.embedding[row]
        return h / len(ids)


def _softmax2(z: np.ndarray) -> np.ndarray:
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def predict_ids(model: TextModel, ids: list[int]) -> float:
    p = _softmax2(model.head @ model.doc_vector(ids) + model.bias)
    return float(p[1])


def predict_proba(model: TextModel, text: str) -> float:
    """Probability that the text belongs to the positive class.

    Class probabilities sum to one by softmax; an empty or all-unknown
    document scores from the bias alone.
    """
    return predict_ids(model, featurize(tokenize(text), model.vocab, model.hyper.ngram))


def train_text_classifier(
    examples: list[tuple[str, int]],
    hyper: TextHyper = TextHyper(),
    track_loss: bool = False,
) -> TextModel:
    """Fit the classifier by SGD on cross-entropy.

    Deterministic given ``hyper.seed``: examples are brought to a canonical
    order before the seed-derived per-epoch shuffle, so permuting the input
    yields an identical model. The learning rate decays linearly to zero over
    all steps. With ``track_loss`` the mean corpus loss is evaluated after
    each epoch and kept on the model.
    """
    if not examples:
        raise DegenerateTrainingError("no training examples")
    labels = {label for _, label in examples}
    if labels - {0, 1}:
        raise DegenerateTrainingError(f"labels must be 0 or 1, got {sorted(labels)}")
    if len(labels) < 2:
        raise DegenerateTrainingError("need at least one example per class")

    ordered = sorted(examples, key=lambda ex: (ex[0], ex[1]))
    token_lists = [tokenize(text) for text, _ in ordered]
    vocab = build_vocabulary(token_lists, hyper.min_count, hyper.buckets)
    featurized = [featurize(toks, vocab, hyper.ngram) for toks in token_lists]
    ys = [label for _, label in ordered]

    observed = sorted({fid for ids in featurized for fid in ids})
    row_index = {fid: row for row, fid in enumerate(observed)}
    id_rows = [np.array([row_index[f] for f in ids], dtype=np.intp) for ids in featurized]

    rng = np.random.default_rng(hyper.seed)
    embedding = np.zeros((len(observed), hyper.dim))
    head = rng.normal(0.0, 1.0 / np.sqrt(hyper.dim), size=(2, hyper.dim))
    bias = np.zeros(2)

    n = len(ordered)
    total_steps = hyper.epochs * n
    step = 0
    epoch_losses: list[float] = []
    for _ in range(hyper.epochs):
        for i in rng.permutation(n):
            rows, y = id_rows[i], ys[i]
            lr = hyper.lr * (1.0 - step / total_steps)
            step += 1
            if rows.size:
                h = embedding[rows].mean(axis=0)
            else:
                h = np.zeros(hyper.dim)
            p = _softmax2(head @ h + bias)
            dz = p.copy()
            dz[y] -= 1.0
            dh = head.T @ dz
            head -= lr * np.outer(dz, h)
            bias -= lr * dz
            if rows.size:
                np.add.at(embedding, rows, -lr / rows.size * dh)
        if track_loss:
            model = TextModel(vocab, hyper, row_index, embedding, head, bias)
            losses = [
                -np.log(max(_p if y == 1 else 1.0 - _p, 1e-300))
                for (_p, y) in ((predict_ids(model, ids), y) for ids, y in zip(featurized, ys))
            ]
            epoch_losses.append(float(np.mean(losses)))

    return TextModel(
        vocab=vocab,
        hyper=hyper,
        row_index=row_index,
        embedding=embedding,
        head=head,
        bias=bias,
        epoch_losses=tuple(epoch_losses),
    )


def loss_and_grads(model: TextModel, examples: list[tuple[str, int]]):
    """Mean cross-entropy over ``examples`` with analytic gradients.

    Returns ``(loss, d_embedding, d_head, d_bias)`` where ``d_embedding``
    aligns with ``model.embedding`` rows. Shares the forward conventions of
    training, so finite differences of this loss check the training gradients.
    """
    d_emb = np.zeros_like(model.embedding)
    d_head = np.zeros_like(model.head)
    d_bias = np.zeros_like(model.bias)
    total = 0.0
    n = len(examples)
    for text, y in examples:
        ids = featurize(tokenize(text), model.vocab, model.hyper.ngram)
        rows = np.array([model.row_index[f] for f in ids if f in model.row_index], dtype=np.intp)
        denom = max(len(ids), 1)
        h = model.embedding[rows].sum(axis=0) / denom if rows.size else np.zeros(model.hyper.dim)
        p = _softmax2(model.head @ h + model.bias)
        total += -np.log(max(p[y], 1e-300))
        dz = p.copy()
        dz[y] -= 1.0
        d_head += np.outer(dz, h) / n
        d_bias += dz / n
        if rows.size:
            np.add.at(d_emb, rows, (model.head.T @ dz) / (denom * n))
    return total / n, d_emb, d_head, d_bias
