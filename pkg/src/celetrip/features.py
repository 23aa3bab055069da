"""Word vectors (CBOW with negative sampling), TF-IDF article features, sentence vectors."""

from __future__ import annotations

import json
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class FeatureError(ValueError):
    pass


@dataclass
class WordVectors:
    vocabulary: dict[str, int]
    matrix: np.ndarray
    losses: list[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.vocabulary):
            raise FeatureError(f"matrix shape {self.matrix.shape} does not match vocabulary of {len(self.vocabulary)}")
        if not np.all(np.isfinite(self.matrix)):
            raise FeatureError("word vectors contain non-finite values")
        self._zero = np.zeros(self.matrix.shape[1])

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __contains__(self, word: str) -> bool:
        return word in self.vocabulary

    def __len__(self) -> int:
        return len(self.vocabulary)

    def __getitem__(self, word: str) -> np.ndarray:
        """Vector for ``word``; out-of-vocabulary words share the zero vector."""
        idx = self.vocabulary.get(word)
        return self._zero if idx is None else self.matrix[idx]

    def lookup(self, words: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(words), self.dim))
        for i, w in enumerate(words):
            idx = self.vocabulary.get(w)
            if idx is not None:
                out[i] = self.matrix[idx]
        return out

    def cosine(self, a: str, b: str) -> float:
        u, v = self[a], self[b]
        nu, nv = np.linalg.norm(u), np.linalg.norm(v)
        return float(u @ v / (nu * nv)) if nu and nv else 0.0

    def save(self, path: str | Path) -> None:
        """Write the ``count dim`` header followed by ``word v1 ... vD`` rows."""
        words = sorted(self.vocabulary, key=self.vocabulary.__getitem__)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{len(words)} {self.dim}\n")
            for w in words:
                fh.write(w + " " + " ".join(repr(float(x)) for x in self.matrix[self.vocabulary[w]]) + "\n")


def load_word_vectors(path: str | Path) -> WordVectors:
    """Parse the text vector format.  Duplicate words: the last row wins."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise FeatureError("line 1: expected header 'count dim'")
        count, dim = int(header[0]), int(header[1])
        rows: dict[str, np.ndarray] = {}
        for lineno, line in enumerate(fh, 2):
            parts = line.rstrip("\n").split(" ")
            if not parts or not parts[0]:
                continue
            if len(parts) - 1 != dim:
                raise FeatureError(f"line {lineno}: expected {dim} values for {parts[0]!r}, got {len(parts) - 1}")
            if parts[0] in rows:
                warnings.warn(f"line {lineno}: duplicate word {parts[0]!r}; keeping the last occurrence")
                del rows[parts[0]]
            try:
                rows[parts[0]] = np.array([float(x) for x in parts[1:]])
            except ValueError:
                raise FeatureError(f"line {lineno}: non-numeric value") from None
    if len(rows) != count:
        warnings.warn(f"header announces {count} vectors, file holds {len(rows)} distinct words")
    vocab = {w: i for i, w in enumerate(rows)}
    matrix = np.vstack(list(rows.values())) if rows else np.zeros((0, dim))
    return WordVectors(vocab, matrix)


def _stem_sentences(source) -> list[list[str]]:
    out = []
    for item in source:
        if hasattr(item, "sentences"):
            out.extend(item.sentences)
        else:
            out.append(list(item))
    return out


def train_cbow(source, dim: int = 100, window: int = 5, negatives: int = 5, epochs: int = 5,
               seed: int = 0, lr: float = 0.025, min_lr: float = 1e-4, min_count: int = 1,
               batch_size: int = 128) -> WordVectors:
    """Train CBOW word vectors with negative sampling.

    ``source`` is an iterable of articles (their stemmed ``sentences`` are
    used) or of stem lists.  The context of each position is every token
    within ``window`` on either side inside the same sentence; its mean
    input vector predicts the centre word against ``negatives`` noise words
    drawn from the unigram distribution raised to 0.75.  Updates are applied
    in mini-batches with a linearly decaying learning rate; results depend
    only on ``seed``.  Per-epoch mean loss is kept in ``losses``.
    """
    sentences = _stem_sentences(source)
    counts = Counter(w for s in sentences for w in s)
    words = sorted((w for w, c in counts.items() if c >= min_count), key=lambda w: (-counts[w], w))
    if not words:
        raise FeatureError("cannot train word vectors on an empty corpus")
    vocab = {w: i for i, w in enumerate(words)}

    centers, contexts = [], []
    for sent in sentences:
        ids = [vocab[w] for w in sent if w in vocab]
        for i, c in enumerate(ids):
            ctx = ids[max(0, i - window):i] + ids[i + 1:i + 1 + window]
            if ctx:
                centers.append(c)
                contexts.append(ctx + [-1] * (2 * window - len(ctx)))

    rng = np.random.default_rng(seed)
    w_in = (rng.random((len(words), dim)) - 0.5) / dim
    w_out = np.zeros((len(words), dim))
    wv = WordVectors(vocab, w_in)
    if not centers:
        return wv

    centers_arr = np.array(centers)
    ctx_arr = np.array(contexts)
    noise = np.array([counts[w] for w in words], dtype=np.float64) ** 0.75
    noise_cdf = np.cumsum(noise / noise.sum())
    n = len(centers_arr)
    total_batches = epochs * math.ceil(n / batch_size)
    step = 0
    labels = np.zeros(negatives + 1)
    labels[0] = 1.0

    for _ in range(epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch_size):
            alpha = lr - (lr - min_lr) * step / max(1, total_batches - 1)
            step += 1
            b = order[start:start + batch_size]
            ctx = ctx_arr[b]
            mask = ctx >= 0
            cnt = mask.sum(1)
            h = (w_in[np.where(mask, ctx, 0)] * mask[..., None]).sum(1) / cnt[:, None]
            neg = np.searchsorted(noise_cdf, rng.random((len(b), negatives)))
            neg = np.minimum(neg, len(words) - 1)
            targets = np.concatenate([centers_arr[b][:, None], neg], axis=1)
            u = w_out[targets]
            score = np.einsum("bd,bkd->bk", h, u)
            sig = 1.0 / (1.0 + np.exp(-score))
            p = np.clip(np.where(labels > 0, sig, 1.0 - sig), 1e-12, None)
            epoch_loss += float(-np.log(p).sum())
            g = (labels - sig) * alpha
            dh = np.einsum("bk,bkd->bd", g, u)
            np.add.at(w_out, targets, g[..., None] * h[:, None, :])
            rows, cols = np.nonzero(mask)
            np.add.at(w_in, ctx[rows, cols], dh[rows] / cnt[rows, None])
        wv.losses.append(epoch_loss / n)
    wv.matrix = w_in
    return wv


def sentence_vector(sentence: Sequence[str], wv: WordVectors) -> np.ndarray:
    """Mean of the in-vocabulary stem vectors; zero when none is known."""
    idx = [wv.vocabulary[w] for w in sentence if w in wv.vocabulary]
    if not idx:
        return np.zeros(wv.dim)
    return wv.matrix[idx].mean(axis=0)


@dataclass
class TfidfModel:
    vocab: list[str]
    idf: np.ndarray

    def __post_init__(self):
        self.idf = np.asarray(self.idf, dtype=np.float64)
        self.index = {w: i for i, w in enumerate(self.vocab)}

    @property
    def dim(self) -> int:
        return len(self.vocab)

    def transform(self, stems: Sequence[str]) -> np.ndarray:
        vec = np.zeros(len(self.vocab))
        if not stems:
            return vec
        for w, c in Counter(stems).items():
            i = self.index.get(w)
            if i is not None:
                vec[i] = c / len(stems) * self.idf[i]
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0 else vec

    def to_json(self) -> dict:
        return {"vocab": list(self.vocab), "idf": [float(x) for x in self.idf]}

    @classmethod
    def from_json(cls, obj: dict) -> "TfidfModel":
        if len(obj["vocab"]) != len(obj["idf"]):
            raise FeatureError("tf-idf vocab and idf lengths differ")
        return cls(list(obj["vocab"]), np.array(obj["idf"], dtype=np.float64))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TfidfModel":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _doc_stems(doc) -> list[str]:
    if hasattr(doc, "sentences"):
        return [w for s in doc.sentences for w in s]
    return list(doc)


def tfidf_fit(documents: Iterable, max_features: int = 1000) -> TfidfModel:
    """Keep the ``max_features`` stems with the highest document frequency.

    Ties go to the lexicographically smaller stem.  idf = ln((1+N)/(1+df)) + 1.
    """
    docs = [set(_doc_stems(d)) for d in documents]
    df = Counter(w for d in docs for w in d)
    vocab = sorted(df, key=lambda w: (-df[w], w))[:max_features]
    n = len(docs)
    idf = np.array([math.log((1 + n) / (1 + df[w])) + 1.0 for w in vocab])
    return TfidfModel(vocab, idf)


def tfidf_transform(doc, model: TfidfModel) -> np.ndarray:
    """Raw term frequency times idf, L2-normalised; zero vector when nothing is in vocabulary."""
    return model.transform(_doc_stems(doc))
