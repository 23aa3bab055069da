"""Splitting, training with early stopping, metrics and frequency baselines."""

from __future__ import annotations

import csv
import logging
import time
from collections import Counter
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from celetrip.corpus import Corpus, TripInstance, group_instances, select_articles
from celetrip.extract_geo import LocationMention
from celetrip.model import CeleTrip
from celetrip.synth import PinnedTrip, SynthData, synth_generate  # noqa: F401  re-exported
from celetrip.tensor import AdamState, NonFiniteError, adam_step

log = logging.getLogger(__name__)

DEFAULT_SPLIT_DATE = date(2019, 7, 1)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fp: int
    tn: int
    fn: int

    @classmethod
    def from_predictions(cls, predicted: Iterable[int], labels: Iterable[int]) -> "EvalReport":
        tp = fp = tn = fn = 0
        for p, y in zip(predicted, labels, strict=True):
            if p and y:
                tp += 1
            elif p:
                fp += 1
            elif y:
                fn += 1
            else:
                tn += 1
        return cls(tp, fp, tn, fn)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    # All metrics are percentages; each is one correctly rounded division.
    @property
    def precision(self) -> float:
        return 100.0 * self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return 100.0 * self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        denom = 2 * self.tp + self.fp + self.fn
        return 200.0 * self.tp / denom if self.tp else 0.0

    @property
    def accuracy(self) -> float:
        return 100.0 * (self.tp + self.tn) / self.total if self.total else 0.0

    def to_dict(self) -> dict:
        return {"precision": round(self.precision, 4), "recall": round(self.recall, 4),
                "f1": round(self.f1, 4), "accuracy": round(self.accuracy, 4),
                "tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


# ---------------------------------------------------------------- splitting

Key = tuple[str, date]


def split_dataset(instances: Sequence[TripInstance], split_date: date = DEFAULT_SPLIT_DATE,
                  val_frac: float = 0.1, seed: int = 0):
    """Date split into (train, val, test) instance lists.

    Test holds every instance dated on or after ``split_date``.  Validation
    is a seeded sample of whole (celebrity, date) groups from the rest, so
    the candidates of one pair never straddle train and validation.
    """
    groups = group_instances(instances)
    before = [k for k in groups if k[1] < split_date]
    after = [k for k in groups if k[1] >= split_date]
    if not before or not after:
        raise ValueError(f"split at {split_date} leaves an empty side "
                         f"({len(before)} groups before, {len(after)} after)")
    rng = np.random.default_rng(seed)
    n_val = int(round(val_frac * len(before)))
    if val_frac > 0 and len(before) > 1:
        n_val = min(max(n_val, 1), len(before) - 1)
    order = rng.permutation(len(before))
    val_keys = {before[i] for i in order[:n_val]}
    train = [i for k in before if k not in val_keys for i in groups[k]]
    val = [i for k in before if k in val_keys for i in groups[k]]
    test = [i for k in after for i in groups[k]]
    return train, val, test


def label_counts(instances: Iterable[TripInstance]) -> tuple[int, int]:
    c = Counter(i.label for i in instances)
    return c[1], c[0]


# ---------------------------------------------------------------- training

@dataclass
class TrainConfig:
    lr: float = 1e-3
    epochs: int = 200
    patience: int = 10
    seed: int = 0
    threshold: float = 0.5
    pos_weight: float = 1.0


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_f1: float
    val_loss: float
    val_f1: float


@dataclass
class TrainResult:
    model: CeleTrip
    optimizer: AdamState
    best_epoch: int
    history: list[EpochRecord] = field(default_factory=list)


def _flatten(samples, probs_list, threshold):
    preds, labels = [], []
    for s, p in zip(samples, probs_list):
        preds.extend(int(x >= threshold) for x in p)
        labels.extend(int(y) for y in s.labels)
    return EvalReport.from_predictions(preds, labels)


def _sample_loss(model: CeleTrip, sample, pos_weight: float):
    try:
        return model.loss(sample, pos_weight)
    except NonFiniteError as exc:
        raise TrainingError(f"non-finite value on ({sample.celebrity}, {sample.date}): {exc}") from exc


def validation_pass(model: CeleTrip, samples: Sequence, cfg: TrainConfig) -> tuple[float, EvalReport]:
    losses, probs = [], []
    for s in samples:
        loss, p = _sample_loss(model, s, cfg.pos_weight)
        losses.append(loss.item())
        probs.append(p.value[:, 0])
    return float(np.mean(losses)) if losses else 0.0, _flatten(samples, probs, cfg.threshold)


def train(model: CeleTrip, train_samples: Sequence, val_samples: Sequence, cfg: TrainConfig,
          log_path: str | Path | None = None,
          on_epoch: Callable[[EpochRecord], None] | None = None) -> TrainResult:
    """Adam, one Trip Graph per step, early stopping on validation F1.

    Ties in validation F1 go to the epoch with the lower validation loss.
    The model is left holding the best parameters.  ``patience`` counts
    epochs without improvement; ``patience=0`` runs exactly one epoch.
    """
    if not train_samples:
        raise TrainingError("empty training set")
    for s in train_samples:
        if s.labels is None:
            raise TrainingError(f"unlabelled training sample ({s.celebrity}, {s.date})")
    rng = np.random.default_rng(cfg.seed)
    opt = AdamState(lr=cfg.lr)
    values = {k: p.value for k, p in model.params.items()}
    best = (-1.0, float("-inf"))
    best_state, best_opt, best_epoch, since = None, None, 0, 0
    history: list[EpochRecord] = []
    writer = None
    fh = None
    if log_path is not None:
        fh = open(log_path, "w", newline="", encoding="utf-8")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "train_loss", "train_f1", "val_loss", "val_f1"])
    try:
        for epoch in range(1, cfg.epochs + 1):
            t0 = time.perf_counter()
            order = rng.permutation(len(train_samples))
            losses, probs = [], []
            for i in order:
                s = train_samples[i]
                for p in model.params.values():
                    p.grad = None
                loss, pr = _sample_loss(model, s, cfg.pos_weight)
                loss.backward()
                grads = {k: p.grad for k, p in model.params.items()}
                for k, g in grads.items():
                    if g is not None and not np.all(np.isfinite(g)):
                        raise TrainingError(f"non-finite gradient for {k} on ({s.celebrity}, {s.date})")
                adam_step(values, grads, opt)
                losses.append(loss.item())
                probs.append(pr.value[:, 0])
            ordered = [train_samples[i] for i in order]
            train_report = _flatten(ordered, probs, cfg.threshold)
            if val_samples:
                val_loss, val_report = validation_pass(model, val_samples, cfg)
            else:
                val_loss, val_report = float(np.mean(losses)), train_report
            rec = EpochRecord(epoch, float(np.mean(losses)), train_report.f1, val_loss, val_report.f1)
            history.append(rec)
            if writer is not None:
                writer.writerow([epoch, f"{rec.train_loss:.6f}", f"{rec.train_f1:.4f}",
                                 f"{rec.val_loss:.6f}", f"{rec.val_f1:.4f}"])
                fh.flush()
            log.info("epoch %d loss %.4f train F1 %.2f val F1 %.2f (%.1fs)", epoch, rec.train_loss,
                     rec.train_f1, rec.val_f1, time.perf_counter() - t0)
            if on_epoch is not None:
                on_epoch(rec)
            score = (rec.val_f1, -rec.val_loss)
            if score > best:
                best, best_epoch, since = score, epoch, 0
                best_state = model.state_dict()
                best_opt = _copy_state(opt)
            else:
                since += 1
            if since >= cfg.patience:
                break
    finally:
        if fh is not None:
            fh.close()
    model.load_state_dict(best_state)
    return TrainResult(model, best_opt, best_epoch, history)


def _copy_state(s: AdamState) -> AdamState:
    return AdamState(s.lr, s.beta1, s.beta2, s.eps, s.step,
                     {k: v.copy() for k, v in s.m.items()}, {k: v.copy() for k, v in s.v.items()})


# ---------------------------------------------------------------- evaluation

@dataclass(frozen=True)
class Prediction:
    celebrity: str
    date: date
    location: str
    probability: float
    predicted: int
    label: int | None


def predict_samples(model: CeleTrip, samples: Sequence, threshold: float = 0.5) -> list[Prediction]:
    out = []
    for s in samples:
        probs = model.predict(s)
        labels = s.labels if s.labels is not None else [None] * len(s.locations)
        for loc, p, y in zip(s.locations, probs, labels):
            out.append(Prediction(s.celebrity, s.date, loc, float(p), int(p >= threshold),
                                  None if y is None else int(y)))
    return out


def evaluate(model: CeleTrip, samples: Sequence, threshold: float = 0.5) -> tuple[EvalReport, list[Prediction]]:
    """Threshold the visit probabilities and score them against the labels."""
    if not samples:
        raise ValueError("empty test set")
    preds = predict_samples(model, samples, threshold)
    if any(p.label is None for p in preds):
        raise ValueError("evaluation needs labelled samples")
    return EvalReport.from_predictions([p.predicted for p in preds], [p.label for p in preds]), preds


# ---------------------------------------------------------------- baselines

def top1(scores: Mapping[str, float]) -> str:
    """Highest score; ties go to the lexicographically smallest name."""
    if not scores:
        raise ValueError("no candidates to choose from")
    return min(scores, key=lambda loc: (-scores[loc], loc))


def _top1_predictions(scores: Mapping[Key, Mapping[str, float]]) -> dict[Key, dict[str, int]]:
    out = {}
    for key, s in scores.items():
        best = top1(s)
        out[key] = {loc: int(loc == best) for loc in s}
    return out


def locfre_scores(instances: Sequence[TripInstance],
                  mentions: Mapping[str, Sequence[LocationMention]]) -> dict[Key, dict[str, float]]:
    """Per (celebrity, date): how often each candidate is mentioned across A_{c,d}."""
    out: dict[Key, dict[str, float]] = {}
    for key, group in group_instances(instances).items():
        pool = list(dict.fromkeys(a for inst in group for a in inst.article_ids))
        counts = Counter(m.canonical for a in pool for m in mentions.get(a, ()))
        out[key] = {inst.location: float(counts[inst.location]) for inst in group}
    return out


def baseline_locfre(scores: Mapping[Key, Mapping[str, float]]) -> dict[Key, dict[str, int]]:
    """The most frequently mentioned candidate of each pair is its only positive."""
    return _top1_predictions(scores)


def jaccard(a: set, b: set) -> float:
    union = a | b
    return len(a & b) / len(union) if union else 0.0


def locjaccard_scores(instances: Sequence[TripInstance], corpus: Corpus,
                      article_locations: Mapping[str, Sequence[str]]) -> dict[Key, dict[str, float]]:
    """Jaccard overlap of articles naming the candidate and articles naming the celebrity.

    Both sets are drawn from the articles dated ``d`` (published or mentioned).
    """
    out: dict[Key, dict[str, float]] = {}
    for (celeb, d), group in group_instances(instances).items():
        day = corpus.by_date(d)
        a_c = set(select_articles(corpus, celeb, d))
        out[(celeb, d)] = {
            inst.location: jaccard({a for a in day if inst.location in article_locations.get(a, ())}, a_c)
            for inst in group
        }
    return out


def baseline_locjaccard(scores: Mapping[Key, Mapping[str, float]]) -> dict[Key, dict[str, int]]:
    return _top1_predictions(scores)


def baseline_report(predictions: Mapping[Key, Mapping[str, int]],
                    instances: Sequence[TripInstance]) -> EvalReport:
    preds, labels = [], []
    for inst in instances:
        preds.append(predictions[(inst.celebrity, inst.date)][inst.location])
        labels.append(inst.label)
    return EvalReport.from_predictions(preds, labels)
