"""``celetrip`` command line.

Failures print one line ``error: <code>: <message>`` on stderr and exit 1;
usage mistakes print click's usage text and exit 2.  Logs (with
timestamps) go to stderr only, so stdout and written files are
byte-identical across runs with the same inputs and seed.
"""

from __future__ import annotations

import csv
import functools
import json
import logging
import sys
from dataclasses import replace
from datetime import date
from pathlib import Path

import click

from celetrip import __version__
from celetrip.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from celetrip.config import ConfigError, RunConfig, resolve_config
from celetrip.corpus import (CorpusError, DictionaryTagger, build_trip_instances, load_corpus, load_ground_truth,
                             load_instances, load_lexicon, locate_corpus, write_instances)
from celetrip.extract_geo import GazetteerError, build_gazetteer_index, resolve_containment
from celetrip.extract_time import extract_dates
from celetrip.features import FeatureError, TfidfModel, load_word_vectors, tfidf_fit, train_cbow
from celetrip.graphs import GraphError, load_kb
from celetrip.model import CeleTrip, ModelConfig
from celetrip.pipeline import FeatureContext, build_sample, candidates_for, samples_from_instances
from celetrip.plotting import plot_metrics, plot_probabilities, plot_training_curves
from celetrip.synth import synth_generate
from celetrip.train_eval import (TrainingError, baseline_locfre, baseline_locjaccard, baseline_report, evaluate,
                                 label_counts, locfre_scores, locjaccard_scores, split_dataset, train)

log = logging.getLogger("celetrip")


class CliError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


_ERROR_CODES = [
    (ConfigError, "config"),
    (CheckpointError, "checkpoint"),
    (TrainingError, "training"),
    ((CorpusError, GazetteerError, FeatureError, GraphError), "input"),
    ((FileNotFoundError, IsADirectoryError, PermissionError), "io"),
]


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except CliError as exc:
            _die(ctx, exc.code, str(exc))
        except Exception as exc:
            for types, code in _ERROR_CODES:
                if isinstance(exc, types):
                    _die(ctx, code, str(exc))
            if isinstance(exc, (ValueError, KeyError)) and not isinstance(exc, click.ClickException):
                _die(ctx, "data", str(exc))
            raise


def _die(ctx, code: str, message: str):
    one_line = " ".join(message.strip().split()) or "failed"
    click.echo(f"error: {code}: {one_line}", err=True)
    ctx.exit(1)


def _config(ctx, **flags) -> RunConfig:
    obj = ctx.ensure_object(dict)
    local = obj.get("local", {})
    merged = {k: v for k, v in obj.get("flags", {}).items() if v is not None}
    merged.update({k: v for k, v in local.items() if k != "config" and v is not None})
    merged.update(flags)
    return resolve_config(local.get("config") or obj.get("config"), merged)


def _common(f):
    """``--config``, ``--seed`` and ``--out`` on a subcommand; they override the group-level ones."""
    @click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                  help="key = value configuration file")
    @click.option("--seed", type=int, help="random seed")
    @click.option("--out", help="output file or directory")
    @functools.wraps(f)
    def wrapper(*args, config_path=None, seed=None, out=None, **kwargs):
        ctx = click.get_current_context()
        ctx.ensure_object(dict)["local"] = {"config": config_path, "seed": seed, "out": out}
        return f(*args, **kwargs)
    return wrapper


def _write_json(obj, path: Path | None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is not None:
        path.write_text(text, encoding="utf-8")
    return text


def _outdir(cfg: RunConfig, default: str | None = None) -> Path | None:
    out = cfg.out or default
    if out is None:
        return None
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


@click.group(cls=_Group)
@click.version_option(__version__, prog_name="celetrip")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="key = value configuration file")
@click.option("--seed", type=int, help="random seed")
@click.option("--out", help="output file or directory")
@click.option("-v", "--verbose", is_flag=True, help="log progress to stderr")
@click.pass_context
def cli(ctx, config_path, seed, out, verbose):
    """Detect celebrity visits to places from news articles."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    ctx.ensure_object(dict)
    ctx.obj["config"] = config_path
    ctx.obj["flags"] = {"seed": seed, "out": out}


# ---------------------------------------------------------------- shared loaders

def _corpus(cfg: RunConfig, tag: bool = True):
    cfg.require_paths("corpus")
    corpus = load_corpus(cfg.corpus)
    if tag and cfg.lexicon:
        cfg.require_paths("lexicon")
        DictionaryTagger(load_lexicon(cfg.lexicon)).tag_corpus(corpus)
    return corpus


def _index(cfg: RunConfig):
    cfg.require_paths("gazetteer")
    return build_gazetteer_index(cfg.gazetteer)


def _kb(cfg: RunConfig):
    if not cfg.kb_triples:
        return None
    cfg.require_paths("kb_triples", "kb_entities", "kb_relations")
    if cfg.kb_labels:
        cfg.require_paths("kb_labels")
    return load_kb(cfg.kb_triples, cfg.kb_entities, cfg.kb_relations, cfg.kb_labels)


def _with_checkpoint_resources(cfg: RunConfig, meta: dict) -> RunConfig:
    """Fill unset resource paths from the ones recorded at training time."""
    recorded = meta.get("resources", {})
    updates = {k: v for k, v in recorded.items() if getattr(cfg, k, None) is None and v}
    return replace(cfg, **updates)


def _load_model(path: str):
    ckpt = load_checkpoint(path)
    meta = ckpt.metadata
    if "model_config" not in meta or "tfidf" not in meta:
        raise CheckpointError(f"{path} lacks model metadata")
    model = CeleTrip.from_state(ModelConfig.from_dict(meta["model_config"]), ckpt.params)
    return model, meta


def _context(cfg: RunConfig, corpus, index, tfidf: TfidfModel, meta: dict | None = None) -> FeatureContext:
    cfg.require_paths("word_vectors")
    wv = load_word_vectors(cfg.word_vectors)
    window = meta.get("window", cfg.window) if meta else cfg.window
    q = meta.get("Q", cfg.Q) if meta else cfg.Q
    return FeatureContext(corpus, wv, tfidf, _kb(cfg), index, window, q)


def _select_split(instances, split: str, split_date: date, val_frac: float, seed: int):
    if split == "all":
        return list(instances)
    if split == "test":
        return [i for i in instances if i.date >= split_date]
    train_part, val_part, _ = split_dataset(instances, split_date, val_frac, seed)
    return train_part if split == "train" else val_part


def _report_json(report) -> dict:
    return report.to_dict()


# ---------------------------------------------------------------- commands

@cli.command("generate-synthetic")
@_common
@click.option("--n-days", default=200, show_default=True, type=int)
@click.option("--candidates-per-day", default=5, show_default=True, type=int)
@click.option("--implicit-frac", default=0.2, show_default=True, type=float)
@click.option("--start", default="2018-09-01", show_default=True, help="first day (YYYY-MM-DD)")
@click.pass_context
def generate_synthetic(ctx, n_days, candidates_per_day, implicit_frac, start):
    """Write a planted-trip corpus with ground truth, gazetteer, lexicon and KB."""
    cfg = _config(ctx)
    out = _outdir(cfg)
    if out is None:
        raise CliError("config", "out: required output directory not given")
    try:
        first = date.fromisoformat(start)
    except ValueError:
        raise ConfigError("start", f"cannot parse {start!r}") from None
    explicit = [v for v in (ctx.obj.get("local", {}).get("seed"), ctx.obj["flags"].get("seed")) if v is not None]
    seed = 7 if not explicit else cfg.seed
    data = synth_generate(n_days, candidates_per_day, seed=seed, implicit_frac=implicit_frac, start=first)
    paths = data.write(out)
    click.echo(_write_json({"articles": len(data.corpus), "trips": len(data.ground_truth),
                            "implicit": len(data.implicit),
                            "files": {k: v.name for k, v in sorted(paths.items())}}, None), nl=False)


@cli.command("extract-dates")
@_common
@click.option("--corpus", help="corpus JSONL")
@click.pass_context
def extract_dates_cmd(ctx, corpus):
    """Date expressions per article as JSONL ``{article_id, matches: [{span, kind, date, text}]}``."""
    cfg = _config(ctx, corpus=corpus)
    arts = load_corpus(_require(cfg, "corpus"), annotate=False)
    lines = []
    for art in arts:
        matches = [{"span": list(m.span), "kind": m.kind, "date": m.resolved.isoformat() if m.resolved else None,
                    "text": m.text} for m in extract_dates(art.text, art.publish_date)]
        lines.append({"article_id": art.id, "matches": matches})
    _emit_jsonl(lines, cfg.out)


@cli.command("extract-locations")
@_common
@click.option("--corpus", help="corpus JSONL")
@click.option("--gazetteer", help="gazetteer TSV")
@click.pass_context
def extract_locations_cmd(ctx, corpus, gazetteer):
    """Gazetteer matches per article as JSONL; ``candidates`` survive containment resolution."""
    cfg = _config(ctx, corpus=corpus, gazetteer=gazetteer)
    arts = load_corpus(_require(cfg, "corpus"), annotate=False)
    index = _index(cfg)
    lines = []
    for aid, ms in locate_corpus(arts, index).items():
        mentions = [{"surface": m.surface, "canonical": m.canonical, "id": m.gazetteer_id,
                     "sentence": m.sentence_index, "span": list(m.token_span)} for m in ms]
        lines.append({"article_id": aid, "mentions": mentions, "candidates": resolve_containment(ms, index)})
    _emit_jsonl(lines, cfg.out)


@cli.command("build-dataset")
@_common
@click.option("--corpus")
@click.option("--gazetteer")
@click.option("--ground-truth")
@click.option("--lexicon", help="surface<TAB>TYPE list used to tag untagged articles")
@click.option("--containment", type=click.Choice(["article", "pool"]))
@click.pass_context
def build_dataset_cmd(ctx, corpus, gazetteer, ground_truth, lexicon, containment):
    """Label candidate locations of each ground-truth (celebrity, date) pair."""
    cfg = _config(ctx, corpus=corpus, gazetteer=gazetteer, ground_truth=ground_truth, lexicon=lexicon,
                  containment=containment)
    cfg.require_paths("ground_truth")
    arts = _corpus(cfg)
    index = _index(cfg)
    instances, missed = build_trip_instances(arts, load_ground_truth(cfg.ground_truth), locate_corpus(arts, index),
                                             index, cfg.containment)
    out = Path(cfg.out or "instances.csv")
    write_instances(instances, out)
    with open(out.with_suffix(".missed.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["celebrity", "date", "location"])
        for m in missed:
            w.writerow([m.celebrity, m.date.isoformat(), m.location or ""])
    pos, neg = label_counts(instances)
    click.echo(_write_json({"instances": len(instances), "positive": pos, "negative": neg,
                            "missed": len(missed)}, None), nl=False)


@cli.command("train-embeddings")
@_common
@click.option("--corpus")
@click.option("--dim", "word_dim", type=int, help="vector size")
@click.option("--epochs", "cbow_epochs", type=int, help="passes over the corpus")
@click.pass_context
def train_embeddings_cmd(ctx, corpus, word_dim, cbow_epochs):
    """Train CBOW word vectors on the stemmed corpus."""
    cfg = _config(ctx, corpus=corpus, word_dim=word_dim, cbow_epochs=cbow_epochs)
    arts = load_corpus(_require(cfg, "corpus"), annotate=False)
    wv = train_cbow(arts, dim=cfg.word_dim, epochs=cfg.cbow_epochs, seed=cfg.seed)
    out = Path(cfg.out or "vectors.txt")
    wv.save(out)
    click.echo(_write_json({"words": len(wv), "dim": wv.dim, "final_loss": round(wv.losses[-1], 6)
                            if wv.losses else None}, None), nl=False)


def _resource_options(f):
    for name in reversed(["corpus", "gazetteer", "lexicon", "instances", "word-vectors", "kb-triples",
                          "kb-entities", "kb-relations", "kb-labels"]):
        f = click.option(f"--{name}", name.replace("-", "_"), default=None)(f)
    return f


def _resource_flags(kwargs) -> dict:
    keys = ("corpus", "gazetteer", "lexicon", "instances", "word_vectors", "kb_triples", "kb_entities",
            "kb_relations", "kb_labels")
    return {k: kwargs.pop(k) for k in keys}


@cli.command("train")
@_common
@_resource_options
@click.option("--epochs", type=int)
@click.option("--patience", type=int)
@click.option("--lr", type=float)
@click.option("--epsilon", type=float)
@click.option("--blocks", type=int)
@click.option("--hidden-dim", type=int)
@click.option("--split-date")
@click.option("--no-entity", is_flag=True, default=None, help="replace entity embeddings by projections")
@click.option("--no-event", is_flag=True, default=None, help="replace event embeddings by projections")
@click.option("--no-pooling", is_flag=True, default=None, help="plain max pooling instead of Oriented Pooling")
@click.pass_context
def train_cmd(ctx, epochs, patience, lr, epsilon, blocks, hidden_dim, split_date, no_entity, no_event, no_pooling,
              **kwargs):
    """Train on the pre-split-date instances; writes model.ckpt, train_log.csv and curves.png."""
    flags = _resource_flags(kwargs)
    flags.update(epochs=epochs, patience=patience, lr=lr, epsilon=epsilon, blocks=blocks, hidden_dim=hidden_dim,
                 split_date=split_date,
                 use_entity=None if not no_entity else False, use_event=None if not no_event else False,
                 use_oriented_pooling=None if not no_pooling else False)
    cfg = _config(ctx, **flags)
    cfg.require_paths("instances")
    out = _outdir(cfg, "run")
    arts = _corpus(cfg)
    index = _index(cfg)
    instances = load_instances(cfg.instances)
    train_part, val_part, test_part = split_dataset(instances, cfg.split_date, cfg.val_frac, cfg.seed)
    if not cfg.word_vectors:
        wv = train_cbow(arts, dim=cfg.word_dim, epochs=cfg.cbow_epochs, seed=cfg.seed)
        wv.save(out / "vectors.txt")
        cfg = replace(cfg, word_vectors=str(out / "vectors.txt"))
    tfidf = tfidf_fit(arts, cfg.max_features)
    fctx = _context(cfg, arts, index, tfidf)
    train_s, val_s = samples_from_instances(fctx, train_part), samples_from_instances(fctx, val_part)
    kb_dim = fctx.kb.dim if fctx.kb is not None else 50
    mcfg = cfg.model_config(fctx.wv.dim, tfidf.dim, kb_dim)
    model = CeleTrip(mcfg, seed=cfg.seed)
    result = train(model, train_s, val_s, cfg.train_config(), log_path=out / "train_log.csv")
    resources = {k: str(Path(v).resolve()) for k in ("corpus", "gazetteer", "lexicon", "word_vectors", "kb_triples",
                                                     "kb_entities", "kb_relations", "kb_labels")
                 if (v := getattr(cfg, k))}
    meta = {"model_config": mcfg.to_dict(), "tfidf": tfidf.to_json(), "window": cfg.window, "Q": cfg.Q,
            "threshold": cfg.threshold, "split_date": cfg.split_date.isoformat(), "val_frac": cfg.val_frac,
            "seed": cfg.seed, "containment": cfg.containment, "best_epoch": result.best_epoch,
            "resources": resources}
    save_checkpoint(out / "model.ckpt", model.state_dict(), result.optimizer, meta)
    plot_training_curves(result.history, out / "curves.png")
    last = result.history[-1]
    click.echo(_write_json({"best_epoch": result.best_epoch, "epochs_run": last.epoch,
                            "train_groups": len(train_s), "val_groups": len(val_s),
                            "test_instances": len(test_part),
                            "best_val_f1": round(max(r.val_f1 for r in result.history), 4)}, None), nl=False)


@cli.command("evaluate")
@_common
@click.option("--checkpoint", required=True, type=click.Path(exists=True, dir_okay=False))
@_resource_options
@click.option("--split", type=click.Choice(["test", "val", "train", "all"]), default="test", show_default=True)
@click.pass_context
def evaluate_cmd(ctx, checkpoint, split, **kwargs):
    """Score a checkpoint on labelled instances; writes report.json, predictions.csv and metrics.png."""
    model, meta = _load_model(checkpoint)
    cfg = _with_checkpoint_resources(_config(ctx, **_resource_flags(kwargs)), meta)
    cfg.require_paths("instances")
    instances = _select_split(load_instances(cfg.instances), split, date.fromisoformat(meta["split_date"]),
                              meta.get("val_frac", cfg.val_frac), meta.get("seed", cfg.seed))
    if not instances:
        raise CliError("data", "empty test set")
    arts = _corpus(cfg)
    fctx = _context(cfg, arts, _index(cfg), TfidfModel.from_json(meta["tfidf"]), meta)
    samples = samples_from_instances(fctx, instances)
    if not samples:
        raise CliError("data", "empty test set")
    report, preds = evaluate(model, samples, meta.get("threshold", cfg.threshold))
    out = _outdir(cfg, "eval")
    result = {"split": split, "report": _report_json(report)}
    text = _write_json(result, out / "report.json")
    _write_predictions(preds, out / "predictions.csv")
    plot_metrics({"CeleTrip": report.to_dict()}, out / "metrics.png", f"{split} split")
    click.echo(text, nl=False)


@cli.command("predict")
@_common
@click.option("--checkpoint", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--celebrity", required=True)
@click.option("--date", "day", required=True, help="YYYY-MM-DD")
@_resource_options
@click.pass_context
def predict_cmd(ctx, checkpoint, celebrity, day, **kwargs):
    """Visit probability of every candidate location for one celebrity and date (JSON on stdout)."""
    try:
        d = date.fromisoformat(day)
    except ValueError:
        raise ConfigError("date", f"cannot parse {day!r}") from None
    model, meta = _load_model(checkpoint)
    cfg = _with_checkpoint_resources(_config(ctx, **_resource_flags(kwargs)), meta)
    arts = _corpus(cfg)
    index = _index(cfg)
    fctx = _context(cfg, arts, index, TfidfModel.from_json(meta["tfidf"]), meta)
    cands = candidates_for(fctx, celebrity, d, locate_corpus(arts, index), meta.get("containment", "article"))
    threshold = meta.get("threshold", cfg.threshold)
    sample = build_sample(fctx, celebrity, d, cands) if cands else None
    rows = []
    if sample is not None:
        probs = model.predict(sample)
        rows = [{"location": loc, "probability": round(float(p), 6), "visited": bool(p >= threshold)}
                for loc, p in zip(sample.locations, probs)]
    result = {"celebrity": celebrity, "date": d.isoformat(), "threshold": threshold, "candidates": rows,
              "positives": [r["location"] for r in rows if r["visited"]]}
    if cfg.out:
        out = _outdir(cfg)
        _write_json(result, out / "prediction.json")
        if rows:
            plot_probabilities([r["location"] for r in rows], [r["probability"] for r in rows], threshold,
                               out / "prediction.png", f"{celebrity}, {d.isoformat()}")
    click.echo(_write_json(result, None), nl=False)


@cli.command("baseline")
@_common
@click.option("--method", type=click.Choice(["locfre", "locjaccard"]), required=True)
@click.option("--corpus")
@click.option("--gazetteer")
@click.option("--instances")
@click.option("--split", type=click.Choice(["test", "all"]), default="test", show_default=True)
@click.option("--split-date")
@click.pass_context
def baseline_cmd(ctx, method, corpus, gazetteer, instances, split, split_date):
    """Frequency (LocFre) or Jaccard (LocJaccard) top-1 baseline; writes report.json and metrics.png."""
    cfg = _config(ctx, corpus=corpus, gazetteer=gazetteer, instances=instances, split_date=split_date)
    cfg.require_paths("instances")
    chosen = _select_split(load_instances(cfg.instances), split, cfg.split_date, cfg.val_frac, cfg.seed)
    if not chosen:
        raise CliError("data", "empty test set")
    arts = _corpus(cfg, tag=False)
    index = _index(cfg)
    mentions = locate_corpus(arts, index)
    if method == "locfre":
        preds = baseline_locfre(locfre_scores(chosen, mentions))
    else:
        per_article = {aid: resolve_containment(ms, index) for aid, ms in mentions.items()}
        preds = baseline_locjaccard(locjaccard_scores(chosen, arts, per_article))
    report = baseline_report(preds, chosen)
    out = _outdir(cfg, f"baseline_{method}")
    text = _write_json({"method": method, "split": split, "report": _report_json(report)}, out / "report.json")
    plot_metrics({method: report.to_dict()}, out / "metrics.png", f"{method}, {split} split")
    click.echo(text, nl=False)


# ---------------------------------------------------------------- helpers

def _require(cfg: RunConfig, name: str) -> str:
    cfg.require_paths(name)
    return getattr(cfg, name)


def _emit_jsonl(objs, out: str | None) -> None:
    text = "".join(json.dumps(o, sort_keys=True, ensure_ascii=False) + "\n" for o in objs)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


def _write_predictions(preds, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["celebrity", "date", "location", "probability", "predicted", "label"])
        for p in preds:
            w.writerow([p.celebrity, p.date.isoformat(), p.location, f"{p.probability:.6f}", p.predicted,
                        "" if p.label is None else p.label])


def main(argv=None) -> None:
    cli.main(args=argv, prog_name="celetrip")


if __name__ == "__main__":
    main()
