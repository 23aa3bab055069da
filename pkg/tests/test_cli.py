import csv
import json
import re
from datetime import date

import pytest
from click.testing import CliRunner

from celetrip.cli import cli
from celetrip.synth import PinnedTrip, synth_generate

TRUMP_DAY = date(2017, 1, 26)
PINNED = PinnedTrip("Donald Trump", TRUMP_DAY, "Philadelphia", ("Washington D.C.", "Chicago", "Berlin", "Tokyo"),
                    heavy_decoy="Washington D.C.")


def run(*args, env=None, ok=True):
    result = CliRunner().invoke(cli, [str(a) for a in args], env=env or {}, catch_exceptions=False)
    if ok:
        assert result.exit_code == 0, result.stderr
    return result


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = synth_generate(80, 5, seed=7, start=date(2016, 10, 1), pinned=[PINNED])
    paths = data.write(root / "data")
    cfg = root / "run.cfg"
    cfg.write_text("\n".join([
        f"corpus = {paths['corpus']}", f"gazetteer = {paths['gazetteer']}", f"lexicon = {paths['lexicon']}",
        f"ground_truth = {paths['ground_truth']}", f"kb_triples = {paths['kb_triples']}",
        f"kb_entities = {paths['kb_entities']}", f"kb_relations = {paths['kb_relations']}",
        f"kb_labels = {paths['kb_labels']}", f"instances = {root / 'instances.csv'}",
        "split_date = 2017-01-15", "val_frac = 0.2", "hidden_dim = 32", "F = 32", "word_dim = 32",
        "max_features = 300", "cbow_epochs = 3", "epochs = 60", "patience = 10", ""]))
    summary = json.loads(run("build-dataset", "--config", cfg, "--out", root / "instances.csv").stdout)
    trained = json.loads(run("train", "--config", cfg, "--out", root / "run").stdout)
    return {"root": root, "cfg": cfg, "paths": paths, "summary": summary, "trained": trained}


def test_build_dataset_summary(work):
    s = work["summary"]
    assert s["missed"] == 0 and s["positive"] == 81 and s["negative"] == 4 * 81
    assert s["instances"] == s["positive"] + s["negative"]
    assert (work["root"] / "instances.missed.csv").read_text() == "celebrity,date,location\n"


def test_train_outputs(work):
    run_dir = work["root"] / "run"
    for name in ("model.ckpt", "train_log.csv", "curves.png", "vectors.txt"):
        assert (run_dir / name).stat().st_size > 0
    rows = list(csv.DictReader(open(run_dir / "train_log.csv")))
    assert len(rows) == work["trained"]["epochs_run"]
    assert 1 <= work["trained"]["best_epoch"] <= len(rows)


def test_predict_planted_trip(work):
    out = json.loads(run("predict", "--config", work["cfg"], "--checkpoint", work["root"] / "run" / "model.ckpt",
                         "--celebrity", "Donald Trump", "--date", "2017-01-26",
                         "--out", work["root"] / "pred").stdout)
    probs = {c["location"]: c["probability"] for c in out["candidates"]}
    assert set(probs) == {"Philadelphia", "Washington D.C.", "Chicago", "Berlin", "Tokyo"}
    assert "Philadelphia" in out["positives"]
    assert "Washington D.C." not in out["positives"]
    assert (work["root"] / "pred" / "prediction.png").exists()
    saved = json.loads((work["root"] / "pred" / "prediction.json").read_text())
    assert saved == out


def test_predict_heavy_decoy_beats_frequency(work):
    res = run("baseline", "--config", work["cfg"], "--method", "locfre", "--split", "all",
              "--out", work["root"] / "bl_all")
    assert json.loads(res.stdout)["method"] == "locfre"
    # the decoy is mentioned more often, so counting picks it
    from celetrip.corpus import load_corpus, load_instances, locate_corpus
    from celetrip.extract_geo import build_gazetteer_index
    from celetrip.train_eval import baseline_locfre, locfre_scores
    inst = [i for i in load_instances(work["root"] / "instances.csv") if i.date == TRUMP_DAY]
    corpus = load_corpus(work["paths"]["corpus"])
    mentions = locate_corpus(corpus, build_gazetteer_index(work["paths"]["gazetteer"]))
    picks = baseline_locfre(locfre_scores(inst, mentions))[("Donald Trump", TRUMP_DAY)]
    assert picks["Washington D.C."] == 1 and picks["Philadelphia"] == 0


def test_evaluate_writes_report(work):
    res = run("evaluate", "--config", work["cfg"], "--checkpoint", work["root"] / "run" / "model.ckpt",
              "--out", work["root"] / "eval")
    report = json.loads(res.stdout)["report"]
    assert set(report) == {"precision", "recall", "f1", "accuracy", "tp", "fp", "tn", "fn"}
    assert report["f1"] >= 80
    rows = list(csv.DictReader(open(work["root"] / "eval" / "predictions.csv")))
    assert len(rows) == report["tp"] + report["fp"] + report["tn"] + report["fn"]
    assert (work["root"] / "eval" / "metrics.png").exists()


def test_evaluate_is_byte_identical(work):
    outs = []
    for name in ("e1", "e2"):
        d = work["root"] / name
        run("evaluate", "--config", work["cfg"], "--checkpoint", work["root"] / "run" / "model.ckpt", "--out", d)
        outs.append([(d / f).read_bytes() for f in ("report.json", "predictions.csv", "metrics.png")])
    assert outs[0] == outs[1]


def test_evaluate_empty_test_set(work):
    from celetrip.corpus import load_instances, write_instances
    early = work["root"] / "early.csv"
    write_instances([i for i in load_instances(work["root"] / "instances.csv") if i.date < date(2016, 11, 1)], early)
    res = run("evaluate", "--config", work["cfg"], "--checkpoint", work["root"] / "run" / "model.ckpt",
              "--instances", early, "--out", work["root"] / "e_empty", ok=False)
    assert res.exit_code == 1
    assert res.stderr.strip() == "error: data: empty test set"


def test_baseline_report_shape(work):
    res = run("baseline", "--config", work["cfg"], "--method", "locfre", "--out", work["root"] / "bl")
    body = json.loads(res.stdout)
    assert {"precision", "recall", "f1", "accuracy"} <= set(body["report"])
    assert body["split"] == "test"
    again = run("baseline", "--config", work["cfg"], "--method", "locfre", "--out", work["root"] / "bl2")
    assert again.stdout == res.stdout
    assert (work["root"] / "bl" / "metrics.png").read_bytes() == (work["root"] / "bl2" / "metrics.png").read_bytes()
    jac = json.loads(run("baseline", "--config", work["cfg"], "--method", "locjaccard",
                         "--out", work["root"] / "blj").stdout)
    assert jac["method"] == "locjaccard"


def test_extract_commands(work):
    p = work["paths"]
    dates = run("extract-dates", "--corpus", p["corpus"]).stdout.splitlines()
    first = json.loads(dates[0])
    assert set(first) == {"article_id", "matches"}
    assert run("extract-dates", "--corpus", p["corpus"]).stdout.splitlines() == dates
    locs = [json.loads(x) for x in run("extract-locations", "--corpus", p["corpus"], "--gazetteer",
                                       p["gazetteer"]).stdout.splitlines()]
    assert all(set(x) == {"article_id", "mentions", "candidates"} for x in locs)
    assert any("Philadelphia" in x["candidates"] for x in locs)
    out = work["root"] / "dates.jsonl"
    run("extract-dates", "--corpus", p["corpus"], "--out", out)
    assert out.read_text().splitlines() == dates


def test_train_embeddings(work, tmp_path):
    res = run("train-embeddings", "--corpus", work["paths"]["corpus"], "--dim", 8, "--epochs", 1,
              "--out", tmp_path / "v.txt")
    body = json.loads(res.stdout)
    assert body["dim"] == 8 and body["words"] > 100
    assert (tmp_path / "v.txt").read_text().splitlines()[0] == f"{body['words']} 8"


def test_generate_synthetic_reproducible(tmp_path):
    a = run("generate-synthetic", "--n-days", 6, "--candidates-per-day", 3, "--out", tmp_path / "a")
    b = run("generate-synthetic", "--n-days", 6, "--candidates-per-day", 3, "--out", tmp_path / "b")
    assert a.stdout == b.stdout
    for f in json.loads(a.stdout)["files"].values():
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    c = run("--seed", 0, "generate-synthetic", "--n-days", 6, "--candidates-per-day", 3, "--out", tmp_path / "c")
    assert (tmp_path / "c" / "corpus.jsonl").read_bytes() != (tmp_path / "a" / "corpus.jsonl").read_bytes()


def test_train_short_runs_are_byte_identical(work):
    ckpts = []
    for name in ("t1", "t2"):
        run("train", "--config", work["cfg"], "--epochs", 1, "--word-vectors", work["root"] / "run" / "vectors.txt",
            "--out", work["root"] / name)
        ckpts.append((work["root"] / name / "model.ckpt").read_bytes())
    assert ckpts[0] == ckpts[1]


def test_env_and_flag_precedence(work):
    env = {"CELETRIP_PATIENCE": "0", "CELETRIP_EPOCHS": "3"}
    vec = work["root"] / "run" / "vectors.txt"
    body = json.loads(run("train", "--config", work["cfg"], "--word-vectors", vec, "--out", work["root"] / "env1",
                          env=env).stdout)
    assert body["epochs_run"] == 1
    body = json.loads(run("train", "--config", work["cfg"], "--word-vectors", vec, "--patience", 5,
                          "--out", work["root"] / "env2", env=env).stdout)
    assert body["epochs_run"] == 3


def test_config_violation_names_field(work):
    res = run("train", "--config", work["cfg"], "--epsilon", 1.5, ok=False)
    assert res.exit_code == 1
    assert re.fullmatch(r"error: config: epsilon: .+", res.stderr.strip())


def test_missing_path_is_one_line(tmp_path):
    res = run("extract-dates", "--corpus", tmp_path / "nope.jsonl", ok=False)
    assert res.exit_code == 1 and res.stderr.count("\n") == 1
    assert res.stderr.startswith("error: config: corpus: no such file")


def test_usage_errors_exit_two():
    res = run("predict", "--date", "2017-01-26", ok=False)
    assert res.exit_code == 2 and "Usage" in res.stderr
    res = run("baseline", "--method", "median", ok=False)
    assert res.exit_code == 2
    assert run("no-such-command", ok=False).exit_code == 2


def test_bad_date_flag(work):
    res = run("predict", "--config", work["cfg"], "--checkpoint", work["root"] / "run" / "model.ckpt",
              "--celebrity", "Donald Trump", "--date", "26/01/2017", ok=False)
    assert res.exit_code == 1 and res.stderr.startswith("error: config: date:")


def test_version():
    assert run("--version").stdout.startswith("celetrip, version")
