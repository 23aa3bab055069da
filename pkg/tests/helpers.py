"""Shared builders and numerical oracles for the test suite."""

from __future__ import annotations

from datetime import date
from pathlib import Path

import numpy as np

from celetrip.corpus import Article, Corpus, DictionaryTagger
from celetrip.extract_geo import GazetteerEntry, GazetteerIndex
from celetrip.extract_time import annotate_corpus_dates
from celetrip.features import WordVectors, tfidf_fit
from celetrip.graphs import KnowledgeBase
from celetrip.model import CeleTrip, ModelConfig
from celetrip.pipeline import FeatureContext, build_sample

FIXTURES = Path(__file__).parent / "fixtures"

H = 1e-5

# PASS/FAIL lines from the acceptance suite, printed at the end of the run
ACCEPTANCE: list[str] = []


def record(criterion: int, title: str, ok: bool | None, detail: str) -> bool:
    """Log one criterion; ``ok=None`` marks it as skipped."""
    status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
    line = f"{status} [{criterion}] {title}: {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return bool(ok)


def rel_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    a, n = np.asarray(analytic), np.asarray(numeric)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def numeric_grad(f, x: np.ndarray, h: float = H) -> np.ndarray:
    """Central differences of the scalar ``f()`` w.r.t. the array ``x`` (perturbed in place)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        up = f()
        x[i] = old - h
        down = f()
        x[i] = old
        g[i] = (up - down) / (2 * h)
    return g


def check_tensor_grads(loss_fn, tensors, h: float = H) -> np.ndarray:
    """Relative errors, analytic vs central difference, for every entry of every tensor.

    ``loss_fn`` builds a fresh scalar Tensor from the current values.
    """
    for t in tensors:
        t.grad = None
    loss_fn().backward()
    errs = []
    for t in tensors:
        analytic = np.zeros_like(t.value) if t.grad is None else t.grad.copy()
        numeric = numeric_grad(lambda: loss_fn().item(), t.value, h)
        errs.append(rel_error(analytic, numeric).ravel())
    return np.concatenate(errs) if errs else np.zeros(0)


# ---------------------------------------------------------------- a minimal real instance

TINY_DAY = date(2017, 1, 26)
TINY_TEXTS = {
    "a1": ("Donald Trump visited Philadelphia for talks with local leaders. "
           "Angela Merkel praised the Philadelphia plan in a statement. "
           "Officials discussed the regional budget at a briefing. "
           "Crowds in Philadelphia welcomed the motorcade."),
    "a2": ("Donald Trump commented on Washington D.C. during an interview. "
           "The Aurora Forum in Washington D.C. was postponed because of rain. "
           "Analysts reviewed the trade plan in a long report. "
           "Critics questioned the energy plan of the capital."),
    "a3": ("Organisers of the Aurora Forum published a new programme. "
           "Tickets sold out within hours. "
           "Vendors prepared stalls near the river. "
           "The weather looked calm."),
}


def tiny_cfg(**kw) -> ModelConfig:
    base = dict(word_dim=6, article_dim=8, kb_dim=4, hidden_dim=5, trip_dim=4, attention_dim=3, q=1,
                blocks=2, trip_layers=2)
    base.update(kw)
    return ModelConfig(**base)


def tiny_index() -> GazetteerIndex:
    return GazetteerIndex.from_entries([
        GazetteerEntry("US", "United States", ("USA",), (), "country"),
        GazetteerEntry("PHL", "Philadelphia", (), ("United States",), "city"),
        GazetteerEntry("DC", "Washington D.C.", ("Washington DC",), ("United States",), "city"),
    ])


def tiny_kb(dim: int = 4, seed: int = 3) -> KnowledgeBase:
    rng = np.random.default_rng(seed)
    triples = [("person:angela_merkel", "citizen_of", "place:germany"),
               ("place:berlin", "capital_of", "place:germany"),
               ("event:aurora_forum", "held_in", "place:washington_d.c.")]
    ids = sorted({x for h, _, t in triples for x in (h, t)})
    rels = ["capital_of", "citizen_of", "held_in"]
    ents = WordVectors({e: i for i, e in enumerate(ids)}, rng.normal(size=(len(ids), dim)))
    rel = WordVectors({r: i for i, r in enumerate(rels)}, rng.normal(size=(len(rels), dim)))
    return KnowledgeBase(triples, ents, rel, {"angela merkel": "person:angela_merkel",
                                              "aurora forum": "event:aurora_forum"})


def tiny_corpus() -> Corpus:
    tagger = DictionaryTagger({"Angela Merkel": "PERSON", "Aurora Forum": "EVENT"})
    arts = []
    for aid, text in TINY_TEXTS.items():
        art = Article.from_text(aid, text, TINY_DAY)
        art.mentions = tagger.tag(art.raw_sentences)
        arts.append(art)
    return annotate_corpus_dates(Corpus(arts))


def tiny_context(cfg: ModelConfig | None = None, seed: int = 0) -> FeatureContext:
    cfg = cfg or tiny_cfg()
    corpus = tiny_corpus()
    stems = sorted({w for a in corpus for s in a.sentences for w in s})
    rng = np.random.default_rng(seed)
    wv = WordVectors({w: i for i, w in enumerate(stems)}, rng.normal(size=(len(stems), cfg.word_dim)))
    tfidf = tfidf_fit(corpus, max_features=cfg.article_dim)
    return FeatureContext(corpus, wv, tfidf, tiny_kb(cfg.kb_dim), tiny_index(), window=15, q=cfg.q)


def tiny_sample(cfg: ModelConfig | None = None, seed: int = 0):
    ctx = tiny_context(cfg, seed)
    return build_sample(ctx, "Donald Trump", TINY_DAY, {"Philadelphia": ["a1"], "Washington D.C.": ["a2"]},
                        {"Philadelphia": 1, "Washington D.C.": 0})


def tiny_model(cfg: ModelConfig | None = None, seed: int = 0) -> CeleTrip:
    return CeleTrip(cfg or tiny_cfg(), seed=seed)


def random_graph(rng: np.random.Generator, n: int, p: float = 0.3) -> np.ndarray:
    """Symmetric 0/1 adjacency with self-loops."""
    upper = np.triu(rng.random((n, n)) < p, 1)
    adj = (upper | upper.T).astype(np.float64)
    np.fill_diagonal(adj, 1.0)
    return adj


# ---------------------------------------------------------------- per-layer gradient fixtures

def layer_grad_cases(seed: int = 0):
    """(name, loss builder, tensors to check) for every learned layer on small random inputs.

    Each loss is a fixed random projection of the layer output so every
    output entry contributes.
    """
    from celetrip import model as M
    from celetrip import tensor as T
    from celetrip.graphs import EntitySubgraph
    from celetrip.tensor import Tensor

    rng = np.random.default_rng(seed)
    cfg = tiny_cfg()
    params = M.init_params(cfg, seed)

    def leaf(*shape):
        return Tensor(rng.normal(size=shape), requires_grad=True)

    def proj(out_shape):
        return Tensor(rng.normal(size=out_shape))

    cases = []

    xw, xa = rng.normal(size=(4, cfg.word_dim)), rng.normal(size=(2, cfg.article_dim))
    r1 = proj((6, cfg.hidden_dim))
    cases.append(("project_nodes", lambda: T.tsum(M.project_nodes(xw, xa, params) * r1),
                  [params["word_proj.W"], params["word_proj.b"], params["article_proj.W"], params["article_proj.b"]]))

    h = leaf(6, cfg.hidden_dim)
    adj = random_graph(rng, 6, 0.4)
    r2 = proj((6, cfg.hidden_dim))
    gat = [params["wa_gat0.W"], params["wa_gat0.a_src"], params["wa_gat0.a_dst"]]
    cases.append(("gat_layer", lambda: T.tsum(M.gat_layer(h, adj, *gat).h * r2), [h, *gat]))

    hp = leaf(7, cfg.hidden_dim)
    adj7 = random_graph(rng, 7, 0.4)
    pool = [params["pool0.w_score"], params["pool0.W_alpha"]]

    r_kept, r_score = proj((M.pool_size(0.5, 7), cfg.hidden_dim)), proj((7, 1))

    def pool_loss():
        out = M.oriented_pooling(hp, adj7, [1], [2, 3], 0.5, *pool)
        return T.tsum(out.h * r_kept) + T.tsum(out.score * r_score)
    cases.append(("oriented_pooling", pool_loss, [hp, *pool]))

    sample = tiny_sample(cfg)
    g = sample.location_graphs[0]
    r3 = proj((1, cfg.trip_dim))
    loc_names = [k for k in params if k.startswith(("word_proj", "article_proj", "wa_gat", "pool", "loc_out"))]
    cases.append(("location_module", lambda: T.tsum(M.location_module(g, params, cfg) * r3),
                  [params[k] for k in loc_names]))

    kb = cfg.kb_dim
    sub = EntitySubgraph("c", ["c", "u", "v"], [("c", "r1", "u"), ("v", "r2", "c")],
                         rng.normal(size=(3, kb)), {"r1": rng.normal(size=kb), "r2": rng.normal(size=kb)})
    r4 = proj((1, kb))
    comp = [params["compgcn.W_es"], params["compgcn.W_edge"]]
    cases.append(("compgcn_layer", lambda: T.tsum(M.compgcn_layer(sub, *comp) * r4), comp))

    h_init = rng.normal(size=cfg.word_dim)
    r5 = proj((1, cfg.trip_dim))
    ent = [params[k] for k in ("compgcn.W_es", "compgcn.W_edge", "ent_proj.W", "ent_proj.b")]
    cases.append(("entity_module", lambda: T.tsum(M.entity_module(h_init, sub, params, cfg) * r5), ent))

    sv = rng.normal(size=(3, cfg.word_dim))
    counts = rng.integers(0, 4, size=2 * cfg.q + 1).astype(float)
    r6 = proj((1, cfg.trip_dim))
    eve = [params[k] for k in params if k.startswith("eve.")]
    cases.append(("event_module", lambda: T.tsum(M.event_module(sv, counts, h_init, params, cfg) * r6), eve))

    hl, he = leaf(2, cfg.trip_dim), leaf(2, cfg.trip_dim)
    tadj = np.eye(4)
    tadj[0, 2] = tadj[2, 0] = tadj[1, 2] = tadj[2, 1] = tadj[1, 3] = tadj[3, 1] = 1.0
    trip = [params[k] for k in params if k.startswith(("trip_gat", "out."))]
    cases.append(("trip_forward+trip_loss",
                  lambda: M.trip_loss(M.trip_forward(hl, he, None, tadj, params, cfg), [1, 0]), [hl, he, *trip]))
    return cases


# ---------------------------------------------------------------- synthetic pipeline

class SynthPipeline:
    """Planted corpus turned into train/val/test samples (test = last fifth of the days)."""

    def __init__(self, n_days=200, candidates_per_day=5, seed=7, word_dim=100, max_features=1000,
                 val_frac=0.2, split_seed=0, cbow_epochs=5, test_frac=0.2):
        from celetrip.corpus import build_trip_instances, locate_corpus
        from celetrip.features import train_cbow
        from celetrip.train_eval import split_dataset, synth_generate
        from celetrip.pipeline import samples_from_instances

        self.data = synth_generate(n_days, candidates_per_day, seed=seed)
        self.index = self.data.index()
        self.mentions = locate_corpus(self.data.corpus, self.index)
        self.instances, self.missed = build_trip_instances(self.data.corpus, self.data.ground_truth,
                                                           self.mentions, self.index)
        days = sorted(self.data.days)
        self.split_date = days[int(round((1 - test_frac) * len(days)))]
        self.train_inst, self.val_inst, self.test_inst = split_dataset(self.instances, self.split_date,
                                                                       val_frac, seed=split_seed)
        self.wv = train_cbow(self.data.corpus, dim=word_dim, epochs=cbow_epochs, seed=0)
        self.tfidf = tfidf_fit(self.data.corpus, max_features=max_features)
        self.ctx = FeatureContext(self.data.corpus, self.wv, self.tfidf, self.data.kb, self.index)
        self.train = samples_from_instances(self.ctx, self.train_inst)
        self.val = samples_from_instances(self.ctx, self.val_inst)
        self.test = samples_from_instances(self.ctx, self.test_inst)

    def model_config(self, **kw) -> ModelConfig:
        return ModelConfig(word_dim=self.wv.dim, article_dim=self.tfidf.dim, kb_dim=self.data.kb.dim, **kw)
