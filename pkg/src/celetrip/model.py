"""Learned layers of the itinerary classifier.

Features are row vectors throughout: a linear layer is ``X @ W + b``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from celetrip import tensor as T
from celetrip.graphs import EntitySubgraph, GraphError, TripGraph, WordArticleGraph
from celetrip.tensor import Tensor


@dataclass
class ModelConfig:
    word_dim: int = 100
    article_dim: int = 1000
    kb_dim: int = 50
    hidden_dim: int = 128
    trip_dim: int = 128  # F, input width of the Trip Graph
    attention_dim: int = 100
    blocks: int = 2
    trip_layers: int = 2
    epsilon: float = 0.5
    q: int = 7
    leaky_slope: float = 0.2
    use_oriented_pooling: bool = True
    use_entity: bool = True
    use_event: bool = True
    pool_gate: bool = False

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.q < 0:
            raise ValueError(f"q must be >= 0, got {self.q}")
        if self.blocks < 1 or self.trip_layers < 1:
            raise ValueError("blocks and trip_layers must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, int]]:
    d, h, f, kb, a = cfg.word_dim, cfg.hidden_dim, cfg.trip_dim, cfg.kb_dim, cfg.attention_dim
    z = 2 * cfg.q + 1
    shapes = {
        "word_proj.W": (d, h), "word_proj.b": (1, h),
        "article_proj.W": (cfg.article_dim, h), "article_proj.b": (1, h),
    }
    for b in range(cfg.blocks):
        shapes.update({f"wa_gat{b}.W": (h, h), f"wa_gat{b}.a_src": (h, 1), f"wa_gat{b}.a_dst": (h, 1),
                       f"pool{b}.w_score": (h, 1), f"pool{b}.W_alpha": (2, 1)})
    shapes.update({
        "loc_out.W": (h, f), "loc_out.b": (1, f),
        "compgcn.W_es": (kb, kb), "compgcn.W_edge": (kb, kb),
        "ent_proj.W": (d + kb, f), "ent_proj.b": (1, f),
        "ent_init_proj.W": (d, f), "ent_init_proj.b": (1, f),
        "eve.W": (d, a), "eve.b": (1, a), "eve.zeta": (a, 1),
        "eve.psi1.W": (z, f), "eve.psi1.b": (1, f),
        "eve.psi2.W": (f + d, f), "eve.psi2.b": (1, f),
        "eve_init_proj.W": (d, f), "eve_init_proj.b": (1, f),
    })
    for layer in range(cfg.trip_layers):
        shapes.update({f"trip_gat{layer}.W": (f, f), f"trip_gat{layer}.a_src": (f, 1),
                       f"trip_gat{layer}.a_dst": (f, 1)})
    shapes.update({"out.W": (f, 2), "out.b": (1, 2)})
    return shapes


def init_params(cfg: ModelConfig, seed: int = 0) -> dict[str, Tensor]:
    """Glorot-uniform weights, zero biases, drawn in a fixed order from ``seed``."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, (fan_in, fan_out) in param_shapes(cfg).items():
        if name.endswith(".b"):
            value = np.zeros((fan_in, fan_out))
        else:
            value = _glorot(rng, fan_in, fan_out)
        params[name] = Tensor(value, requires_grad=True, name=name)
    return params


# ---------------------------------------------------------------- word-article graph

def project_nodes(x_words, x_articles, params: Mapping[str, Tensor]) -> Tensor:
    """Map word (F_W) and article (F_A) features to the shared hidden width, words first."""
    x_words, x_articles = T.astensor(x_words), T.astensor(x_articles)
    hw = x_words @ params["word_proj.W"] + params["word_proj.b"]
    ha = x_articles @ params["article_proj.W"] + params["article_proj.b"]
    return T.concat([hw, ha], axis=0)


class GatOutput(NamedTuple):
    h: Tensor
    attention: Tensor


def gat_layer(h: Tensor, adjacency: np.ndarray, W: Tensor, a_src: Tensor, a_dst: Tensor,
              slope: float = 0.2) -> GatOutput:
    """Single-head graph attention.

    e_ij = LeakyReLU(a_src . Wh_i + a_dst . Wh_j) over j in N(i) (self included),
    alpha = row softmax, h'_i = ELU(sum_j alpha_ij Wh_j).
    """
    adjacency = np.asarray(adjacency)
    if adjacency.shape != (h.shape[0], h.shape[0]):
        raise GraphError(f"adjacency {adjacency.shape} does not fit {h.shape[0]} nodes")
    if not np.all(np.diag(adjacency) > 0):
        raise GraphError("every node needs a self-loop before graph attention")
    wh = h @ W
    scores = T.leaky_relu(wh @ a_src + (wh @ a_dst).T, slope)
    alpha = T.masked_softmax(scores, adjacency > 0, axis=1)
    return GatOutput(T.elu(alpha @ wh), alpha)


def pool_size(epsilon: float, n: int) -> int:
    return min(n, math.ceil(round(epsilon * n, 9)))


def select_top(scores: np.ndarray, k: int, forced: Sequence[int] = ()) -> np.ndarray:
    """Indices of the ``k`` highest scores (ties: lower index first), forced nodes included.

    A forced node outside the top ``k`` replaces the lowest-scoring kept
    node that is not itself forced; when none is left it is added.
    Returned indices are sorted ascending.
    """
    scores = np.asarray(scores, dtype=np.float64)
    n = len(scores)
    order = list(np.lexsort((np.arange(n), -scores)))
    kept = order[:k]
    forced_set = set(int(i) for i in forced)
    missing = [i for i in order if i in forced_set and i not in kept[:k]]
    kept_set = set(kept)
    for i in missing:
        if i in kept_set:
            continue
        victims = [j for j in reversed(kept) if j not in forced_set]
        if victims:
            kept.remove(victims[0])
            kept_set.discard(victims[0])
        kept.append(i)
        kept_set.add(i)
    return np.array(sorted(kept_set), dtype=np.int64)


def normalized_adjacency(adjacency: np.ndarray) -> np.ndarray:
    deg = adjacency.sum(axis=1)
    inv = 1.0 / np.sqrt(deg)
    return adjacency * inv[:, None] * inv[None, :]


class PoolOutput(NamedTuple):
    h: Tensor
    adjacency: np.ndarray
    kept: np.ndarray
    lw_idx: list[int]
    cw_idx: list[int]
    score: Tensor


def oriented_pooling(h: Tensor, adjacency: np.ndarray, lw_idx: Sequence[int], cw_idx: Sequence[int],
                     epsilon: float, w_score: Tensor, w_alpha: Tensor, gate: bool = False) -> PoolOutput:
    """Keep the ceil(epsilon N) nodes with the highest oriented score.

    The score mixes a one-step graph-convolution attention score with the
    product of each node's cosine similarity to the mean location-word and
    mean celebrity-word embeddings: tanh([s_attn, s_loc * s_c] @ W_alpha).
    Location and celebrity word nodes are always kept.  With ``gate`` the
    kept rows are scaled by their scores; otherwise rows pass through as is.
    """
    n = h.shape[0]
    s_attn = (T.astensor(normalized_adjacency(adjacency)) @ h) @ w_score
    h_lw = T.mean(T.gather_rows(h, list(lw_idx)), axis=0, keepdims=True)
    h_cw = T.mean(T.gather_rows(h, list(cw_idx)), axis=0, keepdims=True)
    s_sim = T.cosine_similarity(h, h_lw) * T.cosine_similarity(h, h_cw)
    s_ori = T.tanh(T.concat([s_attn, s_sim], axis=1) @ w_alpha)
    kept = select_top(s_ori.value[:, 0], pool_size(epsilon, n), [*lw_idx, *cw_idx])
    h_kept = T.gather_rows(h, kept)
    if gate:
        h_kept = h_kept * T.gather_rows(s_ori, kept)
    pos = {int(old): new for new, old in enumerate(kept)}
    return PoolOutput(h_kept, adjacency[np.ix_(kept, kept)], kept,
                      [pos[i] for i in lw_idx], [pos[i] for i in cw_idx], s_ori)


def location_module(graph: WordArticleGraph, params: Mapping[str, Tensor], cfg: ModelConfig) -> Tensor:
    """Project, run ``blocks`` x (GAT, Oriented Pooling), max-read out, project to F (1 x F)."""
    h = project_nodes(graph.x_words, graph.x_articles, params)
    adj, lw, cw = graph.adjacency, list(graph.lw_idx), list(graph.cw_idx)
    for b in range(cfg.blocks):
        h = gat_layer(h, adj, params[f"wa_gat{b}.W"], params[f"wa_gat{b}.a_src"],
                      params[f"wa_gat{b}.a_dst"], cfg.leaky_slope).h
        if cfg.use_oriented_pooling:
            pooled = oriented_pooling(h, adj, lw, cw, cfg.epsilon, params[f"pool{b}.w_score"],
                                      params[f"pool{b}.W_alpha"], cfg.pool_gate)
            h, adj, lw, cw = pooled.h, pooled.adjacency, pooled.lw_idx, pooled.cw_idx
    return T.max_rows(h) @ params["loc_out.W"] + params["loc_out.b"]


# ---------------------------------------------------------------- entities

def compgcn_layer(subgraph: EntitySubgraph | None, W_es: Tensor, W_edge: Tensor) -> Tensor:
    """tanh(sum over incident (relation r, neighbour u) of (h_u * (l_r W_edge)) W_es), as 1 x kb.

    Edges count as undirected incidences on the centre; no neighbours gives 0.
    """
    dim = W_es.shape[0]
    if subgraph is None:
        return T.Tensor(np.zeros((1, dim)))
    neigh = subgraph.neighbours()
    if not neigh:
        return T.tanh(T.Tensor(np.zeros((1, dim))))
    h_u = T.Tensor(subgraph.node_init[[i for i, _ in neigh]])
    rel = T.Tensor(np.vstack([subgraph.relation_init[r] for _, r in neigh]))
    messages = (h_u * (rel @ W_edge)) @ W_es
    return T.tanh(T.tsum(messages, axis=0, keepdims=True))


def entity_module(h_init: np.ndarray, subgraph: EntitySubgraph | None, params: Mapping[str, Tensor],
                  cfg: ModelConfig) -> Tensor:
    """Entity embedding (1 x F).  Unlinked entities use a zero sub-graph feature."""
    h_init = T.Tensor(np.asarray(h_init, dtype=np.float64).reshape(1, -1))
    if not cfg.use_entity:
        return h_init @ params["ent_init_proj.W"] + params["ent_init_proj.b"]
    h_bar = compgcn_layer(subgraph, params["compgcn.W_es"], params["compgcn.W_edge"])
    return T.tanh(T.concat([h_init, h_bar], axis=1)) @ params["ent_proj.W"] + params["ent_proj.b"]


# ---------------------------------------------------------------- events

class EventAttention(NamedTuple):
    h: Tensor
    weights: Tensor | None


def event_attention(sentence_vectors: np.ndarray, params: Mapping[str, Tensor]) -> EventAttention:
    """Attention-weighted mean of sentence vectors: mu = sigmoid(V W + b), lambda = softmax(mu zeta)."""
    v = np.asarray(sentence_vectors, dtype=np.float64)
    if v.shape[0] == 0:
        return EventAttention(T.Tensor(np.zeros((1, params["eve.W"].shape[0]))), None)
    vt = T.Tensor(v)
    mu = T.sigmoid(vt @ params["eve.W"] + params["eve.b"])
    lam = T.softmax(mu @ params["eve.zeta"], axis=0)
    return EventAttention(T.tsum(lam * vt, axis=0, keepdims=True), lam)


def event_module(sentence_vectors: np.ndarray, counts: np.ndarray, h_init: np.ndarray,
                 params: Mapping[str, Tensor], cfg: ModelConfig) -> Tensor:
    """Event embedding (1 x F): tanh(psi2([h_z, h_tilde])) + h_z with h_z = psi1(daily counts)."""
    if not cfg.use_event:
        h0 = T.Tensor(np.asarray(h_init, dtype=np.float64).reshape(1, -1))
        return h0 @ params["eve_init_proj.W"] + params["eve_init_proj.b"]
    z = np.asarray(counts, dtype=np.float64).reshape(1, -1)
    if z.shape[1] != 2 * cfg.q + 1:
        raise ValueError(f"count vector has {z.shape[1]} days, expected {2 * cfg.q + 1}")
    h_tilde = event_attention(sentence_vectors, params).h
    h_z = T.Tensor(z) @ params["eve.psi1.W"] + params["eve.psi1.b"]
    fused = T.concat([h_z, h_tilde], axis=1) @ params["eve.psi2.W"] + params["eve.psi2.b"]
    return T.tanh(fused) + h_z


# ---------------------------------------------------------------- trip graph

_POSITIVE_COLUMN = np.array([[0.0], [1.0]])


def trip_forward(h_loc: Tensor, h_ent: Tensor | None, h_eve: Tensor | None, adjacency: np.ndarray,
                 params: Mapping[str, Tensor], cfg: ModelConfig) -> Tensor:
    """Stack location, entity and event rows, run the Trip Graph GAT layers, classify locations.

    Returns the k x 1 column of visit probabilities.
    """
    k = h_loc.shape[0]
    rows = [h_loc] + [x for x in (h_ent, h_eve) if x is not None and x.shape[0] > 0]
    h = T.concat(rows, axis=0)
    for layer in range(cfg.trip_layers):
        h = gat_layer(h, adjacency, params[f"trip_gat{layer}.W"], params[f"trip_gat{layer}.a_src"],
                      params[f"trip_gat{layer}.a_dst"], cfg.leaky_slope).h
    logits = T.gather_rows(h, np.arange(k)) @ params["out.W"] + params["out.b"]
    return T.softmax(logits, axis=1) @ T.Tensor(_POSITIVE_COLUMN)


def trip_loss(probs: Tensor, labels, pos_weight: float = 1.0) -> Tensor:
    labels = np.asarray(labels, dtype=np.float64)
    if labels.size != probs.value.size:
        raise ValueError(f"{probs.value.size} predictions but {labels.size} labels")
    return T.bce_loss(probs, labels, pos_weight)


class CeleTrip:
    """Parameters plus configuration; runs the full forward pass on a prepared sample."""

    def __init__(self, cfg: ModelConfig, params: Mapping[str, Tensor] | None = None, seed: int = 0):
        self.cfg = cfg
        self.params = dict(params) if params is not None else init_params(cfg, seed)
        expected = param_shapes(cfg)
        for name, shape in expected.items():
            if name not in self.params:
                raise ValueError(f"missing parameter {name}")
            if self.params[name].shape != shape:
                raise ValueError(f"parameter {name} has shape {self.params[name].shape}, expected {shape}")

    def forward(self, sample) -> Tensor:
        cfg, p = self.cfg, self.params
        h_loc = T.concat([location_module(g, p, cfg) for g in sample.location_graphs], axis=0)
        h_ent = None
        if sample.entities:
            h_ent = T.concat([entity_module(e.h_init, e.subgraph, p, cfg) for e in sample.entities], axis=0)
        h_eve = None
        if sample.events:
            h_eve = T.concat([event_module(e.sentence_vectors, e.counts, e.h_init, p, cfg)
                              for e in sample.events], axis=0)
        return trip_forward(h_loc, h_ent, h_eve, sample.trip_graph.adjacency, p, cfg)

    def loss(self, sample, pos_weight: float = 1.0) -> tuple[Tensor, Tensor]:
        probs = self.forward(sample)
        return trip_loss(probs, sample.trip_graph.labels, pos_weight), probs

    def predict(self, sample) -> np.ndarray:
        return self.forward(sample).value[:, 0].copy()

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.value.copy() for k, v in self.params.items()}

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        for k, v in state.items():
            if k in self.params:
                self.params[k].value[...] = v

    @classmethod
    def from_state(cls, cfg: ModelConfig, state: Mapping[str, np.ndarray]) -> "CeleTrip":
        params = {k: Tensor(np.array(v), requires_grad=True, name=k) for k, v in state.items()}
        return cls(cfg, params)
