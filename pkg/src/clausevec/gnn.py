"""Graph neural clause encoders: GCN, BoC-GCN, R-GCN, MPNN and DAG-LSTM pooling.

Every encoder maps a :class:`GraphBatch` to a ``(n_graphs, d)`` tensor.
Single graphs are accepted and batched on the fly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor
from .fol import DEFAULT_POLICY, Clause, SkolemPolicy
from .graphs import (
    BOC_DIM, EDGE_TYPES, NODE_KINDS, FormulaGraph, GraphBatch, Node, NodeFeatureInit, batch_graphs, boc_features,
    build_name_shared_tree, build_shared_subexpr_dag, node_class_key,
)
from .patterns import FeatureVector, hash_feature

GNN_ENCODERS = ("gcn", "boc_gcn", "rgcn", "mpnn", "glstm_mpnn")
MAX_ARG = 8
N_EDGE_KEYS = len(EDGE_TYPES) * (MAX_ARG + 1) * 2

_DEFAULT_POOLING = {"gcn": "sum", "boc_gcn": "sum", "rgcn": "sum", "mpnn": "max", "glstm_mpnn": "dag_lstm"}


@dataclass(frozen=True)
class EncoderConfig:
    d: int = 64
    rounds: int = 2
    activation: str = "relu"
    pooling: Optional[str] = None  # None: per-encoder default
    bidirectional_messages: bool = True
    init: NodeFeatureInit = field(default_factory=NodeFeatureInit)
    dtype: str = "f64"
    policy: SkolemPolicy = DEFAULT_POLICY

    def __post_init__(self):
        if self.d < 1 or self.rounds < 0:
            raise ValueError("need d >= 1 and rounds >= 0")
        if self.activation not in ad.ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.pooling not in (None, "sum", "max", "dag_lstm"):
            raise ValueError(f"unknown pooling {self.pooling!r}")
        if self.dtype not in ad.DTYPES:
            raise ValueError(f"unknown dtype {self.dtype!r}")

    def pooling_for(self, kind: str) -> str:
        return self.pooling or _DEFAULT_POOLING[kind]

    def to_dict(self) -> dict:
        return {
            "d": self.d, "rounds": self.rounds, "activation": self.activation,
            "pooling": self.pooling, "bidirectional_messages": self.bidirectional_messages,
            "init": self.init.mode, "n_classes": self.init.n_classes, "dtype": self.dtype,
            "skolem_prefixes": list(self.policy.prefixes) if self.policy.prefixes else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EncoderConfig":
        data = dict(data)
        unknown = set(data) - {
            "d", "rounds", "activation", "pooling", "bidirectional_messages",
            "init", "n_classes", "dtype", "skolem_prefixes",
        }
        if unknown:
            raise ValueError(f"unknown encoder config keys: {sorted(unknown)}")
        init = NodeFeatureInit(data.pop("init", "label_class_lookup"), data.pop("n_classes", 256))
        kw = {}
        if "skolem_prefixes" in data:
            pref = data.pop("skolem_prefixes")
            kw["policy"] = SkolemPolicy(tuple(pref) if pref else None)
        return cls(init=init, **data, **kw)


def effective_config(kind: str, cfg: EncoderConfig) -> EncoderConfig:
    if kind not in GNN_ENCODERS:
        raise ValueError(f"unknown graph encoder {kind!r}")
    if kind == "boc_gcn" and cfg.init.mode != "bag_of_characters":
        cfg = replace(cfg, init=replace(cfg.init, mode="bag_of_characters"))
    if kind == "glstm_mpnn" and cfg.pooling in (None, "dag_lstm"):
        cfg = replace(cfg, pooling="dag_lstm")
    return cfg


def graph_for(kind: str, clause: Clause) -> FormulaGraph:
    """GCN family runs on name-shared trees, MPNNs on shared-subexpression DAGs."""
    if kind in ("mpnn", "glstm_mpnn"):
        return build_shared_subexpr_dag(clause)
    return build_name_shared_tree(clause)


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------


def _ffn_params(ps: ParamStore, prefix: str, d_in: int, d: int):
    ps.xavier(f"{prefix}.W1", (d_in, d))
    ps.zeros(f"{prefix}.b1", (d,))
    ps.xavier(f"{prefix}.W2", (d, d))
    ps.zeros(f"{prefix}.b2", (d,))


def init_params(kind: str, cfg: EncoderConfig = EncoderConfig(), seed: int = 0) -> ParamStore:
    cfg = effective_config(kind, cfg)
    d, T = cfg.d, cfg.rounds
    ps = ParamStore(seed, cfg.dtype)
    if cfg.init.mode == "bag_of_characters":
        ps.xavier("embed.boc", (BOC_DIM, d))
    else:
        ps.xavier("embed.table", (cfg.init.n_classes, d))
    if kind in ("gcn", "boc_gcn"):
        for t in range(T):
            ps.xavier(f"gcn.W{t}", (d, d))
    elif kind == "rgcn":
        for t in range(T):
            ps.xavier(f"rgcn.W{t}.self", (d, d))
            for r in EDGE_TYPES:
                ps.xavier(f"rgcn.W{t}.{r}", (d, d))
    else:
        ps.xavier("mpnn.edge", (N_EDGE_KEYS, d))
        for t in range(T):
            _ffn_params(ps, f"mpnn.M{t}", 3 * d, d)
            _ffn_params(ps, f"mpnn.U{t}", 2 * d, d)
    if kind in GNN_ENCODERS[:3]:
        ps.xavier("out.W", (d, d))
        ps.zeros("out.b", (d,))
    if cfg.pooling_for(kind) == "dag_lstm":
        for gate in ("i", "o", "c"):
            ps.xavier(f"lstm.W{gate}", (2 * d, d))
            ps.zeros(f"lstm.b{gate}", (d,))
        ps.xavier("lstm.Wf", (3 * d, d))
        ps.zeros("lstm.bf", (d,))
    return ps


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------


def _as_batch(graphs) -> GraphBatch:
    if isinstance(graphs, GraphBatch):
        return graphs
    if isinstance(graphs, FormulaGraph):
        return batch_graphs([graphs])
    return batch_graphs(list(graphs))


def _const(x, ps: ParamStore) -> Tensor:
    return Tensor(np.asarray(x, dtype=ps.dtype))


def initial_features(batch: GraphBatch, params: ParamStore, cfg: EncoderConfig) -> Tensor:
    if cfg.init.mode == "bag_of_characters":
        counts = np.stack([boc_features(l) for l in batch.labels]) if batch.labels else np.zeros((0, BOC_DIM))
        return _const(counts, params) @ params["embed.boc"]
    classes = [
        hash_feature(node_class_key(_node(batch, u), cfg.policy), cfg.init.n_classes)
        for u in range(batch.n_nodes)
    ]
    return ad.gather(params["embed.table"], np.asarray(classes, dtype=np.int64))


def _node(batch: GraphBatch, u: int) -> Node:
    return Node(batch.labels[u], NODE_KINDS[batch.kinds[u]])


def _pool(h: Tensor, batch: GraphBatch, how: str) -> Tensor:
    if how == "sum":
        return ad.segment_sum(h, batch.node_graph, batch.n_graphs)
    if how == "max":
        return ad.segment_max(h, batch.node_graph, batch.n_graphs)
    raise ValueError(f"pooling {how!r} is not a plain reduction")


def linear(x: Tensor, W: Tensor, b: Optional[Tensor] = None) -> Tensor:
    y = x @ W
    return y if b is None else y + b


def ffn(x: Tensor, params: ParamStore, prefix: str) -> Tensor:
    """Two-layer feed-forward net with a relu hidden layer."""
    hidden = ad.relu(linear(x, params[f"{prefix}.W1"], params[f"{prefix}.b1"]))
    return linear(hidden, params[f"{prefix}.W2"], params[f"{prefix}.b2"])


def propagate(h: Tensor, src: np.ndarray, dst: np.ndarray, coef: np.ndarray, W: Tensor, n: int) -> Tensor:
    """``out[u] = sum over (v -> u) of coef * (h W)[v]``."""
    msgs = ad.gather(h @ W, src)
    if coef is not None:
        msgs = msgs * Tensor(coef.reshape(-1, 1).astype(h.dtype))
    return ad.segment_sum(msgs, dst, n)


def symmetric_adjacency(batch: GraphBatch):
    """Undirected pairs plus self loops and ``1/sqrt(deg(u) deg(v))`` weights."""
    n = batch.n_nodes
    loops = np.arange(n)
    src = np.concatenate([batch.src, batch.dst, loops])
    dst = np.concatenate([batch.dst, batch.src, loops])
    deg = np.bincount(dst, minlength=n).astype(np.float64)
    coef = 1.0 / np.sqrt(deg[src] * deg[dst])
    return src, dst, coef


# ---------------------------------------------------------------------------
# Encoders
# ---------------------------------------------------------------------------


def gcn_node_states(batch: GraphBatch, params: ParamStore, cfg: EncoderConfig) -> Tensor:
    act = ad.ACTIVATIONS[cfg.activation]
    h = initial_features(batch, params, cfg)
    src, dst, coef = symmetric_adjacency(batch)
    for t in range(cfg.rounds):
        h = act(propagate(h, src, dst, coef, params[f"gcn.W{t}"], batch.n_nodes))
    return h


def gcn_encode(graphs, params: ParamStore, cfg: EncoderConfig = EncoderConfig(), kind: str = "gcn") -> Tensor:
    batch = _as_batch(graphs)
    cfg = effective_config(kind, cfg)
    h = gcn_node_states(batch, params, cfg)
    out = linear(h, params["out.W"], params["out.b"])
    return _pool(out, batch, cfg.pooling_for(kind))


def boc_gcn_encode(graphs, params: ParamStore, cfg: EncoderConfig = EncoderConfig()) -> Tensor:
    return gcn_encode(graphs, params, cfg, kind="boc_gcn")


def relation_adjacency(batch: GraphBatch):
    """Per edge type: undirected pairs with ``1/|N_{u,r}|`` weights."""
    out = {}
    for r_idx, r in enumerate(EDGE_TYPES):
        sel = batch.edge_type == r_idx
        src = np.concatenate([batch.src[sel], batch.dst[sel]])
        dst = np.concatenate([batch.dst[sel], batch.src[sel]])
        deg = np.bincount(dst, minlength=batch.n_nodes).astype(np.float64)
        out[r] = (src, dst, 1.0 / deg[dst] if dst.size else np.zeros(0))
    return out


def rgcn_node_states(batch: GraphBatch, params: ParamStore, cfg: EncoderConfig) -> Tensor:
    act = ad.ACTIVATIONS[cfg.activation]
    h = initial_features(batch, params, cfg)
    rel = relation_adjacency(batch)
    for t in range(cfg.rounds):
        acc = h @ params[f"rgcn.W{t}.self"]
        for r in EDGE_TYPES:
            src, dst, coef = rel[r]
            if src.size:
                acc = acc + propagate(h, src, dst, coef, params[f"rgcn.W{t}.{r}"], batch.n_nodes)
        h = act(acc)
    return h


def rgcn_encode(graphs, params: ParamStore, cfg: EncoderConfig = EncoderConfig()) -> Tensor:
    batch = _as_batch(graphs)
    if batch.edge_type.size and batch.edge_type.max() >= len(EDGE_TYPES):
        raise ValueError("unknown edge type in graph")
    h = rgcn_node_states(batch, params, cfg)
    out = linear(h, params["out.W"], params["out.b"])
    return _pool(out, batch, cfg.pooling_for("rgcn"))


def edge_keys(edge_type: np.ndarray, arg_position: np.ndarray, direction: int) -> np.ndarray:
    """Row of the edge-embedding table for (type, clamped position, direction)."""
    pos = np.minimum(arg_position, MAX_ARG)
    return (edge_type * (MAX_ARG + 1) + pos) * 2 + direction


def message_pairs(batch: GraphBatch, bidirectional: bool):
    """Receivers, senders and edge keys. Direction 0: child to parent; 1: parent to child."""
    recv, send = batch.src, batch.dst
    keys = edge_keys(batch.edge_type, batch.arg_position, 0)
    if bidirectional:
        recv = np.concatenate([recv, batch.dst])
        send = np.concatenate([send, batch.src])
        keys = np.concatenate([keys, edge_keys(batch.edge_type, batch.arg_position, 1)])
    return recv, send, keys


def mpnn_node_states(batch: GraphBatch, params: ParamStore, cfg: EncoderConfig) -> Tensor:
    h = initial_features(batch, params, cfg)
    recv, send, keys = message_pairs(batch, cfg.bidirectional_messages)
    e = ad.gather(params["mpnn.edge"], keys)
    n = batch.n_nodes
    for t in range(cfg.rounds):
        inp = ad.concat([ad.gather(h, recv), ad.gather(h, send), e], axis=1)
        m = ad.segment_sum(ffn(inp, params, f"mpnn.M{t}"), recv, n)
        h = h + ffn(ad.concat([h, m], axis=1), params, f"mpnn.U{t}")
    return h


def dag_lstm_pool(graphs, node_inputs: Tensor, params: ParamStore, edge_table: Optional[Tensor] = None) -> Tensor:
    """Level-synchronous DAG-LSTM from leaves to roots; returns the root hidden states.

    ``edge_table`` defaults to ``params["mpnn.edge"]``; child edges use the
    direction-0 (child to parent) key.
    """
    batch = _as_batch(graphs)
    edge_table = params["mpnn.edge"] if edge_table is None else edge_table
    n, d = node_inputs.shape
    if n != batch.n_nodes:
        raise ad.ShapeError(f"dag_lstm_pool: {n} input rows for {batch.n_nodes} nodes")
    levels = batch.levels()
    if not levels:
        raise ValueError("dag_lstm_pool: empty graph has no root")
    W = {g: params[f"lstm.W{g}"] for g in "iocf"}
    b = {g: params[f"lstm.b{g}"] for g in "iocf"}
    edge_level = batch.node_level[batch.src]
    edge_emb_keys = edge_keys(batch.edge_type, batch.arg_position, 0)

    row_of = np.full(n, -1, dtype=np.int64)
    local_of = np.zeros(n, dtype=np.int64)
    H_parts: list[Tensor] = []
    C_parts: list[Tensor] = []
    filled = 0
    for k, members in enumerate(levels):
        nk = len(members)
        local_of[members] = np.arange(nk)
        x = ad.gather(node_inputs, members)
        if k == 0:
            h_sum = _const(np.zeros((nk, d)), params)
            forget_sum = None
        else:
            sel = np.flatnonzero(edge_level == k)
            parent_local = local_of[batch.src[sel]]
            child_rows = row_of[batch.dst[sel]]
            H_all = ad.concat(H_parts, axis=0) if len(H_parts) > 1 else H_parts[0]
            C_all = ad.concat(C_parts, axis=0) if len(C_parts) > 1 else C_parts[0]
            h_child = ad.gather(H_all, child_rows)
            h_sum = ad.segment_sum(h_child, parent_local, nk)
            f_in = ad.concat(
                [ad.gather(x, parent_local), h_child, ad.gather(edge_table, edge_emb_keys[sel])], axis=1
            )
            f = ad.sigmoid(linear(f_in, W["f"], b["f"]))
            forget_sum = ad.segment_sum(f * ad.gather(C_all, child_rows), parent_local, nk)
        xh = ad.concat([x, h_sum], axis=1)
        i = ad.sigmoid(linear(xh, W["i"], b["i"]))
        o = ad.sigmoid(linear(xh, W["o"], b["o"]))
        c_hat = ad.tanh(linear(xh, W["c"], b["c"]))
        c = i * c_hat
        if forget_sum is not None:
            c = c + forget_sum
        h = o * ad.tanh(c)
        H_parts.append(h)
        C_parts.append(c)
        row_of[members] = filled + np.arange(nk)
        filled += nk
    H_all = ad.concat(H_parts, axis=0) if len(H_parts) > 1 else H_parts[0]
    return ad.gather(H_all, row_of[batch.roots])


def mpnn_encode(graphs, params: ParamStore, cfg: EncoderConfig = EncoderConfig(), kind: str = "mpnn") -> Tensor:
    batch = _as_batch(graphs)
    cfg = effective_config(kind, cfg)
    h = mpnn_node_states(batch, params, cfg)
    pooling = cfg.pooling_for(kind)
    if pooling == "dag_lstm":
        return dag_lstm_pool(batch, h, params)
    return _pool(h, batch, pooling)


def glstm_mpnn_encode(graphs, params: ParamStore, cfg: EncoderConfig = EncoderConfig()) -> Tensor:
    return mpnn_encode(graphs, params, cfg, kind="glstm_mpnn")


_FORWARD = {
    "gcn": gcn_encode,
    "boc_gcn": boc_gcn_encode,
    "rgcn": rgcn_encode,
    "mpnn": mpnn_encode,
    "glstm_mpnn": glstm_mpnn_encode,
}


class GraphEncoder:
    """Graph construction + parameters + forward pass for one GNN encoder kind."""

    def __init__(self, kind: str, cfg: EncoderConfig = EncoderConfig(), seed: int = 0,
                 params: Optional[ParamStore] = None):
        self.kind = kind
        self.cfg = effective_config(kind, cfg)
        self.seed = seed
        self.params = params if params is not None else init_params(kind, self.cfg, seed)

    def graph(self, clause: Clause) -> FormulaGraph:
        return graph_for(self.kind, clause)

    def forward(self, graphs, params: Optional[ParamStore] = None) -> Tensor:
        return _FORWARD[self.kind](graphs, self.params if params is None else params, self.cfg)

    def encode_graphs(self, graphs: Sequence[FormulaGraph]) -> np.ndarray:
        if not graphs:
            return np.zeros((0, self.cfg.d), dtype=self.params.dtype)
        return self.forward(batch_graphs(graphs)).data

    def encode(self, clause: Clause) -> FeatureVector:
        vec = self.forward(self.graph(clause)).data[0]
        return FeatureVector(vec, self.kind, self.cfg.d, clause.id)

    def encode_many(self, clauses: Sequence[Clause], batch_size: int = 64) -> list[FeatureVector]:
        out = []
        for lo in range(0, len(clauses), batch_size):
            chunk = clauses[lo: lo + batch_size]
            vecs = self.encode_graphs([self.graph(c) for c in chunk])
            out.extend(FeatureVector(v, self.kind, self.cfg.d, c.id) for c, v in zip(chunk, vecs))
        return out
