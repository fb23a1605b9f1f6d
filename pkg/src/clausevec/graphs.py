"""Graph views of clauses: name-shared parse trees and subexpression-sharing DAGs."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .fol import DEFAULT_POLICY, EQUALITY, Clause, Fn, Literal, SkolemPolicy, Term, Var, classify_symbol

log = logging.getLogger(__name__)

NODE_KINDS = ("clause_root", "negation", "predicate", "function", "variable", "name_node", "shared_node")
EDGE_TYPES = ("to_name", "commutative_arg", "other")
KIND_INDEX = {k: i for i, k in enumerate(NODE_KINDS)}
EDGE_INDEX = {t: i for i, t in enumerate(EDGE_TYPES)}

ROOT_LABEL = "|"
NEG_LABEL = "~"
VAR_OCC_LABEL = "*"


class Node(NamedTuple):
    label: str
    kind: str


class Edge(NamedTuple):
    src: int
    dst: int
    arg_position: int
    edge_type: str


class GraphCycleError(ValueError):
    pass


@dataclass
class FormulaGraph:
    """Directed multigraph, edges point parent -> child."""

    nodes: list[Node]
    edges: list[Edge]
    root: int = 0
    _levels: Optional[list] = field(default=None, repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def children(self, u: int) -> list[Edge]:
        return [e for e in self.edges if e.src == u]

    def to_json(self, labels: bool = True) -> str:
        doc = {
            "root": self.root,
            "nodes": [
                {"label": n.label if labels else "", "kind": n.kind} for n in self.nodes
            ],
            "edges": [e._asdict() for e in self.edges],
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "FormulaGraph":
        doc = json.loads(text)
        nodes = [Node(n["label"], n["kind"]) for n in doc["nodes"]]
        edges = [Edge(e["src"], e["dst"], e["arg_position"], e["edge_type"]) for e in doc["edges"]]
        return cls(nodes, edges, doc["root"])


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def _arg_edge_type(predicate: Optional[str]) -> str:
    return "commutative_arg" if predicate == EQUALITY else "other"


def build_name_shared_tree(clause: Clause) -> FormulaGraph:
    """Parse tree with one shared name node per distinct variable/constant name.

    Name nodes are appended after the tree nodes, in order of first
    occurrence; their ``to_name`` edges follow the tree edges.
    """
    nodes = [Node(ROOT_LABEL, "clause_root")]
    edges: list[Edge] = []
    name_links: list[tuple[int, str]] = []

    def add_term(t: Term, parent: int, pos: int, etype: str):
        if isinstance(t, Var):
            u = len(nodes)
            nodes.append(Node(VAR_OCC_LABEL, "variable"))
            edges.append(Edge(parent, u, pos, etype))
            name_links.append((u, t.name))
            return
        u = len(nodes)
        nodes.append(Node(t.name, "function"))
        edges.append(Edge(parent, u, pos, etype))
        if not t.args:
            name_links.append((u, t.name))
        for i, a in enumerate(t.args, 1):
            add_term(a, u, i, "other")

    for lit in clause.literals:
        parent = 0
        if not lit.positive:
            nodes.append(Node(NEG_LABEL, "negation"))
            edges.append(Edge(0, len(nodes) - 1, 0, "commutative_arg"))
            parent = len(nodes) - 1
        atom = len(nodes)
        nodes.append(Node(lit.predicate, "predicate"))
        edges.append(Edge(parent, atom, 0, "commutative_arg" if parent == 0 else "other"))
        etype = _arg_edge_type(lit.predicate)
        for i, a in enumerate(lit.args, 1):
            add_term(a, atom, i, etype)

    name_index: dict[str, int] = {}
    for occ, name in name_links:
        if name not in name_index:
            name_index[name] = len(nodes)
            nodes.append(Node(name, "name_node"))
        edges.append(Edge(occ, name_index[name], 0, "to_name"))
    return FormulaGraph(nodes, edges, 0)


def build_shared_subexpr_dag(clause: Clause) -> FormulaGraph:
    """Maximally shared DAG: structurally equal subexpressions become one node."""
    nodes = [Node(ROOT_LABEL, "clause_root")]
    edges: list[Edge] = []
    memo: dict = {}
    indegree: list[int] = [0]

    def new_node(label: str, kind: str) -> int:
        nodes.append(Node(label, kind))
        indegree.append(0)
        return len(nodes) - 1

    def link(parent: int, child: int, pos: int, etype: str):
        edges.append(Edge(parent, child, pos, etype))
        indegree[child] += 1

    def term_node(t: Term) -> int:
        u = memo.get(t)
        if u is not None:
            return u
        if isinstance(t, Var):
            u = memo[t] = new_node(t.name, "name_node")
            return u
        u = memo[t] = new_node(t.name, "function")
        for i, a in enumerate(t.args, 1):
            link(u, term_node(a), i, "other")
        return u

    def atom_node(lit: Literal) -> int:
        key = ("atom", lit.predicate, lit.args)
        u = memo.get(key)
        if u is not None:
            return u
        u = memo[key] = new_node(lit.predicate, "predicate")
        etype = _arg_edge_type(lit.predicate)
        for i, a in enumerate(lit.args, 1):
            link(u, term_node(a), i, etype)
        return u

    for lit in clause.literals:
        if lit.positive:
            link(0, atom_node(lit), 0, "commutative_arg")
            continue
        key = ("neg", lit.predicate, lit.args)
        u = memo.get(key)
        if u is None:
            u = memo[key] = new_node(NEG_LABEL, "negation")
            link(u, atom_node(lit), 0, "other")
        link(0, u, 0, "commutative_arg")

    for u, n in enumerate(nodes):
        if n.kind == "function" and indegree[u] > 1:
            nodes[u] = Node(n.label, "shared_node")
    return FormulaGraph(nodes, edges, 0)


# ---------------------------------------------------------------------------
# Schedules, oracles, features
# ---------------------------------------------------------------------------


def topological_levels(graph: FormulaGraph) -> list[list[int]]:
    """Leaves at level 0; every other node one above its highest child."""
    if graph._levels is not None:
        return graph._levels
    n = graph.n_nodes
    parents: list[list[int]] = [[] for _ in range(n)]
    pending = [0] * n
    for e in graph.edges:
        parents[e.dst].append(e.src)
        pending[e.src] += 1
    level = [0] * n
    frontier = [u for u in range(n) if pending[u] == 0]
    done = 0
    while frontier:
        nxt = []
        for v in frontier:
            done += 1
            for p in parents[v]:
                level[p] = max(level[p], level[v] + 1)
                pending[p] -= 1
                if pending[p] == 0:
                    nxt.append(p)
        frontier = nxt
    if done != n:
        raise GraphCycleError("graph has a cycle; no topological schedule")
    out: list[list[int]] = [[] for _ in range(max(level) + 1 if n else 0)]
    for u in range(n):
        out[level[u]].append(u)
    graph._levels = out
    return out


def expand_literals(graph: FormulaGraph) -> tuple[Literal, ...]:
    """Unfold a clause graph (either construction) back into literals."""
    kids: list[list[Edge]] = [[] for _ in range(graph.n_nodes)]
    for e in graph.edges:
        kids[e.src].append(e)

    def term(u: int) -> Term:
        node = graph.nodes[u]
        if node.kind == "variable":
            (name_edge,) = [e for e in kids[u] if e.edge_type == "to_name"]
            return Var(graph.nodes[name_edge.dst].label)
        if node.kind == "name_node":
            return Var(node.label)
        args = sorted((e for e in kids[u] if e.edge_type != "to_name"), key=lambda e: e.arg_position)
        return Fn(node.label, tuple(term(e.dst) for e in args))

    def atom(u: int, positive: bool) -> Literal:
        args = sorted(kids[u], key=lambda e: e.arg_position)
        return Literal(positive, graph.nodes[u].label, tuple(term(e.dst) for e in args))

    out = []
    for e in kids[graph.root]:
        node = graph.nodes[e.dst]
        if node.kind == "negation":
            (inner,) = kids[e.dst]
            out.append(atom(inner.dst, False))
        else:
            out.append(atom(e.dst, True))
    return tuple(out)


BOC_DIM = 95


def boc_features(symbol: str) -> np.ndarray:
    """Counts of printable ASCII characters (codes 32..126) in ``symbol``."""
    vec = np.zeros(BOC_DIM, dtype=np.float64)
    skipped = 0
    for ch in symbol:
        code = ord(ch)
        if 32 <= code <= 126:
            vec[code - 32] += 1
        else:
            skipped += 1
    if skipped:
        log.warning("boc_features: ignored %d non-ASCII character(s) in %r", skipped, symbol)
    return vec


def node_class_key(node: Node, policy: SkolemPolicy = DEFAULT_POLICY) -> str:
    """Label class used for learned initial embeddings; blind to variable names."""
    kind = node.kind
    if kind == "clause_root":
        return "#root"
    if kind == "negation":
        return "#neg"
    if kind == "variable":
        return "#var"
    if kind == "predicate":
        return "pred:" + node.label
    cls = classify_symbol(node.label, policy)
    if cls == "variable":
        return "#var-name" if kind == "name_node" else "#var"
    if cls == "skolem":
        return "#skolem"
    if kind == "name_node":
        return "name:" + node.label
    return "fn:" + node.label


@dataclass(frozen=True)
class NodeFeatureInit:
    mode: str = "label_class_lookup"  # or "bag_of_characters"
    n_classes: int = 256

    def __post_init__(self):
        if self.mode not in ("label_class_lookup", "bag_of_characters"):
            raise ValueError(f"unknown node feature mode {self.mode!r}")


# ---------------------------------------------------------------------------
# Batching
# ---------------------------------------------------------------------------


@dataclass
class GraphBatch:
    """Disjoint union of graphs with flat index arrays."""

    graphs: list[FormulaGraph]
    labels: list[str]
    kinds: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    edge_type: np.ndarray
    arg_position: np.ndarray
    node_graph: np.ndarray
    roots: np.ndarray
    node_level: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.labels)

    @property
    def n_graphs(self) -> int:
        return len(self.graphs)

    def levels(self) -> list[np.ndarray]:
        if self.n_nodes == 0:
            return []
        top = int(self.node_level.max())
        return [np.flatnonzero(self.node_level == k) for k in range(top + 1)]


def batch_graphs(graphs: Sequence[FormulaGraph]) -> GraphBatch:
    labels, kinds, src, dst, et, ap, ng, roots, lv = [], [], [], [], [], [], [], [], []
    offset = 0
    for gi, g in enumerate(graphs):
        for n in g.nodes:
            labels.append(n.label)
            kinds.append(KIND_INDEX[n.kind])
        for e in g.edges:
            src.append(e.src + offset)
            dst.append(e.dst + offset)
            et.append(EDGE_INDEX[e.edge_type])
            ap.append(e.arg_position)
        ng.extend([gi] * g.n_nodes)
        roots.append(g.root + offset)
        level = np.zeros(g.n_nodes, dtype=np.int64)
        for k, members in enumerate(topological_levels(g)):
            level[members] = k
        lv.append(level)
        offset += g.n_nodes
    as_int = lambda xs: np.asarray(xs, dtype=np.int64)
    return GraphBatch(
        list(graphs), labels, as_int(kinds), as_int(src), as_int(dst), as_int(et), as_int(ap),
        as_int(ng), as_int(roots), np.concatenate(lv) if lv else as_int([]),
    )
