import logging

import numpy as np
import pytest

from clausevec.fol import Clause, Fn, Literal, Var, parse_cnf_problem
from clausevec.graphs import (
    BOC_DIM, EDGE_TYPES, NODE_KINDS, FormulaGraph, GraphCycleError, Edge, Node, NodeFeatureInit,
    batch_graphs, boc_features, build_name_shared_tree, build_shared_subexpr_dag, expand_literals,
    node_class_key, topological_levels,
)

from oracles import parse_tree_size


def _clause(text):
    return parse_cnf_problem(text).clauses[0]


def _check_levels(g):
    levels = topological_levels(g)
    level_of = {u: k for k, members in enumerate(levels) for u in members}
    assert sorted(level_of) == list(range(g.n_nodes))
    for e in g.edges:
        assert level_of[e.src] > level_of[e.dst]
    return level_of


def test_unit_tree_shape(unit_clause):
    g = build_name_shared_tree(unit_clause)
    assert g.n_nodes == 6 and len(g.edges) == 5
    assert [n.kind for n in g.nodes] == ["clause_root", "predicate", "variable", "variable", "name_node", "name_node"]
    assert [n.label for n in g.nodes[4:]] == ["A", "B"]
    assert [e.edge_type for e in g.edges].count("to_name") == 2


def test_example_tree_name_nodes(example_clause):
    g = build_name_shared_tree(example_clause)
    names = [n.label for n in g.nodes if n.kind == "name_node"]
    assert names == ["A", "B", "C"]
    a = next(i for i, n in enumerate(g.nodes) if n.kind == "name_node" and n.label == "A")
    # A occurs three times: p(A) and both f(A)
    assert sum(1 for e in g.edges if e.dst == a and e.edge_type == "to_name") == 3
    assert sum(1 for n in g.nodes if n.kind == "negation") == 1


def test_example_dag_shares_fA(example_clause):
    g = build_shared_subexpr_dag(example_clause)
    (f,) = [i for i, n in enumerate(g.nodes) if n.label == "f"]
    assert g.nodes[f].kind == "shared_node"
    parents = [g.nodes[e.src].label for e in g.edges if e.dst == f]
    assert parents == ["q", "q"]
    assert g.n_nodes < build_name_shared_tree(example_clause).n_nodes
    assert g.n_nodes <= parse_tree_size(example_clause)


def test_repeated_argument_keeps_positions():
    g = build_shared_subexpr_dag(_clause("cnf(x, axiom, r(A,A))."))
    (a,) = [i for i, n in enumerate(g.nodes) if n.label == "A"]
    assert sorted(e.arg_position for e in g.edges if e.dst == a) == [1, 2]


def test_unit_dag_levels(unit_clause):
    g = build_shared_subexpr_dag(unit_clause)
    levels = [{g.nodes[u].label for u in lv} for lv in topological_levels(g)]
    assert levels == [{"A", "B"}, {"r"}, {"|"}]


def test_equality_args_are_commutative():
    c = _clause("cnf(e, axiom, f(X) = a).")
    for build in (build_name_shared_tree, build_shared_subexpr_dag):
        g = build(c)
        (eq,) = [i for i, n in enumerate(g.nodes) if n.label == "="]
        assert {e.edge_type for e in g.edges if e.src == eq} == {"commutative_arg"}
        assert {e.edge_type for e in g.edges if e.src == g.root} == {"commutative_arg"}


def test_cycle_detected():
    g = FormulaGraph([Node("|", "clause_root"), Node("f", "function")], [Edge(0, 1, 1, "other"), Edge(1, 0, 1, "other")])
    with pytest.raises(GraphCycleError):
        topological_levels(g)


def test_graph_oracles_on_corpus(corpus):
    for c in corpus:
        tree = build_name_shared_tree(c)
        dag = build_shared_subexpr_dag(c)
        assert dag.n_nodes <= parse_tree_size(c) <= tree.n_nodes
        assert expand_literals(dag) == c.literals
        assert expand_literals(tree) == c.literals
        _check_levels(tree)
        _check_levels(dag)
        assert {n.kind for n in tree.nodes + dag.nodes} <= set(NODE_KINDS)
        assert {e.edge_type for e in tree.edges + dag.edges} <= set(EDGE_TYPES)


def test_renaming_gives_same_structure(example_clause):
    renamed = _clause("cnf(c1, axiom, (p(X1) | ~q(Y1,f(X1)) | q(Z1,f(X1)))).")
    for build in (build_name_shared_tree, build_shared_subexpr_dag):
        a, b = build(example_clause), build(renamed)
        assert a.to_json(labels=False) == b.to_json(labels=False)
        assert a.to_json() != b.to_json()


def test_json_round_trip_and_determinism(corpus):
    for c in corpus[:30]:
        g = build_shared_subexpr_dag(c)
        text = g.to_json()
        assert build_shared_subexpr_dag(c).to_json() == text
        assert FormulaGraph.from_json(text) == g


def test_boc_features():
    v = boc_features("f_1")
    assert v.shape == (BOC_DIM,)
    assert v[ord("f") - 32] == 1 and v[ord("_") - 32] == 1 and v[ord("1") - 32] == 1 and v.sum() == 3
    assert boc_features("aa")[ord("a") - 32] == 2


def test_boc_warns_on_non_ascii(caplog):
    with caplog.at_level(logging.WARNING):
        v = boc_features("fé")
    assert v.sum() == 1
    assert "non-ASCII" in caplog.text


def test_node_class_keys(example_clause):
    keys = [node_class_key(n) for n in build_name_shared_tree(example_clause).nodes]
    assert keys[0] == "#root"
    assert "#neg" in keys and "pred:q" in keys and "fn:f" in keys
    assert keys.count("#var-name") == 3
    assert node_class_key(Node("sk2", "function")) == "#skolem"
    assert node_class_key(Node("c0", "name_node")) == "name:c0"
    with pytest.raises(ValueError):
        NodeFeatureInit("bogus")


def test_batch_is_disjoint_union(example_problem):
    gs = [build_shared_subexpr_dag(c) for c in example_problem]
    b = batch_graphs(gs)
    assert b.n_nodes == sum(g.n_nodes for g in gs)
    assert b.n_graphs == 2
    assert list(b.roots) == [0, gs[0].n_nodes]
    assert np.all(b.node_graph[b.src] == b.node_graph[b.dst])
    assert np.all(b.node_level[b.src] > b.node_level[b.dst])
    assert sum(len(lv) for lv in b.levels()) == b.n_nodes


def test_empty_clause_graph():
    c = Clause("e", "derived", ())
    for build in (build_name_shared_tree, build_shared_subexpr_dag):
        g = build(c)
        assert g.n_nodes == 1 and not g.edges
        assert topological_levels(g) == [[0]]
        assert expand_literals(g) == ()
