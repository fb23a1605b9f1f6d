"""Acceptance criteria, each checked at its stated tolerance and time budget."""

import random
import time
from collections import Counter

import numpy as np
import pytest

from clausevec import autodiff as ad
from clausevec.bench import ENCODERS, run_bench
from clausevec.cli import gradcheck_encoder
from clausevec.export import dumps
from clausevec.fol import Clause, Fn, GeneratorConfig, Literal, Var, generate_random_clauses, problem_to_string
from clausevec.gnn import GNN_ENCODERS, EncoderConfig, GraphEncoder
from clausevec.graphs import build_name_shared_tree, build_shared_subexpr_dag, expand_literals, topological_levels
from clausevec.patterns import (
    PatternConfig, chain_patterns, clause_chain_patterns, encode_chain_patterns, encode_term_walks, hash_feature,
    term_walks,
)
from clausevec.train import ToyTask, Trainer, balanced_corpus

from oracles import brute_force_chains, brute_force_walks, parse_tree_size
from test_patterns import GOLDEN

pytestmark = pytest.mark.acceptance


def _rename(clause, suffix="_r"):
    def term(t):
        if isinstance(t, Var):
            return Var(t.name + suffix)
        return Fn(t.name, tuple(term(a) for a in t.args))

    return Clause(clause.id, clause.role, tuple(
        Literal(l.positive, l.predicate, tuple(term(a) for a in l.args)) for l in clause.literals
    ))


def _shuffle(clause, rng):
    lits = list(clause.literals)
    rng.shuffle(lits)
    return Clause(clause.id, clause.role, tuple(lits))


def test_criterion_1_term_walk_example(example_clause, verdict):
    t0 = time.perf_counter()
    walks = term_walks(example_clause)
    frozen = Counter({
        ("⊕", "p", "*"): 1, ("⊖", "q", "*"): 1, ("⊖", "q", "f"): 1,
        ("q", "f", "*"): 2, ("⊕", "q", "*"): 1, ("⊕", "q", "f"): 1,
    })
    vec = encode_term_walks(example_clause).values
    ok = (
        walks == frozen
        and walks == brute_force_walks(example_clause)
        and vec[hash_feature("walk|q|f|*", 64)] == 2
        and int(vec.sum()) == 7
    )
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 1.0
    verdict(1, ok, f"term-walk example: 6 distinct walks, (q,f,*) x{walks[('q', 'f', '*')]}, {elapsed:.3f}s")
    assert ok


def test_criterion_2_chain_pattern_example(example_problem, verdict):
    t0 = time.perf_counter()
    d = 64
    patterns = set()
    for c in example_problem:
        patterns |= {p.term_string() for p in clause_chain_patterns(c)}
    ok = patterns == {"p(*)", "q(*,f(*))", "q(*,*)", "r(*,*)"}
    neg_lit = example_problem.clauses[0].literals[1]
    for c in example_problem:
        vec = encode_chain_patterns(c, PatternConfig(d=d)).values
        for lit in c.literals:
            for pat in chain_patterns(lit):
                idx = hash_feature(pat.linearization(), d) + (0 if lit.positive else d)
                ok &= vec[idx] > 0 and (idx >= d) == (not lit.positive)
    ok &= all(not p.positive for p in chain_patterns(neg_lit))
    first = encode_chain_patterns(example_problem.clauses[0]).values
    ok &= set(np.flatnonzero(first[64:])) == {16, 46} and set(np.flatnonzero(first[:64])) == {38, 48, 61}
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 1.0
    verdict(2, ok, f"chain-pattern example: patterns {sorted(patterns)}, halves by polarity, {elapsed:.3f}s")
    assert ok


def test_criterion_3_invariance_suite(verdict):
    t0 = time.perf_counter()
    gen = GeneratorConfig(n_clauses=1000, equality_rate=0.1, max_depth=3)
    clauses = list(generate_random_clauses(2024, gen).clauses)
    rng = random.Random(0)
    shuffled = [_shuffle(c, rng) for c in clauses]
    renamed = [_rename(c) for c in clauses]
    failures = []

    cfg = PatternConfig(d=64)
    for enc in (encode_term_walks, encode_chain_patterns):
        for c, s, r in zip(clauses, shuffled, renamed):
            base = enc(c, cfg).values
            if not np.array_equal(base, enc(s, cfg).values):
                failures.append(f"{enc.__name__} permutation {c.id}")
            if not np.array_equal(base, enc(r, cfg).values):
                failures.append(f"{enc.__name__} renaming {c.id}")
            parts = [enc(Clause("", "axiom", (l,)), cfg).values for l in c.literals]
            total = np.sum(parts, axis=0) if parts else np.zeros_like(base)
            if not np.array_equal(base, total):
                failures.append(f"{enc.__name__} additivity {c.id}")

    worst = {}
    for kind in GNN_ENCODERS:
        enc = GraphEncoder(kind, EncoderConfig(dtype="f32"), seed=1)
        base = np.stack([v.values for v in enc.encode_many(clauses)])
        perm = np.stack([v.values for v in enc.encode_many(shuffled)])
        worst[kind] = float(np.abs(base - perm).max())
        if worst[kind] > 1e-5:
            failures.append(f"{kind} permutation {worst[kind]:.2e}")
        if kind != "boc_gcn":
            ren = np.stack([v.values for v in enc.encode_many(renamed)])
            if not np.array_equal(base, ren):
                failures.append(f"{kind} renaming")
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 120
    worst_txt = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    verdict(3, ok, f"invariances on {len(clauses)} clauses, f32 GNN permutation max |diff|: {worst_txt}; "
                   f"{len(failures)} failures; {elapsed:.1f}s")
    assert not failures, failures[:10]
    assert elapsed < 120


def test_criterion_4_oracle_equivalence(verdict):
    t0 = time.perf_counter()
    gen = GeneratorConfig(n_clauses=600, max_literals=4, max_depth=3, equality_rate=0.1, min_literals=0)
    clauses = generate_random_clauses(77, gen).clauses
    assert all(len(c) <= 4 for c in clauses)
    bad = 0
    for c in clauses:
        if term_walks(c) != brute_force_walks(c):
            bad += 1
        for lit in c.literals:
            got = Counter()
            for pat, k in chain_patterns(lit).items():
                got[("pos" if pat.positive else "neg", pat.term_string())] += k
            if got != brute_force_chains(lit):
                bad += 1
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and elapsed < 60
    verdict(4, ok, f"brute-force oracle agreement on {len(clauses)} clauses, {bad} mismatches, {elapsed:.1f}s")
    assert ok


def test_criterion_5_graph_oracles(verdict):
    t0 = time.perf_counter()
    gen = GeneratorConfig(n_clauses=1000, equality_rate=0.1, max_depth=3)
    clauses = generate_random_clauses(5, gen).clauses
    bad = []
    for c in clauses:
        dag = build_shared_subexpr_dag(c)
        tree = build_name_shared_tree(c)
        if not dag.n_nodes <= parse_tree_size(c) <= tree.n_nodes:
            bad.append(("size", c.id))
        if expand_literals(dag) != c.literals:
            bad.append(("expand", c.id))
        for g in (dag, tree):
            level = {u: k for k, lv in enumerate(topological_levels(g)) for u in lv}
            if len(level) != g.n_nodes or any(level[e.src] <= level[e.dst] for e in g.edges):
                bad.append(("levels", c.id))
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 60
    verdict(5, ok, f"DAG size/re-expansion/level checks on {len(clauses)} clauses, {len(bad)} failures, "
                   f"{elapsed:.1f}s")
    assert ok, bad[:10]


@pytest.mark.slow
def test_criterion_6_gradient_checks(verdict):
    t0 = time.perf_counter()
    errors = {kind: gradcheck_encoder(kind, seed=0, n_clauses=25, d=64, rounds=2) for kind in GNN_ENCODERS}
    elapsed = time.perf_counter() - t0
    ok = all(e < 1e-4 for e in errors.values()) and elapsed < 300
    txt = ", ".join(f"{k} {e:.1e}" for k, e in errors.items())
    verdict(6, ok, f"float64 gradcheck over 25 clauses, max rel error: {txt}; {elapsed:.1f}s")
    assert ok


@pytest.mark.slow
def test_criterion_7_learnability(verdict):
    t0 = time.perf_counter()
    task = ToyTask("contains_predicate", "p0")
    clauses, labels = balanced_corpus(0, task, 200)
    enc = GraphEncoder("mpnn", EncoderConfig(), seed=0)
    report = Trainer(enc, seed=0).fit(clauses, labels, epochs=50, task=task.describe(),
                                      split=(1.0, 0.0), target_loss=0.1)
    best = report.min_train_loss()
    epoch = next(e.epoch for e in report.epochs if e.train_loss == best)
    elapsed = time.perf_counter() - t0
    ok = best < 0.1 and elapsed < 600
    verdict(7, ok, f"MPNN + linear head on 200 clauses: train BCE {best:.4f} at epoch {epoch}, {elapsed:.1f}s")
    assert ok


@pytest.mark.slow
def test_criterion_8_runtime_ordering(verdict):
    t0 = time.perf_counter()
    clauses = generate_random_clauses(0, GeneratorConfig(n_clauses=1000)).clauses
    report = run_bench(clauses, ENCODERS, repetitions=3, cfg=EncoderConfig(dtype="f32"))
    med = {k: v["vectorize"]["median_us"] for k, v in report["encoders"].items()}
    gnn = [med[k] for k in GNN_ENCODERS]
    ok = (
        med["term_walks"] <= med["chain_patterns"]
        and all(med["chain_patterns"] < g for g in gnn)
        and med["glstm_mpnn"] == max(gnn)
    )
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300
    txt = ", ".join(f"{k} {v:.0f}us" for k, v in med.items())
    verdict(8, ok, f"median per-clause vectorize time on 1000 clauses: {txt}; {elapsed:.1f}s")
    assert ok


def _full_run(seed):
    gen = GeneratorConfig(n_clauses=60, equality_rate=0.1)
    problem = generate_random_clauses(seed, gen)
    out = [problem_to_string(problem).encode()]
    for name in ENCODERS:
        cfg = EncoderConfig(d=16)
        if name == "term_walks":
            vecs = [encode_term_walks(c, PatternConfig(d=16)) for c in problem]
        elif name == "chain_patterns":
            vecs = [encode_chain_patterns(c, PatternConfig(d=16)) for c in problem]
        else:
            vecs = GraphEncoder(name, cfg, seed).encode_many(problem.clauses)
        out.append(dumps(vecs, "bin"))
        out.append(dumps(vecs, "json"))
    return out


def test_criterion_9_determinism_and_hash_stability(verdict):
    t0 = time.perf_counter()
    same_run = _full_run(13) == _full_run(13)
    golden_bad = [(t, i, d) for t, i, d in GOLDEN if hash_feature(t, d) != i]
    xavier_same = np.array_equal(ad.xavier_init((8, 8), 5).data, ad.xavier_init((8, 8), 5).data)
    elapsed = time.perf_counter() - t0
    ok = same_run and not golden_bad and xavier_same and len(GOLDEN) == 20 and elapsed < 60
    verdict(9, ok, f"byte-identical repeated runs: {same_run}; golden hash mismatches {len(golden_bad)}/20; "
                   f"{elapsed:.1f}s")
    assert ok
