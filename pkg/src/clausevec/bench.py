"""Per-clause, per-phase vectorization timing."""

from __future__ import annotations

import logging
import time
from typing import Optional, Sequence

import numpy as np

from .fol import Clause, clause_to_string, parse_cnf_problem
from .gnn import GNN_ENCODERS, EncoderConfig, GraphEncoder
from .patterns import PatternConfig, encode_chain_patterns, encode_term_walks

log = logging.getLogger(__name__)

ENCODERS = ("term_walks", "chain_patterns") + GNN_ENCODERS
PHASES = ("parse", "graph_build", "encode", "vectorize")
MIN_STABLE_CLAUSES = 100


class Vectorizer:
    """Uniform two-phase interface: ``prepare`` (graph build) then ``encode``."""

    def __init__(self, name: str, cfg: EncoderConfig = EncoderConfig(), seed: int = 0):
        if name not in ENCODERS:
            raise ValueError(f"unknown encoder {name!r}; choose from {', '.join(ENCODERS)}")
        self.name = name
        self.pattern_cfg = PatternConfig(d=cfg.d, policy=cfg.policy)
        self.gnn = GraphEncoder(name, cfg, seed) if name in GNN_ENCODERS else None

    def prepare(self, clause: Clause):
        return clause if self.gnn is None else self.gnn.graph(clause)

    def encode_prepared(self, clause: Clause, prepared) -> np.ndarray:
        if self.name == "term_walks":
            return encode_term_walks(clause, self.pattern_cfg).values
        if self.name == "chain_patterns":
            return encode_chain_patterns(clause, self.pattern_cfg).values
        return self.gnn.forward(prepared).data[0]

    def vectorize(self, clause: Clause) -> np.ndarray:
        return self.encode_prepared(clause, self.prepare(clause))


def _summary(us: np.ndarray) -> dict:
    return {"min_us": float(us.min()), "median_us": float(np.median(us)), "max_us": float(us.max())}


def run_bench(
    clauses: Sequence[Clause],
    encoders: Sequence[str],
    repetitions: int = 3,
    cfg: EncoderConfig = EncoderConfig(dtype="f32"),
    seed: int = 0,
    corpus_id: str = "",
) -> dict:
    """Time parse / graph_build / encode per clause for each encoder.

    The first repetition is a warm-up and is discarded when ``repetitions > 1``.
    Per-clause times are averaged over the kept repetitions.
    """
    if not encoders:
        raise ValueError("no encoders given")
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    if len(clauses) < MIN_STABLE_CLAUSES:
        log.warning("only %d clauses; medians over fewer than %d clauses are noisy",
                    len(clauses), MIN_STABLE_CLAUSES)
    texts = [clause_to_string(c, i + 1) for i, c in enumerate(clauses)]
    clock = time.perf_counter_ns
    report = {
        "corpus": corpus_id,
        "n_clauses": len(clauses),
        "repetitions": repetitions,
        "low_confidence": repetitions < 2 or len(clauses) < MIN_STABLE_CLAUSES,
        "config": {**cfg.to_dict(), "seed": seed},
        "encoders": {},
    }
    for name in encoders:
        vec = Vectorizer(name, cfg, seed)
        kept = []
        for rep in range(repetitions):
            t = np.zeros((len(clauses), 3))
            for i, text in enumerate(texts):
                t0 = clock()
                (clause,) = parse_cnf_problem(text).clauses
                t1 = clock()
                prepared = vec.prepare(clause)
                t2 = clock()
                vec.encode_prepared(clause, prepared)
                t3 = clock()
                t[i] = (t1 - t0, t2 - t1, t3 - t2)
            if rep > 0 or repetitions == 1:
                kept.append(t)
        per_clause = np.mean(kept, axis=0) / 1e3
        phases = {
            "parse": per_clause[:, 0],
            "graph_build": per_clause[:, 1],
            "encode": per_clause[:, 2],
            "vectorize": per_clause[:, 1] + per_clause[:, 2],
        }
        report["encoders"][name] = {p: _summary(v) for p, v in phases.items()}
    return report


def format_table(report: dict) -> str:
    head = f"{'encoder':<16}" + "".join(f"{p + ' med (us)':>22}" for p in PHASES)
    lines = [head, "-" * len(head)]
    for name, phases in report["encoders"].items():
        lines.append(f"{name:<16}" + "".join(f"{phases[p]['median_us']:>22.1f}" for p in PHASES))
    if report["low_confidence"]:
        lines.append("warning: low-confidence timings (single repetition or small corpus)")
    return "\n".join(lines)
