"""Term-walk and chain-pattern clause features, hashed into fixed-size count vectors."""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Optional

import numpy as np

from .fol import DEFAULT_POLICY, Clause, Fn, Literal, SkolemPolicy, Term, Var, classify_symbol

POS = "⊕"
NEG = "⊖"
WILDCARD = "*"
PAD = "⊥"
SEP = "|"


@dataclass
class FeatureVector:
    values: np.ndarray
    encoder: str
    d: int
    id: str = ""
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return (
            self.encoder == other.encoder
            and self.d == other.d
            and self.values.shape == other.values.shape
            and bool(np.array_equal(self.values, other.values))
        )


@dataclass(frozen=True)
class PatternConfig:
    d: int = 64
    walk_mode: str = "hashed"  # or "vocabulary"
    vocabulary: Optional[Mapping[str, int]] = None
    policy: SkolemPolicy = DEFAULT_POLICY

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be positive")
        if self.walk_mode not in ("hashed", "vocabulary"):
            raise ValueError(f"unknown walk_mode {self.walk_mode!r}")


# ---------------------------------------------------------------------------
# Hashing
# ---------------------------------------------------------------------------


@lru_cache(maxsize=1 << 16)
def _digest64(linearization: str) -> int:
    return int.from_bytes(hashlib.md5(linearization.encode("utf-8")).digest()[:8], "big")


def hash_feature(linearization: str, d: int) -> int:
    """MD5 of the UTF-8 text, first 8 digest bytes read big-endian, mod ``d``."""
    if d < 1:
        raise ValueError("d must be positive")
    return _digest64(linearization) % d


# ---------------------------------------------------------------------------
# Term walks
# ---------------------------------------------------------------------------


def _is_wild(t: Term, policy: SkolemPolicy) -> bool:
    return isinstance(t, Var) or classify_symbol(t.name, policy) != "plain"


def _label(t: Term, policy: SkolemPolicy) -> str:
    return WILDCARD if _is_wild(t, policy) else t.name


def _literal_walks(lit: Literal, policy: SkolemPolicy, out: Counter):
    sign = POS if lit.positive else NEG
    pred = lit.predicate
    if not lit.args:
        out[(sign, pred, PAD)] += 1
        return
    # (grandparent label, parent label, term) frontier
    stack = [(sign, pred, a) for a in reversed(lit.args)]
    while stack:
        gp, parent, t = stack.pop()
        lab = _label(t, policy)
        out[(gp, parent, lab)] += 1
        if lab != WILDCARD and t.args:
            stack.extend((parent, lab, a) for a in reversed(t.args))


def term_walks(clause: Clause, policy: SkolemPolicy = DEFAULT_POLICY) -> Counter:
    """Multiset of root-oriented 3-node paths over the sign-rooted literal trees."""
    out: Counter = Counter()
    for lit in clause.literals:
        _literal_walks(lit, policy, out)
    return out


def walk_linearization(walk: tuple[str, str, str]) -> str:
    return SEP.join(("walk",) + tuple(walk))


# ---------------------------------------------------------------------------
# Chain patterns
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChainPattern:
    """One root-to-leaf chain; ``spine`` starts at the predicate.

    Each spine step is ``(symbol, focused position (1-based), arity)``.  A
    0-ary predicate has the single step ``(p, 0, 0)`` and no terminal.
    """

    spine: tuple[tuple[str, int, int], ...]
    terminal: Optional[str]
    positive: bool

    @property
    def predicate(self) -> str:
        return self.spine[0][0]

    @property
    def polarity(self) -> str:
        return "positive" if self.positive else "negative"

    def term_string(self) -> str:
        """Render the pattern as a term, e.g. ``q(*,f(*))``."""
        inner = self.terminal if self.terminal is not None else ""
        for sym, pos, arity in reversed(self.spine):
            if arity == 0:
                inner = sym
                continue
            args = [WILDCARD] * arity
            args[pos - 1] = inner
            inner = f"{sym}({','.join(args)})"
        return inner

    def linearization(self) -> str:
        return ("pos" if self.positive else "neg") + SEP + self.term_string()


def chain_patterns(lit: Literal, policy: SkolemPolicy = DEFAULT_POLICY) -> Counter:
    """Multiset of chain patterns for one literal."""
    out: Counter = Counter()
    if not lit.args:
        out[ChainPattern(((lit.predicate, 0, 0),), None, lit.positive)] += 1
        return out
    stack = [((), lit.predicate, lit.args)]
    while stack:
        prefix, sym, args = stack.pop()
        n = len(args)
        for i in range(n - 1, -1, -1):
            spine = prefix + ((sym, i + 1, n),)
            t = args[i]
            if _is_wild(t, policy):
                out[ChainPattern(spine, WILDCARD, lit.positive)] += 1
            elif not t.args:
                out[ChainPattern(spine, t.name, lit.positive)] += 1
            else:
                stack.append((spine, t.name, t.args))
    return out


def clause_chain_patterns(clause: Clause, policy: SkolemPolicy = DEFAULT_POLICY) -> Counter:
    out: Counter = Counter()
    for lit in clause.literals:
        out.update(chain_patterns(lit, policy))
    return out


# ---------------------------------------------------------------------------
# Encoders
# ---------------------------------------------------------------------------


def build_walk_vocabulary(clauses: Iterable[Clause], policy: SkolemPolicy = DEFAULT_POLICY) -> dict:
    """Feature -> index map over a corpus, indices in lexicographic feature order."""
    feats = set()
    for c in clauses:
        feats.update(walk_linearization(w) for w in term_walks(c, policy))
    return {f: i for i, f in enumerate(sorted(feats))}


def encode_term_walks(clause: Clause, cfg: PatternConfig = PatternConfig()) -> FeatureVector:
    walks = term_walks(clause, cfg.policy)
    if cfg.walk_mode == "vocabulary":
        if cfg.vocabulary is None:
            raise ValueError("vocabulary mode requires cfg.vocabulary")
        vec = np.zeros(len(cfg.vocabulary), dtype=np.int64)
        dropped = 0
        for w, k in walks.items():
            idx = cfg.vocabulary.get(walk_linearization(w))
            if idx is None:
                dropped += k
            else:
                vec[idx] += k
        return FeatureVector(vec, "term_walks", len(vec), clause.id, {"dropped": dropped})
    vec = np.zeros(cfg.d, dtype=np.int64)
    for w, k in walks.items():
        vec[hash_feature(walk_linearization(w), cfg.d)] += k
    return FeatureVector(vec, "term_walks", cfg.d, clause.id)


def encode_chain_patterns(clause: Clause, cfg: PatternConfig = PatternConfig()) -> FeatureVector:
    """Length ``2d``: positive-literal patterns in ``[0, d)``, negative in ``[d, 2d)``."""
    d = cfg.d
    vec = np.zeros(2 * d, dtype=np.int64)
    for pat, k in clause_chain_patterns(clause, cfg.policy).items():
        offset = 0 if pat.positive else d
        vec[offset + hash_feature(pat.linearization(), d)] += k
    return FeatureVector(vec, "chain_patterns", d, clause.id)
