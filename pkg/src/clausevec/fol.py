"""First-order CNF clauses: data model, TPTP parsing, rendering, random generation."""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence, Union

__all__ = [
    "Var", "Fn", "Term", "Literal", "Clause", "Problem", "SkolemPolicy",
    "GeneratorConfig", "ParseError", "ArityError", "IncludeError", "GeneratorError",
    "parse_cnf_problem", "parse_cnf_file", "clause_to_string", "problem_to_string",
    "generate_random_clauses", "classify_symbol", "term_depth", "clause_variables",
    "clause_symbols",
]


# ---------------------------------------------------------------------------
# Data model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Fn:
    """Function application; zero args makes it a constant."""

    name: str
    args: tuple["Term", ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return self.name
        return f"{self.name}({','.join(str(a) for a in self.args)})"


Term = Union[Var, Fn]

EQUALITY = "="


@dataclass(frozen=True)
class Literal:
    positive: bool
    predicate: str
    args: tuple[Term, ...] = ()

    @property
    def polarity(self) -> str:
        return "positive" if self.positive else "negative"

    def negated(self) -> "Literal":
        return Literal(not self.positive, self.predicate, self.args)

    def __str__(self) -> str:
        if self.predicate == EQUALITY and len(self.args) == 2:
            op = "=" if self.positive else "!="
            return f"{self.args[0]} {op} {self.args[1]}"
        atom = self.predicate
        if self.args:
            atom += f"({','.join(str(a) for a in self.args)})"
        return atom if self.positive else "~" + atom


ROLES = ("axiom", "negated_conjecture", "derived")

_ROLE_ALIASES = {
    "axiom": "axiom",
    "hypothesis": "axiom",
    "definition": "axiom",
    "assumption": "axiom",
    "negated_conjecture": "negated_conjecture",
    "conjecture": "negated_conjecture",
    "lemma": "derived",
    "theorem": "derived",
    "plain": "derived",
    "derived": "derived",
    "unknown": "derived",
}


@dataclass(frozen=True)
class Clause:
    id: str
    role: str
    literals: tuple[Literal, ...]

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown clause role {self.role!r}")

    def __len__(self) -> int:
        return len(self.literals)

    def __str__(self) -> str:
        return clause_to_string(self)


@dataclass(frozen=True)
class Problem:
    clauses: tuple[Clause, ...]
    # symbol -> (kind, arity), kind in {"predicate", "function"}
    signature: dict = field(default_factory=dict, compare=True, hash=False)

    def __len__(self) -> int:
        return len(self.clauses)

    def __iter__(self) -> Iterator[Clause]:
        return iter(self.clauses)


DEFAULT_SKOLEM_PREFIXES = ("sk", "esk", "skolem")


@dataclass(frozen=True)
class SkolemPolicy:
    """Name-prefix rule for spotting skolem symbols. ``prefixes=None`` disables it."""

    prefixes: Optional[tuple[str, ...]] = DEFAULT_SKOLEM_PREFIXES

    @classmethod
    def none(cls) -> "SkolemPolicy":
        return cls(prefixes=None)

    @property
    def mode(self) -> str:
        return "none" if self.prefixes is None else "prefix_list"


DEFAULT_POLICY = SkolemPolicy()


def is_variable_name(name: str) -> bool:
    return bool(name) and (name[0].isupper() or name[0] == "_")


def classify_symbol(name: str, policy: SkolemPolicy = DEFAULT_POLICY) -> str:
    """Return ``"variable"``, ``"skolem"`` or ``"plain"``."""
    if is_variable_name(name):
        return "variable"
    if policy.prefixes and any(name.startswith(p) for p in policy.prefixes):
        return "skolem"
    return "plain"


def term_depth(t: Term) -> int:
    if isinstance(t, Var) or not t.args:
        return 0
    return 1 + max(term_depth(a) for a in t.args)


def _iter_terms(t: Term) -> Iterator[Term]:
    stack = [t]
    while stack:
        cur = stack.pop()
        yield cur
        if isinstance(cur, Fn):
            stack.extend(reversed(cur.args))


def clause_variables(clause: Clause) -> set[str]:
    return {
        t.name
        for lit in clause.literals
        for a in lit.args
        for t in _iter_terms(a)
        if isinstance(t, Var)
    }


def clause_symbols(clause: Clause) -> list[str]:
    """Multiset (as a sorted list) of predicate and function symbols."""
    out = []
    for lit in clause.literals:
        out.append(lit.predicate)
        for a in lit.args:
            out.extend(t.name for t in _iter_terms(a) if isinstance(t, Fn))
    return sorted(out)


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0, source: str = "<string>"):
        self.line = line
        self.col = col
        self.source = source
        super().__init__(f"{source}:{line}:{col}: {message}")


class ArityError(ValueError):
    def __init__(self, symbol: str, first: tuple[str, int], second: tuple[str, int]):
        self.symbol = symbol
        self.first = first
        self.second = second
        super().__init__(
            f"symbol {symbol!r} used as {first[0]} of arity {first[1]} "
            f"and as {second[0]} of arity {second[1]}"
        )


class IncludeError(ValueError):
    pass


class GeneratorError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Tokenizer / parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<line_comment>%[^\n]*)
  | (?P<block_comment>/\*.*?\*/)
  | (?P<neq>!=)
  | (?P<punct>[(),.|~=\[\]])
  | (?P<squote>'(?:[^'\\]|\\.)*')
  | (?P<dquote>"(?:[^"\\]|\\.)*")
  | (?P<word>\$\$?[a-zA-Z0-9_]+|[a-zA-Z0-9_][a-zA-Z0-9_]*)
  | (?P<other>.)
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str, source: str) -> list[_Tok]:
    toks = []
    line, line_start = 1, 0
    for m in _TOKEN_RE.finditer(text):
        kind = m.lastgroup
        s = m.group()
        col = m.start() - line_start + 1
        if kind == "other":
            raise ParseError(f"unexpected character {s!r}", line, col, source)
        if kind not in ("ws", "line_comment", "block_comment"):
            if kind in ("neq", "punct"):
                kind = s
            toks.append(_Tok(kind, s, line, col))
        nl = s.count("\n")
        if nl:
            line += nl
            line_start = m.start() + s.rindex("\n") + 1
    toks.append(_Tok("eof", "", line, len(text) - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str, source: str):
        self.source = source
        self.toks = _tokenize(text, source)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg: str, tok: Optional[_Tok] = None):
        tok = tok or self.peek()
        found = tok.text or "end of input"
        raise ParseError(f"{msg}, found {found!r}", tok.line, tok.col, self.source)

    def expect(self, kind: str) -> _Tok:
        if self.peek().kind != kind:
            self.error(f"expected {kind!r}")
        return self.next()

    def statements(self) -> Iterator[tuple]:
        while self.peek().kind != "eof":
            tok = self.expect("word")
            if tok.text == "cnf":
                yield ("cnf",) + self.cnf_body()
            elif tok.text == "include":
                yield ("include",) + self.include_body()
            else:
                self.error("expected 'cnf' or 'include'", tok)

    def include_body(self):
        self.expect("(")
        path = self.expect("squote").text[1:-1]
        selection = None
        if self.peek().kind == ",":
            self.next()
            self.expect("[")
            selection = []
            while self.peek().kind != "]":
                selection.append(self.name())
                if self.peek().kind == ",":
                    self.next()
            self.expect("]")
        self.expect(")")
        self.expect(".")
        return path, selection

    def name(self) -> str:
        tok = self.peek()
        if tok.kind in ("word", "squote"):
            return self.next().text
        self.error("expected a name")

    def cnf_body(self):
        self.expect("(")
        name = self.name()
        self.expect(",")
        role_tok = self.expect("word")
        if role_tok.text not in _ROLE_ALIASES:
            self.error("unknown role", role_tok)
        role = _ROLE_ALIASES[role_tok.text]
        self.expect(",")
        literals = self.formula()
        if self.peek().kind == ",":
            self.next()
            self.skip_annotations()
        self.expect(")")
        self.expect(".")
        return name, role, literals

    def skip_annotations(self):
        depth = 0
        while True:
            tok = self.peek()
            if tok.kind == "eof":
                self.error("unterminated annotation")
            if tok.kind in ("(", "["):
                depth += 1
            elif tok.kind in (")", "]"):
                if depth == 0:
                    return
                depth -= 1
            self.next()

    def formula(self) -> list[Literal]:
        if self.peek().kind == "(":
            self.next()
            lits = self.formula()
            self.expect(")")
            if self.peek().kind != "|":
                return lits
            self.next()
        else:
            lits = []
        lits.append(self.literal())
        while self.peek().kind == "|":
            self.next()
            lits.append(self.literal())
        return [l for l in lits if l is not None]

    def literal(self) -> Optional[Literal]:
        if self.peek().kind == "~":
            self.next()
            lit = self.literal()
            if lit is None:
                return Literal(True, "$true")
            return lit.negated()
        if self.peek().kind == "(":
            # parenthesised single literal
            self.next()
            lit = self.literal()
            self.expect(")")
            return lit
        tok = self.peek()
        if tok.kind not in ("word", "squote", "dquote"):
            self.error("expected a literal")
        left = self.term()
        if self.peek().kind in ("=", "!="):
            op = self.next().text
            right = self.term()
            return Literal(op == "=", EQUALITY, (left, right))
        if isinstance(left, Var):
            self.error("variable used as an atom", tok)
        if left.name == "$false" and not left.args:
            return None
        return Literal(True, left.name, left.args)

    def term(self) -> Term:
        tok = self.next()
        if tok.kind not in ("word", "squote", "dquote"):
            self.error("expected a term", tok)
        if tok.kind == "word" and is_variable_name(tok.text):
            return Var(tok.text)
        if self.peek().kind == "(":
            self.next()
            args = [self.term()]
            while self.peek().kind == ",":
                self.next()
                args.append(self.term())
            self.expect(")")
            return Fn(tok.text, tuple(args))
        return Fn(tok.text)


def _record(sig: dict, symbol: str, kind: str, arity: int):
    prev = sig.get(symbol)
    if prev is None:
        sig[symbol] = (kind, arity)
    elif prev != (kind, arity):
        raise ArityError(symbol, prev, (kind, arity))


def _term_signature(t: Term, sig: dict):
    if isinstance(t, Fn):
        _record(sig, t.name, "function", len(t.args))
        for a in t.args:
            _term_signature(a, sig)


def build_signature(clauses: Iterable[Clause]) -> dict:
    sig: dict = {}
    for c in clauses:
        for lit in c.literals:
            _record(sig, lit.predicate, "predicate", len(lit.args))
            for a in lit.args:
                _term_signature(a, sig)
    return sig


def _parse_statements(text, source, include_root, seen, selection=None):
    parser = _Parser(text, source)
    for stmt in parser.statements():
        if stmt[0] == "cnf":
            _, name, role, lits = stmt
            if selection is None or name in selection:
                yield Clause(name, role, tuple(lits))
        else:
            _, path, sel = stmt
            if include_root is None:
                raise IncludeError(f"include({path!r}) but no include root is configured")
            target = (Path(include_root) / path).resolve()
            if not target.is_file():
                raise IncludeError(f"unresolved include {path!r} under {include_root}")
            if target in seen:
                raise IncludeError(f"include cycle through {path!r}")
            yield from _parse_statements(
                target.read_text(encoding="utf-8"), str(target), include_root,
                seen | {target}, None if sel is None else set(sel),
            )


def parse_cnf_problem(text: str, include_root=None, source: str = "<string>") -> Problem:
    """Parse TPTP ``cnf(...)`` statements into a :class:`Problem`.

    Literal order is kept as written.  ``include`` directives are resolved
    relative to ``include_root`` and rejected when it is ``None``.
    """
    clauses = tuple(_parse_statements(text, source, include_root, frozenset()))
    return Problem(clauses, build_signature(clauses))


def parse_cnf_file(path, include_root=None) -> Problem:
    path = Path(path)
    return parse_cnf_problem(path.read_text(encoding="utf-8"), include_root, str(path))


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

_ROLE_OUT = {"axiom": "axiom", "negated_conjecture": "negated_conjecture", "derived": "plain"}


def clause_to_string(clause: Clause, index: int = 1) -> str:
    """Canonical one-line TPTP rendering; blank ids become ``c<index>``."""
    cid = clause.id or f"c{index}"
    lits = clause.literals
    if not lits:
        body = "$false"
    elif len(lits) == 1:
        body = str(lits[0])
    else:
        body = "(" + " | ".join(str(l) for l in lits) + ")"
    return f"cnf({cid}, {_ROLE_OUT[clause.role]}, {body})."


def problem_to_string(problem: Union[Problem, Sequence[Clause]]) -> str:
    clauses = problem.clauses if isinstance(problem, Problem) else problem
    return "".join(clause_to_string(c, i + 1) + "\n" for i, c in enumerate(clauses))


# ---------------------------------------------------------------------------
# Random generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeneratorConfig:
    n_predicates: int = 6
    n_functions: int = 4
    n_constants: int = 3
    n_skolems: int = 2
    n_variables: int = 4
    max_arity: int = 3
    max_depth: int = 2
    min_literals: int = 1
    max_literals: int = 4
    n_clauses: int = 100
    equality_rate: float = 0.0
    negative_rate: float = 0.5

    def validate(self):
        if self.n_predicates < 1:
            raise GeneratorError("n_predicates must be at least 1")
        if self.max_depth < 0:
            raise GeneratorError("max_depth must be non-negative")
        if self.max_arity < 0:
            raise GeneratorError("max_arity must be non-negative")
        if min(self.n_functions, self.n_constants, self.n_skolems, self.n_variables, self.n_clauses) < 0:
            raise GeneratorError("symbol and clause counts must be non-negative")
        if not 0 <= self.min_literals <= self.max_literals:
            raise GeneratorError("need 0 <= min_literals <= max_literals")
        if self.n_constants + self.n_variables + self.n_skolems == 0 and self.max_arity > 0:
            raise GeneratorError("no leaf symbols (constants, variables or skolem constants)")
        if not (0.0 <= self.equality_rate <= 1.0 and 0.0 <= self.negative_rate <= 1.0):
            raise GeneratorError("rates must lie in [0, 1]")

    @classmethod
    def from_json(cls, text: str) -> "GeneratorConfig":
        data = json.loads(text)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise GeneratorError(f"unknown generator fields: {sorted(unknown)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.__dict__, sort_keys=True)


def _signature_for(cfg: GeneratorConfig, rng: random.Random):
    preds = [(f"p{i}", rng.randint(0, cfg.max_arity)) for i in range(cfg.n_predicates)]
    funcs = [(f"f{i}", rng.randint(1, cfg.max_arity)) for i in range(cfg.n_functions)] if cfg.max_arity else []
    # skolems: first one a constant, the rest functions
    skolems = [
        (f"sk{i}", 0 if i == 0 or not cfg.max_arity else rng.randint(1, cfg.max_arity))
        for i in range(cfg.n_skolems)
    ]
    consts = [f"c{i}" for i in range(cfg.n_constants)]
    variables = [chr(ord("A") + i) if i < 26 else f"X{i}" for i in range(cfg.n_variables)]
    return preds, funcs, skolems, consts, variables


def _random_term(rng, depth, funcs, skolems, consts, variables) -> Term:
    leaf_skolems = [s for s, a in skolems if a == 0]
    compound = funcs + [(s, a) for s, a in skolems if a > 0]
    if depth > 0 and compound and rng.random() < 0.5:
        name, arity = rng.choice(compound)
        return Fn(name, tuple(
            _random_term(rng, depth - 1, funcs, skolems, consts, variables) for _ in range(arity)
        ))
    pool = [Var(v) for v in variables] + [Fn(c) for c in consts] + [Fn(s) for s in leaf_skolems]
    return rng.choice(pool)


def generate_random_clauses(seed: int, cfg: GeneratorConfig = GeneratorConfig()) -> Problem:
    """Deterministic random CNF problem for a given (seed, cfg)."""
    cfg.validate()
    rng = random.Random(seed)
    preds, funcs, skolems, consts, variables = _signature_for(cfg, rng)
    args = (rng, cfg.max_depth, funcs, skolems, consts, variables)
    clauses = []
    for n in range(cfg.n_clauses):
        lits = []
        for _ in range(rng.randint(cfg.min_literals, cfg.max_literals)):
            positive = rng.random() >= cfg.negative_rate
            if rng.random() < cfg.equality_rate:
                lits.append(Literal(positive, EQUALITY, (_random_term(*args), _random_term(*args))))
            else:
                p, arity = rng.choice(preds)
                lits.append(Literal(positive, p, tuple(_random_term(*args) for _ in range(arity))))
        role = "negated_conjecture" if n % 10 == 9 else "axiom"
        clauses.append(Clause(f"c{n + 1}", role, tuple(lits)))
    clauses = tuple(clauses)
    return Problem(clauses, build_signature(clauses))
