"""``clausevec`` command line: generate, vectorize, bench, train, gradcheck.

Exit codes: 0 success, 2 input error, 3 config error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .bench import ENCODERS, Vectorizer, format_table, run_bench
from .export import FORMATS, dumps
from .fol import (
    ArityError, GeneratorConfig, GeneratorError, IncludeError, ParseError,
    generate_random_clauses, parse_cnf_file, problem_to_string,
)
from .gnn import GNN_ENCODERS, EncoderConfig, GraphEncoder
from .patterns import FeatureVector, PatternConfig, build_walk_vocabulary
from .train import ToyTask, Trainer, balanced_corpus

EXIT_OK, EXIT_INPUT, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3, 4
GRADCHECK_TOL = 1e-4

log = logging.getLogger("clausevec")


class ConfigError(ValueError):
    pass


def _encoder_config(args) -> EncoderConfig:
    data = {}
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        data.pop("encoder", None)
        data.pop("seed", None)
    for flag, key in (("dim", "d"), ("rounds", "rounds")):
        if getattr(args, flag, None) is not None:
            data[key] = getattr(args, flag)
    if getattr(args, "float", None):
        data["dtype"] = args.float
    try:
        return EncoderConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _config_value(args, key, default):
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        return data.get(key, default)
    return default


def _load_clauses(paths, include_root):
    clauses = []
    for p in paths:
        clauses.extend(parse_cnf_file(p, include_root).clauses)
    return clauses


def _corpus(args):
    if args.inputs:
        return _load_clauses(args.inputs, args.include_root), ",".join(args.inputs)
    gen = GeneratorConfig(n_clauses=args.generate)
    return list(generate_random_clauses(args.seed, gen).clauses), f"generated:seed={args.seed}:n={args.generate}"


def _write(data: bytes, output: str):
    if output == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        Path(output).write_bytes(data)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    gen = GeneratorConfig()
    if args.config:
        try:
            gen = GeneratorConfig.from_json(Path(args.config).read_text())
        except (json.JSONDecodeError, TypeError) as exc:
            raise ConfigError(f"bad generator config: {exc}") from exc
    if args.clauses is not None:
        gen = replace(gen, n_clauses=args.clauses)
    _write(problem_to_string(generate_random_clauses(args.seed, gen)).encode("utf-8"), args.output)
    return EXIT_OK


def cmd_vectorize(args) -> int:
    encoder = args.encoder or _config_value(args, "encoder", None)
    if encoder not in ENCODERS:
        raise ConfigError(f"unknown encoder {encoder!r}; choose from {', '.join(ENCODERS)}")
    cfg = _encoder_config(args)
    clauses = _load_clauses(args.inputs, args.include_root)
    vec = Vectorizer(encoder, cfg, args.seed)
    if args.walk_mode == "vocabulary":
        if encoder != "term_walks":
            raise ConfigError("--walk-mode vocabulary only applies to term_walks")
        vocab = build_walk_vocabulary(clauses, cfg.policy)
        vec.pattern_cfg = PatternConfig(d=cfg.d, walk_mode="vocabulary", vocabulary=vocab, policy=cfg.policy)
    # ordered map: output order follows input order regardless of jobs
    if args.jobs > 1:
        with ThreadPoolExecutor(args.jobs) as pool:
            values = list(pool.map(vec.vectorize, clauses))
    else:
        values = [vec.vectorize(c) for c in clauses]
    d = len(vec.pattern_cfg.vocabulary) if args.walk_mode == "vocabulary" else cfg.d
    vectors = [FeatureVector(v, encoder, d, c.id) for c, v in zip(clauses, values)]
    bad = [v.id for v in vectors if not np.isfinite(v.values.astype(float)).all()]
    if bad:
        log.error("non-finite embeddings for clauses %s", bad[:10])
        return EXIT_NUMERIC
    _write(dumps(vectors, args.format), args.output)
    summary = f"{len(vectors)} vectors ({encoder}, length {len(vectors[0]) if vectors else 0}) -> {args.output}"
    print(summary, file=sys.stderr if args.output == "-" else sys.stdout)
    return EXIT_OK


def cmd_bench(args) -> int:
    encoders = [e for e in args.encoders.split(",") if e] if args.encoders else []
    if not encoders:
        print("bench: empty encoder list", file=sys.stderr)
        return EXIT_INPUT
    unknown = [e for e in encoders if e not in ENCODERS]
    if unknown:
        raise ConfigError(f"unknown encoders {unknown}")
    cfg = _encoder_config(args)
    clauses, corpus_id = _corpus(args)
    report = run_bench(clauses, encoders, args.repetitions, cfg, args.seed, corpus_id)
    print(format_table(report))
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_train(args) -> int:
    if args.encoder not in GNN_ENCODERS:
        raise ConfigError(f"train needs a graph encoder ({', '.join(GNN_ENCODERS)})")
    cfg = _encoder_config(args)
    try:
        task = ToyTask.parse(args.task)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if args.inputs:
        clauses = _load_clauses(args.inputs, args.include_root)
        labels = np.asarray([task.label(c) for c in clauses])
    else:
        clauses, labels = balanced_corpus(args.seed, task, args.generate)
    enc = GraphEncoder(args.encoder, cfg, args.seed)
    trainer = Trainer(enc, seed=args.seed, batch_size=args.batch_size, lr=args.lr)
    report = trainer.fit(clauses, labels, args.epochs, task.describe())
    doc = report.to_dict()
    doc["config"] = {**cfg.to_dict(), "seed": args.seed}
    text = json.dumps(doc, indent=2, sort_keys=True)
    if args.report:
        Path(args.report).write_text(text)
    else:
        print(text)
    for e in report.epochs:
        print(f"epoch {e.epoch:3d}  train {e.train_loss:.4f}  val {e.val_loss:.4f}", file=sys.stderr)
    print(f"best epoch {report.best_epoch}, held-out accuracy {report.test_accuracy:.3f}", file=sys.stderr)
    if args.checkpoint:
        enc.params.save(args.checkpoint)
        trainer.head.save(str(args.checkpoint) + ".head")
    return EXIT_OK


def gradcheck_encoder(name: str, seed: int = 0, n_clauses: int = 25, d: int = 64, rounds: int = 2,
                      max_coords: int = 200, h: float = 1e-6) -> float:
    """Worst relative gradient error of ``sum(embedding)`` over generated clauses (float64).

    The step is small so central differences rarely straddle a relu or max kink.
    """
    gen = GeneratorConfig(n_clauses=n_clauses, max_literals=4, max_depth=2)
    clauses = generate_random_clauses(seed, gen).clauses
    enc = GraphEncoder(name, EncoderConfig(d=d, rounds=rounds, dtype="f64"), seed)
    worst = 0.0
    for k, c in enumerate(clauses):
        g = enc.graph(c)
        err = ad.gradcheck(lambda ps: ad.sum_all(enc.forward(g, ps)), enc.params,
                           h=h, max_coords=max_coords, seed=seed + k)
        worst = max(worst, err)
    return worst


def cmd_gradcheck(args) -> int:
    names = list(ENCODERS) if args.encoder == "all" else [args.encoder]
    if any(n not in ENCODERS for n in names):
        raise ConfigError(f"unknown encoder {args.encoder!r}")
    failed = False
    for name in names:
        if name not in GNN_ENCODERS:
            print(f"{name:<16} skipped (count features, not differentiable)")
            continue
        err = gradcheck_encoder(name, args.seed, args.clauses, args.dim or 64, args.rounds or 2)
        ok = err < GRADCHECK_TOL
        failed |= not ok
        print(f"{name:<16} max rel error {err:.3e}  {'ok' if ok else 'FAIL'}")
    return EXIT_NUMERIC if failed else EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="clausevec", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, encoder=True):
        if encoder:
            sp.add_argument("--encoder")
        sp.add_argument("--dim", type=int)
        sp.add_argument("--rounds", type=int)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--config", help="JSON encoder config")
        sp.add_argument("--include-root", help="directory for TPTP include() resolution")
        sp.add_argument("--float", choices=sorted(ad.DTYPES))

    g = sub.add_parser("generate", help="write a random CNF corpus")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--clauses", type=int)
    g.add_argument("--config", help="JSON generator config")
    g.add_argument("-o", "--output", default="-")
    g.set_defaults(func=cmd_generate)

    v = sub.add_parser("vectorize", help="embed every clause of the inputs")
    v.add_argument("inputs", nargs="+")
    common(v)
    v.add_argument("--format", choices=FORMATS, default="json")
    v.add_argument("-o", "--output", default="-")
    v.add_argument("--jobs", type=int, default=1)
    v.add_argument("--walk-mode", choices=("hashed", "vocabulary"), default="hashed",
                   help="term_walks only; vocabulary is built from the inputs")
    v.set_defaults(func=cmd_vectorize)

    b = sub.add_parser("bench", help="per-clause vectorization timings")
    b.add_argument("inputs", nargs="*")
    common(b, encoder=False)
    b.add_argument("--encoders", default=",".join(ENCODERS))
    b.add_argument("--repetitions", type=int, default=3)
    b.add_argument("--generate", type=int, default=1000, help="corpus size when no inputs are given")
    b.add_argument("--report", help="write the JSON report here")
    b.set_defaults(func=cmd_bench)

    t = sub.add_parser("train", help="fit an encoder + linear head on a toy task")
    t.add_argument("inputs", nargs="*")
    common(t)
    t.add_argument("--task", default="contains_predicate:p0")
    t.add_argument("--epochs", type=int, default=5)
    t.add_argument("--batch-size", type=int, default=8)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--generate", type=int, default=200)
    t.add_argument("--report")
    t.add_argument("--checkpoint")
    t.set_defaults(func=cmd_train, encoder="mpnn")

    gc = sub.add_parser("gradcheck", help="finite-difference check of encoder gradients")
    gc.add_argument("--encoder", default="all")
    gc.add_argument("--seed", type=int, default=0)
    gc.add_argument("--clauses", type=int, default=25)
    gc.add_argument("--dim", type=int)
    gc.add_argument("--rounds", type=int)
    gc.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ParseError, ArityError, IncludeError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, GeneratorError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ad.NumericError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
