"""Supervised toy tasks for exercising the encoders with BCE + Adam."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import AdamState, NumericError, ParamStore, Tensor
from .fol import Clause, GeneratorConfig, generate_random_clauses
from .gnn import GraphEncoder
from .graphs import batch_graphs

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ToyTask:
    kind: str = "contains_predicate"  # or "has_negative_literal"
    predicate: str = "p0"

    def __post_init__(self):
        if self.kind not in ("contains_predicate", "has_negative_literal"):
            raise ValueError(f"unknown task {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "ToyTask":
        """``contains_predicate:p3`` or ``has_negative_literal``."""
        kind, _, arg = text.partition(":")
        return cls(kind, arg) if arg else cls(kind)

    def label(self, clause: Clause) -> int:
        if self.kind == "contains_predicate":
            return int(any(l.predicate == self.predicate for l in clause.literals))
        return int(any(not l.positive for l in clause.literals))

    def describe(self) -> str:
        return f"{self.kind}:{self.predicate}" if self.kind == "contains_predicate" else self.kind


def balanced_corpus(seed: int, task: ToyTask, n: int, gen: Optional[GeneratorConfig] = None):
    """``n`` generated clauses, half labelled 1, in generation order."""
    gen = gen or GeneratorConfig()
    want = {0: n - n // 2, 1: n // 2}
    picked: list[Clause] = []
    labels: list[int] = []
    batch = 0
    while any(want.values()):
        cfg = GeneratorConfig(**{**gen.__dict__, "n_clauses": max(4 * n, 64)})
        for c in generate_random_clauses(seed * 1_000_003 + batch, cfg):
            y = task.label(c)
            if want[y]:
                want[y] -= 1
                picked.append(Clause(f"c{len(picked) + 1}", c.role, c.literals))
                labels.append(y)
        batch += 1
        if batch > 50:
            raise ValueError(f"generator cannot balance task {task.describe()}")
    return picked, np.asarray(labels, dtype=np.int64)


def split_indices(n: int, seed: int, train: float = 0.5, val: float = 0.15):
    """Seeded permutation cut into train / validation / held-out parts."""
    perm = np.random.default_rng(seed).permutation(n)
    a = int(round(train * n))
    b = a + int(round(val * n))
    return perm[:a], perm[a:b], perm[b:]


def separable_labels(embeddings: np.ndarray, seed: int, margin: float = 0.1):
    """Labels from a random hyperplane through the median score.

    Returns ``(labels, keep)``; ``keep`` drops points closer than
    ``margin * std`` to the plane so a linear head can fit them exactly.
    """
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(embeddings.shape[1])
    s = embeddings @ w
    s = s - np.median(s)
    keep = np.abs(s) > margin * (s.std() or 1.0)
    return (s > 0).astype(np.int64), keep


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float


@dataclass
class TrainReport:
    encoder: str
    task: str
    epochs: list[EpochStats] = field(default_factory=list)
    best_epoch: int = 0
    test_accuracy: float = float("nan")
    test_loss: float = float("nan")
    n_train: int = 0
    n_val: int = 0
    n_test: int = 0

    def min_train_loss(self) -> float:
        return min(e.train_loss for e in self.epochs)

    def to_dict(self) -> dict:
        return {
            "encoder": self.encoder,
            "task": self.task,
            "split": {"train": self.n_train, "validation": self.n_val, "test": self.n_test},
            "epochs": [e.__dict__ for e in self.epochs],
            "best_epoch": self.best_epoch,
            "test_accuracy": self.test_accuracy,
            "test_loss": self.test_loss,
        }


def init_head(d: int, seed: int, dtype) -> ParamStore:
    head = ParamStore(seed + 1, dtype)
    head.xavier("head.W", (d, 1))
    head.zeros("head.b", (1,))
    return head


def _logits(emb: Tensor, head: ParamStore) -> Tensor:
    return emb @ head["head.W"] + head["head.b"]


class Trainer:
    """Encoder + linear head trained with BCE and Adam, validation-best selection."""

    def __init__(self, encoder: GraphEncoder, seed: int = 0, batch_size: int = 8,
                 lr: float = 1e-3, train_encoder: bool = True):
        self.encoder = encoder
        self.seed = seed
        self.batch_size = batch_size
        self.train_encoder = train_encoder
        self.head = init_head(encoder.cfg.d, seed, encoder.params.dtype)
        self.opt_enc = AdamState(lr=lr)
        self.opt_head = AdamState(lr=lr)

    def _embed(self, graphs) -> Tensor:
        if self.train_encoder:
            return self.encoder.forward(batch_graphs(graphs))
        return Tensor(self.encoder.encode_graphs(graphs))

    def loss(self, graphs, labels) -> float:
        total = 0.0
        for lo in range(0, len(graphs), 64):
            emb = Tensor(self.encoder.encode_graphs(graphs[lo: lo + 64]))
            logits = _logits(emb, self.head)
            y = np.asarray(labels[lo: lo + 64]).reshape(-1, 1)
            total += ad.bce_with_logits(logits, y).item() * len(y)
        return total / max(len(graphs), 1)

    def predict(self, graphs) -> np.ndarray:
        out = []
        for lo in range(0, len(graphs), 64):
            emb = Tensor(self.encoder.encode_graphs(graphs[lo: lo + 64]))
            out.append(_logits(emb, self.head).data[:, 0])
        return np.concatenate(out) if out else np.zeros(0)

    def step(self, graphs, labels):
        if self.train_encoder:
            self.encoder.params.zero_grad()
        self.head.zero_grad()
        logits = _logits(self._embed(graphs), self.head)
        loss = ad.bce_with_logits(logits, np.asarray(labels).reshape(-1, 1))
        if not np.isfinite(loss.data):
            raise NumericError(
                f"non-finite training loss {loss.item()} at Adam step {self.opt_head.step + 1}; "
                f"max |logit| = {np.abs(logits.data).max()}"
            )
        loss.backward()
        if self.train_encoder:
            ad.adam_step(self.encoder.params, self.opt_enc)
        ad.adam_step(self.head, self.opt_head)
        return loss.item()

    def fit(self, clauses: Sequence[Clause], labels, epochs: int, task: str = "",
            split=(0.5, 0.15), target_loss: Optional[float] = None) -> TrainReport:
        """Train for ``epochs``; ``target_loss`` stops early once train loss drops below it."""
        labels = np.asarray(labels, dtype=np.int64)
        graphs = [self.encoder.graph(c) for c in clauses]
        tr, va, te = split_indices(len(clauses), self.seed, *split)
        g_tr, g_va, g_te = ([graphs[i] for i in idx] for idx in (tr, va, te))
        y_tr, y_va, y_te = labels[tr], labels[va], labels[te]
        report = TrainReport(self.encoder.kind, task, n_train=len(tr), n_val=len(va), n_test=len(te))

        def snapshot():
            return self.encoder.params.copy(), self.head.copy()

        val0 = self.loss(g_va, y_va) if len(va) else float("nan")
        report.epochs.append(EpochStats(0, self.loss(g_tr, y_tr), val0))
        best_val, best = val0, snapshot()
        rng = np.random.default_rng(self.seed)
        for epoch in range(1, epochs + 1):
            order = rng.permutation(len(tr))
            for lo in range(0, len(order), self.batch_size):
                idx = order[lo: lo + self.batch_size]
                self.step([g_tr[i] for i in idx], y_tr[idx])
            stats = EpochStats(epoch, self.loss(g_tr, y_tr), self.loss(g_va, y_va) if len(va) else float("nan"))
            report.epochs.append(stats)
            log.info("epoch %d train %.4f val %.4f", epoch, stats.train_loss, stats.val_loss)
            if len(va) and stats.val_loss < best_val:
                best_val, best = stats.val_loss, snapshot()
                report.best_epoch = epoch
            if target_loss is not None and stats.train_loss < target_loss:
                break
        if not len(va):
            best = snapshot()
            report.best_epoch = report.epochs[-1].epoch
        self.encoder.params.load_state(best[0])
        self.head.load_state(best[1])
        if len(te):
            scores = self.predict(g_te)
            report.test_accuracy = float(np.mean((scores > 0).astype(np.int64) == y_te))
            report.test_loss = self.loss(g_te, y_te)
        return report
