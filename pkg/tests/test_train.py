import numpy as np
import pytest

from clausevec.autodiff import NumericError
from clausevec.gnn import EncoderConfig, GraphEncoder
from clausevec.train import ToyTask, Trainer, balanced_corpus, separable_labels, split_indices

CFG = EncoderConfig(d=8, rounds=1)


def test_task_parsing_and_labels(example_clause, unit_clause):
    assert ToyTask.parse("contains_predicate:q").label(example_clause) == 1
    assert ToyTask.parse("contains_predicate:q").label(unit_clause) == 0
    assert ToyTask.parse("has_negative_literal").label(example_clause) == 1
    assert ToyTask.parse("has_negative_literal").label(unit_clause) == 0
    with pytest.raises(ValueError):
        ToyTask.parse("bogus")


def test_balanced_corpus_is_balanced_and_seeded():
    task = ToyTask()
    clauses, labels = balanced_corpus(3, task, 40)
    assert len(clauses) == 40 and labels.sum() == 20
    assert [task.label(c) for c in clauses] == labels.tolist()
    again, _ = balanced_corpus(3, task, 40)
    assert again == clauses


def test_split_indices_partition():
    tr, va, te = split_indices(200, 0)
    assert (len(tr), len(va), len(te)) == (100, 30, 70)
    assert sorted(np.concatenate([tr, va, te]).tolist()) == list(range(200))


def test_zero_epochs_changes_nothing():
    clauses, labels = balanced_corpus(0, ToyTask(), 20)
    enc = GraphEncoder("gcn", CFG, seed=0)
    before = {k: v.data.copy() for k, v in enc.params.items()}
    report = Trainer(enc, seed=0).fit(clauses, labels, epochs=0)
    assert [e.epoch for e in report.epochs] == [0]
    assert report.best_epoch == 0
    assert all(np.array_equal(enc.params[k].data, v) for k, v in before.items())
    assert set(report.to_dict()) >= {"epochs", "best_epoch", "test_accuracy", "split"}


def test_frozen_encoder_head_fits_separable_labels():
    clauses, _ = balanced_corpus(1, ToyTask(), 80)
    enc = GraphEncoder("mpnn", CFG, seed=1)
    emb = enc.encode_graphs([enc.graph(c) for c in clauses])
    labels, keep = separable_labels(emb, seed=2)
    kept = [c for c, k in zip(clauses, keep) if k]
    y = labels[keep]
    trainer = Trainer(enc, seed=0, lr=0.1, train_encoder=False)
    before = {k: v.data.copy() for k, v in enc.params.items()}
    trainer.fit(kept, y, epochs=1000, split=(1.0, 0.0))
    scores = trainer.predict([enc.graph(c) for c in kept])
    assert np.mean((scores > 0) == y) == 1.0
    assert all(np.array_equal(enc.params[k].data, v) for k, v in before.items())


def test_non_finite_loss_is_reported():
    clauses, labels = balanced_corpus(0, ToyTask(), 8)
    enc = GraphEncoder("gcn", CFG, seed=0)
    trainer = Trainer(enc, seed=0)
    trainer.head["head.W"].data[...] = np.nan
    with pytest.raises(NumericError, match="non-finite training loss"):
        trainer.step([enc.graph(c) for c in clauses], labels)


def test_training_reduces_loss():
    clauses, labels = balanced_corpus(0, ToyTask(), 40)
    enc = GraphEncoder("mpnn", CFG, seed=0)
    report = Trainer(enc, seed=0, lr=0.01).fit(clauses, labels, epochs=5)
    assert report.min_train_loss() < report.epochs[0].train_loss
    assert 0.0 <= report.test_accuracy <= 1.0
