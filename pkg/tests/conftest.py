import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from confmpu.data import Dictionary, corpus_from_texts
from confmpu.model import init_params, predictor
from confmpu.risk import Batch


@pytest.fixture
def tiny_corpus():
    """Five sentences with gold labels over two classes."""
    sents = [
        ["the", "patient", "developed", "sepsis", "overnight"],
        ["aspirin", "reduced", "the", "fever"],
        ["sepsis", "and", "neutropenia", "were", "noted"],
        ["no", "adverse", "events"],
        ["aspirin", "was", "stopped"],
    ]
    gold = [
        [0, 0, 0, 1, 0],
        [2, 0, 0, 1],
        [1, 0, 1, 0, 0],
        [0, 0, 0],
        [2, 0, 0],
    ]
    return corpus_from_texts(sents, ["Disease", "Chemical"], gold=gold)


@pytest.fixture
def tiny_dictionary():
    return Dictionary(
        entries=(
            (("sepsis",), 1),
            (("aspirin",), 2),
        ),
        class_names=("Disease", "Chemical"),
    )


def random_batch(rng, k, dim, with_scores=True, n_pos=(2, 6), n_unl=(4, 10)):
    positives = tuple(
        rng.normal(size=(int(rng.integers(*n_pos)), dim)) for _ in range(k)
    )
    unlabeled = rng.normal(size=(int(rng.integers(*n_unl)), dim))
    pos_scores = unl_scores = None
    if with_scores:
        pos_scores = tuple(rng.uniform(0.05, 1.0, size=len(x)) for x in positives)
        unl_scores = rng.uniform(0.05, 1.0, size=len(unlabeled))
    return Batch(
        positives=positives,
        unlabeled=unlabeled,
        positive_scores=pos_scores,
        unlabeled_scores=unl_scores,
    )


def random_predictor(k, dim, head, seed):
    out = 1 if head == "sigmoid" else k + 1
    return predictor(init_params((dim, 6, out), head, seed=seed))
