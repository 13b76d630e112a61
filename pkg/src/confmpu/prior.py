"""Class prior estimation from distantly labeled tokens.

The induction estimator follows the tree-induction idea behind label
frequency estimators for positive-unlabeled data: greedily descend
axis-aligned splits of the feature space toward cells dense in labeled
positives, lower-bound the label frequency c_i on the densest cell with a
one-sided binomial (Hoeffding) correction, and set

    pi_hat_i = (overall labeled-i fraction) / c_hat_i,

clipped to (1e-4, 0.5).  Labeled-positive fractions of a cell never
exceed c_i in expectation, so the maximized lower bound underestimates
c_i and the resulting prior errs on the large side.  No fidelity to any
particular published estimator is claimed; the downstream training is
insensitive to prior error of this magnitude.

An oracle estimator (exact gold fractions) is provided for testing, and
configured priors can be injected directly.

Estimate on label-independent features only: dictionary-derived lexicon
bits encode the labeling mechanism itself, so cells split on them look
fully labeled and the label frequency is overestimated.  Callers should
pass the same masked view used by the confidence step
(pipeline.confidence_features).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Corpus

METHODS = ("induction", "oracle", "configured")

_CLIP_LO = 1e-4
_CLIP_HI = 0.5


@dataclass(frozen=True)
class PriorEstimate:
    values: tuple[float, ...]  # pi_hat_i, i = 1..k
    method: str

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if any(v <= 0.0 for v in self.values):
            raise ValueError("priors must be positive")
        if sum(self.values) >= 1.0:
            raise ValueError("priors must sum to less than 1")

    def to_json_dict(self, class_names) -> dict[str, float]:
        return {name: v for name, v in zip(class_names, self.values)}


def configured_priors(values) -> PriorEstimate:
    return PriorEstimate(values=tuple(float(v) for v in values), method="configured")


def oracle_priors(corpus: Corpus) -> PriorEstimate:
    """Exact gold token fraction per class."""
    if corpus.gold is None:
        raise ValueError("oracle priors require gold labels")
    counts = np.zeros(corpus.num_classes + 1, dtype=np.int64)
    total = 0
    for row in corpus.gold:
        for g in row:
            counts[g] += 1
            total += 1
    for cid in range(1, corpus.num_classes + 1):
        if counts[cid] == 0:
            raise ValueError(
                f"class {corpus.class_names[cid - 1]!r} has no gold tokens; "
                "priors must be positive"
            )
    return PriorEstimate(
        values=tuple(float(counts[c]) / total for c in range(1, corpus.num_classes + 1)),
        method="oracle",
    )


def _lower_bound(n_labeled: int, n_total: int, delta: float) -> float:
    if n_total == 0:
        return -1.0
    return n_labeled / n_total - math.sqrt(math.log(1.0 / delta) / (2.0 * n_total))


def _densest_cell_bound(
    x: np.ndarray,
    labeled: np.ndarray,
    delta: float,
    min_cell: int,
    max_depth: int,
    quantiles: tuple[float, ...],
) -> float:
    """Greedy hill-climb over axis-aligned sub-cells, maximizing the
    corrected labeled fraction; returns the best bound seen."""
    idx = np.arange(len(x))
    current = _lower_bound(int(labeled.sum()), len(idx), delta)
    best = current
    for _ in range(max_depth):
        best_child: np.ndarray | None = None
        best_child_score = current
        for dim in range(x.shape[1]):
            col = x[idx, dim]
            for q in quantiles:
                t = np.quantile(col, q)
                below = idx[col <= t]
                above = idx[col > t]
                for side in (below, above):
                    if len(side) < min_cell or len(side) == len(idx):
                        continue
                    score = _lower_bound(int(labeled[side].sum()), len(side), delta)
                    if score > best_child_score:
                        best_child_score = score
                        best_child = side
        if best_child is None:
            break
        idx = best_child
        current = best_child_score
        best = max(best, current)
    return best


def estimate_priors_induction(
    corpus: Corpus,
    features: list[np.ndarray],
    delta: float = 0.1,
    min_cell: int = 200,
    max_depth: int = 8,
    quantiles: tuple[float, ...] = (0.25, 0.5, 0.75),
) -> PriorEstimate:
    """Estimate class priors from distant labels and token features.

    delta is the one-sided confidence level of the cell correction;
    min_cell stops the descent before cells get too small for the bound
    to be informative.
    """
    if corpus.distant is None:
        raise ValueError("induction priors require distant labels")
    x = np.concatenate(features, axis=0)
    y = np.concatenate([np.asarray(row, dtype=np.int64) for row in corpus.distant])
    if len(x) != len(y):
        raise ValueError("features do not align with the corpus")
    values = []
    for cid in range(1, corpus.num_classes + 1):
        labeled = y == cid
        n_labeled = int(labeled.sum())
        if n_labeled == 0:
            raise ValueError(
                f"class {corpus.class_names[cid - 1]!r} has no distantly labeled tokens"
            )
        overall = n_labeled / len(y)
        c_hat = _densest_cell_bound(
            x, labeled, delta, min(min_cell, max(1, len(y) // 4)), max_depth, quantiles
        )
        c_hat = max(c_hat, overall)  # the bound can go vacuous on tiny data
        values.append(float(np.clip(overall / c_hat, _CLIP_LO, _CLIP_HI)))
    if sum(values) >= 1.0:  # degenerate corpora: renormalize below the simplex
        scale = 0.99 / sum(values)
        values = [max(v * scale, _CLIP_LO) for v in values]
    return PriorEstimate(values=tuple(values), method="induction")
