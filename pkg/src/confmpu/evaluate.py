"""Span- and token-level scoring plus the dictionary-coverage sweep.

Spans are maximal runs of consecutive tokens sharing one positive class
(the model predicts bare class ids, so contiguous-same-class decoding is
the only consistent rule; two adjacent same-class gold entities are not
separable).  A predicted span is correct iff sentence, boundaries, and
class all match exactly.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .data import Corpus, Dictionary, corpus_from_texts, subset_dictionary
from .distant import annotate
from .features import featurize
from .risk import RiskConfig
from .pipeline import (
    TrainConfig,
    confidence_features,
    predict,
    score_confidence,
    train_confidence,
    train_ner,
)


@dataclass(frozen=True)
class Span:
    sentence_index: int
    start: int  # inclusive
    end: int    # exclusive
    class_id: int

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError("span start must precede end")
        if self.class_id < 1:
            raise ValueError("span class id must be positive")


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    zero_division: bool = False  # set when a denominator was empty

    @classmethod
    def from_counts(cls, correct: int, n_pred: int, n_gold: int) -> "Metrics":
        zero = n_pred == 0 or n_gold == 0
        p = correct / n_pred if n_pred else 0.0
        r = correct / n_gold if n_gold else 0.0
        f1 = 2 * p * r / (p + r) if p + r else 0.0
        return cls(p, r, f1, zero_division=zero)


def decode_spans(labels: Sequence[Sequence[int]], corpus: Corpus) -> list[Span]:
    """Maximal same-positive-class runs; class 0 and class changes break runs."""
    if len(labels) != len(corpus.sentences):
        raise ValueError("labels do not align with the corpus")
    spans: list[Span] = []
    for si, (row, sent) in enumerate(zip(labels, corpus.sentences)):
        if len(row) != len(sent):
            raise ValueError(f"label row {si} does not align with its sentence")
        start = None
        cur = 0
        for p, value in enumerate(row):
            value = int(value)
            if value != cur:
                if cur > 0:
                    spans.append(Span(si, start, p, cur))
                start = p if value > 0 else None
                cur = value
        if cur > 0:
            spans.append(Span(si, start, len(row), cur))
    return spans


def spans_to_labels(spans: Iterable[Span], corpus: Corpus) -> list[list[int]]:
    """Inverse of decode_spans for non-overlapping span sets."""
    table = [[0] * len(s) for s in corpus.sentences]
    for span in spans:
        for p in range(span.start, span.end):
            table[span.sentence_index][p] = span.class_id
    return table


def span_prf(
    pred: Iterable[Span], gold: Iterable[Span]
) -> tuple[Metrics, dict[int, Metrics]]:
    """Exact-match span scoring, overall and per class."""
    pred_set = set(pred)
    gold_set = set(gold)
    classes = {s.class_id for s in pred_set} | {s.class_id for s in gold_set}
    per_class = {}
    for cid in sorted(classes):
        p_c = {s for s in pred_set if s.class_id == cid}
        g_c = {s for s in gold_set if s.class_id == cid}
        per_class[cid] = Metrics.from_counts(len(p_c & g_c), len(p_c), len(g_c))
    overall = Metrics.from_counts(
        len(pred_set & gold_set), len(pred_set), len(gold_set)
    )
    return overall, per_class


def token_prf(
    pred: Sequence[Sequence[int]], gold: Sequence[Sequence[int]]
) -> tuple[Metrics, dict[int, Metrics]]:
    """Per-class token precision/recall/F1 plus the micro average."""
    if [len(r) for r in pred] != [len(r) for r in gold]:
        raise ValueError("label tables are misaligned")
    p_flat = np.concatenate([np.asarray(r, dtype=np.int64) for r in pred])
    g_flat = np.concatenate([np.asarray(r, dtype=np.int64) for r in gold])
    classes = sorted(set(p_flat[p_flat > 0]) | set(g_flat[g_flat > 0]))
    per_class = {}
    tp_all = fp_all = fn_all = 0
    for cid in classes:
        tp = int(np.sum((p_flat == cid) & (g_flat == cid)))
        n_pred = int(np.sum(p_flat == cid))
        n_gold = int(np.sum(g_flat == cid))
        per_class[int(cid)] = Metrics.from_counts(tp, n_pred, n_gold)
        tp_all += tp
        fp_all += n_pred - tp
        fn_all += n_gold - tp
    overall = Metrics.from_counts(tp_all, tp_all + fp_all, tp_all + fn_all)
    return overall, per_class


def metrics_json_dict(overall: Metrics, per_class: dict[int, Metrics], class_names) -> dict:
    out = {
        "precision": overall.precision,
        "recall": overall.recall,
        "f1": overall.f1,
        "per_class": {
            class_names[cid - 1]: {
                "precision": m.precision, "recall": m.recall, "f1": m.f1
            }
            for cid, m in per_class.items()
        },
    }
    return out


@dataclass(frozen=True)
class SweepRow:
    coverage: float
    kind: str
    seed: int
    metrics: Metrics


@dataclass(frozen=True)
class SweepReport:
    rows: tuple[SweepRow, ...]

    def to_csv(self) -> str:
        lines = ["coverage,kind,seed,precision,recall,f1"]
        for r in self.rows:
            m = r.metrics
            lines.append(
                f"{r.coverage!r},{r.kind},{r.seed},{m.precision!r},{m.recall!r},{m.f1!r}"
            )
        return "\n".join(lines) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")

    def cell(self, coverage: float, kind: str) -> list[Metrics]:
        return [
            r.metrics for r in self.rows
            if r.kind == kind and math.isclose(r.coverage, coverage)
        ]


def split_heldout(corpus: Corpus, fraction: float = 0.2) -> tuple[Corpus, Corpus]:
    """(train, heldout): the last `fraction` of sentences, by corpus order,
    is held out and never trained on."""
    n = len(corpus.sentences)
    cut = n - max(1, int(round(fraction * n)))
    if cut < 1:
        raise ValueError("corpus too small to split")

    def take(sel):
        return corpus_from_texts(
            [s.texts() for s in corpus.sentences[sel]],
            corpus.class_names,
            gold=None if corpus.gold is None else [list(r) for r in corpus.gold[sel]],
            distant=None
            if corpus.distant is None
            else [list(r) for r in corpus.distant[sel]],
        )

    return take(slice(0, cut)), take(slice(cut, n))


def _run_cell(
    corpus: Corpus,
    dictionary: Dictionary,
    fraction: float,
    kind: str,
    seed: int,
    cfg: TrainConfig,
    heldout_fraction: float,
) -> SweepRow:
    sub = subset_dictionary(dictionary, fraction)
    train_c, held_c = split_heldout(corpus, heldout_fraction)
    train_c = annotate(train_c, sub)
    feats_train = featurize(train_c, sub, cfg.features)
    feats_held = featurize(held_c, sub, cfg.features)
    cfg = replace(cfg, seed=seed)
    scores = None
    if kind == "conf-mpu":
        feats_conf = confidence_features(feats_train, cfg.features)
        conf = train_confidence(train_c, feats_conf, cfg)
        scores = score_confidence(conf.params, train_c, feats_conf)
    ner_risk = RiskConfig(kind, cfg.risk.priors, gamma=cfg.risk.gamma, tau=cfg.risk.tau)
    result = train_ner(train_c, feats_train, scores, replace(cfg, risk=ner_risk))
    pred_labels = predict(result.params, held_c, feats_held)
    overall, _ = span_prf(
        decode_spans(pred_labels, held_c), decode_spans(held_c.gold, held_c)
    )
    return SweepRow(coverage=fraction, kind=kind, seed=seed, metrics=overall)


def coverage_sweep(
    corpus: Corpus,
    dictionary: Dictionary,
    fractions: Sequence[float],
    kinds: Sequence[str],
    seeds: Sequence[int],
    cfg: TrainConfig,
    heldout_fraction: float = 0.2,
    jobs: int = 1,
) -> SweepReport:
    """Train and score one model per (fraction, kind, seed) cell.

    Held-out gold labels are used for evaluation only; training sees the
    distant labels produced by the subset dictionary.
    """
    if corpus.gold is None:
        raise ValueError("sweep evaluation requires gold labels")
    cells = [
        (corpus, dictionary, float(fr), kind, int(seed), cfg, heldout_fraction)
        for fr in fractions
        for kind in kinds
        for seed in seeds
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_cell_star, cells))
    else:
        rows = [_run_cell(*cell) for cell in cells]
    rows.sort(key=lambda r: (r.coverage, r.kind, r.seed))
    return SweepReport(rows=tuple(rows))


def _run_cell_star(args) -> SweepRow:
    return _run_cell(*args)
