"""Two-step training: a binary PU confidence scorer, then the multi-class
token classifier under a chosen risk estimator.

Step one collapses all positive classes into a single "entity" class and
trains a sigmoid-head model with the binary PU risk (prior = sum of the
class priors).  Its per-token scores feed the conf-mpu estimator in step
two.  Training never reads gold labels: the functions only accept distant
tables and features, so leakage is ruled out at the interface.

No early stopping and no validation set anywhere; training runs for the
configured number of epochs and the final-epoch parameters are returned.
Mini-batches group whole sentences; estimator counts n_Pi and n_U are
per-batch.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .data import Corpus
from .features import FeatureConfig, zero_lexicon_bits
from .model import ModelParams, SGD, init_params, forward_batch, risk_and_grad
from .risk import Batch, RiskConfig

logger = logging.getLogger(__name__)

_SCORE_EPS = 1e-12  # keeps lambda-hat strictly inside (0, 1)


@dataclass(frozen=True)
class TrainConfig:
    risk: RiskConfig
    epochs: int = 100
    lr: float = 0.3
    batch_size: int = 64  # sentences per mini-batch
    seed: int = 0
    hidden: int = 64
    momentum: float = 0.9
    conf_gamma: float | None = None  # class weight for the binary step
    features: FeatureConfig = field(default_factory=FeatureConfig)

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.hidden < 1:
            raise ValueError("hidden must be >= 1")
        if self.conf_gamma is not None and self.conf_gamma <= 0:
            raise ValueError("conf_gamma must be positive")


class EpochLog(NamedTuple):
    epoch: int
    empirical_risk: float
    wall_ms: float


@dataclass(frozen=True)
class TrainResult:
    params: ModelParams
    history: tuple[EpochLog, ...]


def _flatten(corpus: Corpus, features: list[np.ndarray]):
    if len(features) != len(corpus.sentences):
        raise ValueError("features do not align with the corpus")
    if corpus.distant is None:
        raise ValueError("training requires distant labels")
    x = np.concatenate(features, axis=0)
    y = np.concatenate([np.asarray(r, dtype=np.int64) for r in corpus.distant])
    spans = []
    pos = 0
    for sent in corpus.sentences:
        spans.append(np.arange(pos, pos + len(sent)))
        pos += len(sent)
    return x, y, spans


def flatten_scores(scores: list[np.ndarray]) -> np.ndarray:
    return np.concatenate([np.asarray(s, dtype=np.float64) for s in scores])


def make_batch(
    x: np.ndarray,
    labels: np.ndarray,
    indices: np.ndarray,
    k: int,
    scores: np.ndarray | None = None,
) -> Batch:
    """Assemble a risk Batch from flat token arrays and a token index set."""
    xb = x[indices]
    yb = labels[indices]
    sb = scores[indices] if scores is not None else None
    positives = tuple(xb[yb == i] for i in range(1, k + 1))
    pos_scores = tuple(sb[yb == i] for i in range(1, k + 1)) if sb is not None else None
    unl = yb == 0
    return Batch(
        positives=positives,
        unlabeled=xb[unl],
        positive_scores=pos_scores,
        unlabeled_scores=sb[unl] if sb is not None else None,
    )


def corpus_batch(
    corpus: Corpus, features: list[np.ndarray], scores: list[np.ndarray] | None = None
) -> Batch:
    """One Batch holding the whole corpus (distant labels split the groups)."""
    x, y, _ = _flatten(corpus, features)
    s = flatten_scores(scores) if scores is not None else None
    return make_batch(x, y, np.arange(len(y)), corpus.num_classes, s)


def _train_loop(
    x: np.ndarray,
    labels: np.ndarray,
    spans: list[np.ndarray],
    scores: np.ndarray | None,
    risk_cfg: RiskConfig,
    cfg: TrainConfig,
    head: str,
) -> TrainResult:
    k = risk_cfg.num_classes
    out_dim = 1 if head == "sigmoid" else k + 1
    params = init_params((x.shape[1], cfg.hidden, out_dim), head, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    opt = SGD(cfg.lr, cfg.momentum)
    history: list[EpochLog] = []
    n_sent = len(spans)
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        order = rng.permutation(n_sent)
        batch_values = []
        for lo in range(0, n_sent, cfg.batch_size):
            chunk = order[lo:lo + cfg.batch_size]
            idx = np.concatenate([spans[s] for s in chunk])
            batch = make_batch(x, labels, idx, k, scores)
            value, grads = risk_and_grad(params, batch, risk_cfg, allow_empty=True)
            params = opt.step(params, grads)
            batch_values.append(value)
        wall_ms = (time.perf_counter() - t0) * 1000.0
        history.append(EpochLog(epoch, float(np.mean(batch_values)), wall_ms))
    return TrainResult(params=params, history=tuple(history))


def confidence_features(
    features: list[np.ndarray], feature_cfg: FeatureConfig
) -> list[np.ndarray]:
    """Feature view for the confidence step: lexicon bits zeroed.

    The bits are an exact dictionary-membership indicator, so a scorer
    that sees them can short-circuit to the distant labels instead of
    generalizing to unmatched entity tokens.  Pass the same view to both
    train_confidence and score_confidence.
    """
    return zero_lexicon_bits(features, feature_cfg)


def train_confidence(
    corpus: Corpus, features: list[np.ndarray], cfg: TrainConfig
) -> TrainResult:
    """Step one: binary PU training of the sigmoid-head confidence scorer.

    All positive classes collapse to one; the binary prior is the sum of
    the configured class priors.  The binary task is less imbalanced than
    any single class, so cfg.conf_gamma (when set) replaces the class
    weight for this step.
    """
    x, y, spans = _flatten(corpus, features)
    binary = (y > 0).astype(np.int64)
    if binary.sum() == 0:
        raise ValueError("no distantly labeled positive tokens")
    gamma = cfg.conf_gamma if cfg.conf_gamma is not None else cfg.risk.gamma
    risk_cfg = RiskConfig("bpu", (sum(cfg.risk.priors),), gamma=gamma, tau=cfg.risk.tau)
    return _train_loop(x, binary, spans, None, risk_cfg, cfg, head="sigmoid")


def score_confidence(
    params: ModelParams, corpus: Corpus, features: list[np.ndarray]
) -> list[np.ndarray]:
    """Per-token entity confidence, strictly inside (0, 1)."""
    if params.head != "sigmoid":
        raise ValueError("confidence scoring requires a sigmoid-head model")
    out = []
    for mat in features:
        p = forward_batch(params, mat)
        out.append(np.clip(p, _SCORE_EPS, 1.0 - _SCORE_EPS))
    return out


def train_ner(
    corpus: Corpus,
    features: list[np.ndarray],
    scores: list[np.ndarray] | None,
    cfg: TrainConfig,
) -> TrainResult:
    """Step two: train the multi-class (softmax) model under cfg.risk.kind."""
    if cfg.risk.kind == "conf-mpu" and scores is None:
        raise ValueError("conf-mpu training requires confidence scores")
    if cfg.risk.kind in ("pn", "bpu") and corpus.num_classes != 1:
        raise ValueError(f"{cfg.risk.kind} risk requires a single positive class")
    if len(cfg.risk.priors) != corpus.num_classes:
        raise ValueError("one prior per corpus class is required")
    x, y, spans = _flatten(corpus, features)
    flat_scores = flatten_scores(scores) if scores is not None else None
    if flat_scores is not None and len(flat_scores) != len(y):
        raise ValueError("confidence scores do not align with the corpus")
    return _train_loop(x, y, spans, flat_scores, cfg.risk, cfg, head="softmax")


def predict(
    params: ModelParams, corpus: Corpus, features: list[np.ndarray]
) -> list[np.ndarray]:
    """Arg-max class ids per token; ties break toward the lower id."""
    if params.head != "softmax":
        raise ValueError("prediction requires a softmax-head model")
    return [forward_batch(params, mat).argmax(axis=1) for mat in features]


def write_scores(scores: list[np.ndarray], path: str | Path) -> None:
    """Confidence score file: one float per token line, blank line between
    sentences, aligned with the corpus TSV."""
    blocks = ["\n".join(repr(float(v)) for v in sent) for sent in scores]
    Path(path).write_text("\n\n".join(blocks) + "\n", encoding="utf-8")


def load_scores(path: str | Path) -> list[np.ndarray]:
    text = Path(path).read_text(encoding="utf-8")
    out = []
    for block in text.split("\n\n"):
        vals = [float(line) for line in block.split("\n") if line]
        if vals:
            out.append(np.array(vals))
    return out


def write_training_log(history, path: str | Path) -> None:
    rows = ["epoch,empirical_risk,wall_ms"]
    rows += [f"{e.epoch},{e.empirical_risk!r},{e.wall_ms:.3f}" for e in history]
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")
