"""Empirical risk estimators for learning token classifiers from
positive and unlabeled data.

Five interchangeable estimators over a batch of per-class positive samples
X_P1..X_Pk and unlabeled samples X_U, with class priors pi_i, class weight
gamma, and (for the confidence-weighted estimator) per-sample confidence
scores lam in (0, 1] and a threshold tau:

pn        gamma*pi*mean l(f(xP),1) + (1-pi)*mean l(f(xU),0)
          (binary supervised baseline, unlabeled treated as true negatives)
bpu       gamma*pi*mean l(f(xP),1)
          + max{0, mean_U l(f(x),0) - pi*mean_P l(f(x),0)}
mpn       gamma*sum_i pi_i*mean l(f(xPi),i) + (1-sum pi_i)*mean_U l(f(x),0)
mpu       gamma*sum_i pi_i*mean l(f(xPi),i)
          + max{0, mean_U l(f(x),0) - sum_i pi_i*mean_Pi l(f(x),0)}
conf-mpu  gamma*sum_i (pi_i/n_i)*sum_j max{0, A + B - C}
          + (1/n_U)*sum_j 1[lam<=tau]*l(f(xU),0)
          with  A = l(f(xPi),i),
                B = 1[lam>tau]*l(f(xPi),0)/lam,
                C = l(f(xPi),0).

The loss is the bounded mean absolute error over the k+1 output
probabilities, l(f(x), y) = (1/(k+1)) * sum_c |y_c - f(x)_c| in
[0, 2/(k+1)].  gamma multiplies exactly the positive-class summands, so
every estimator decomposes as gamma*P + N with P and N gamma-independent.
Clamped max{0, .} terms use subgradient 0 on the clamped branch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

logger = logging.getLogger(__name__)

KINDS = ("pn", "bpu", "mpn", "mpu", "conf-mpu")


@dataclass(frozen=True)
class RiskConfig:
    kind: str
    priors: tuple[float, ...]
    gamma: float = 1.0
    tau: float = 0.5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown risk kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "priors", tuple(float(p) for p in self.priors))
        if not self.priors:
            raise ValueError("at least one class prior is required")
        if any(not 0.0 < p < 1.0 for p in self.priors):
            raise ValueError("each prior must lie in (0, 1)")
        if sum(self.priors) >= 1.0:
            raise ValueError("priors must sum to less than 1")
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")

    @property
    def num_classes(self) -> int:
        return len(self.priors)


@dataclass(frozen=True)
class Batch:
    """Per-class positive feature matrices plus unlabeled features.

    Confidence scores, when present, parallel the sample arrays and must
    lie in (0, 1]; they are required by the conf-mpu estimator.
    """

    positives: tuple[np.ndarray, ...]
    unlabeled: np.ndarray
    positive_scores: tuple[np.ndarray, ...] | None = None
    unlabeled_scores: np.ndarray | None = None

    def __post_init__(self):
        if self.positive_scores is not None:
            for x, s in zip(self.positives, self.positive_scores):
                if len(s) != len(x):
                    raise ValueError("positive_scores do not align with positives")
        if self.unlabeled_scores is not None:
            if len(self.unlabeled_scores) != len(self.unlabeled):
                raise ValueError("unlabeled_scores do not align with unlabeled")

    @property
    def num_classes(self) -> int:
        return len(self.positives)

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(len(x) for x in self.positives)

    @property
    def n_unlabeled(self) -> int:
        return len(self.unlabeled)


def mae_losses(probs: np.ndarray, target: int) -> np.ndarray:
    """Vectorized bounded MAE loss against a one-hot target.

    probs is (n, k+1) softmax output or (n,) sigmoid output; a sigmoid
    scalar p is scored as the implied binary distribution (1-p, p).
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim == 1:  # sigmoid head, k = 1
        return 1.0 - probs if target == 1 else probs.copy()
    n_out = probs.shape[1]
    pt = probs[:, target]
    return (np.abs(1.0 - pt) + probs.sum(axis=1) - pt) / n_out


class _Losses(NamedTuple):
    pos: list[np.ndarray]   # l(f(x), i) per class
    pos0: list[np.ndarray]  # l(f(x), 0) per class
    unl0: np.ndarray        # l(f(x), 0) on unlabeled


class _Weights(NamedTuple):
    """d(risk)/d(loss term), matching the _Losses layout."""

    pos: list[np.ndarray]
    pos0: list[np.ndarray]
    unl0: np.ndarray


def _losses_from_probs(
    pos_probs: Sequence[np.ndarray | None], unl_probs: np.ndarray | None
) -> _Losses:
    pos, pos0 = [], []
    for i, probs in enumerate(pos_probs, start=1):
        if probs is None or len(probs) == 0:
            pos.append(np.zeros(0))
            pos0.append(np.zeros(0))
        else:
            pos.append(mae_losses(probs, i if probs.ndim > 1 else 1))
            pos0.append(mae_losses(probs, 0))
    unl0 = (
        mae_losses(unl_probs, 0)
        if unl_probs is not None and len(unl_probs)
        else np.zeros(0)
    )
    return _Losses(pos, pos0, unl0)


def batch_losses(batch: Batch, f: Callable[[np.ndarray], np.ndarray]) -> _Losses:
    """Apply the decision function and collect the per-sample MAE losses."""
    pos_probs = [
        np.asarray(f(x), dtype=np.float64) if len(x) else None for x in batch.positives
    ]
    unl_probs = (
        np.asarray(f(batch.unlabeled), dtype=np.float64)
        if batch.n_unlabeled
        else None
    )
    return _losses_from_probs(pos_probs, unl_probs)


def _check_conf_scores(batch: Batch) -> None:
    if batch.positive_scores is None or batch.unlabeled_scores is None:
        raise ValueError("conf-mpu requires confidence scores on every sample")
    for s in (*batch.positive_scores, batch.unlabeled_scores):
        s = np.asarray(s)
        if s.size and (np.min(s) <= 0.0 or np.max(s) > 1.0):
            raise ValueError("confidence scores must lie in (0, 1]")


def _require_nonempty(cfg: RiskConfig, batch: Batch) -> None:
    if batch.n_unlabeled == 0:
        raise ValueError("unlabeled set is empty")
    for i, n in enumerate(batch.counts, start=1):
        if n == 0:
            raise ValueError(f"positive class {i} has no samples in the batch")


def value_and_weights(
    cfg: RiskConfig,
    losses: _Losses,
    batch: Batch,
    allow_empty: bool = False,
) -> tuple[float, _Weights]:
    """Risk value plus d(risk)/d(loss) for every per-sample loss term.

    With allow_empty, classes absent from the batch contribute zero terms
    (logged once per call site) so sparse mini-batches can train.
    """
    k = cfg.num_classes
    if len(losses.pos) != k:
        raise ValueError(f"batch has {len(losses.pos)} classes, config has {k}")
    if not allow_empty:
        _require_nonempty(cfg, batch)
    elif any(n == 0 for n in batch.counts):
        logger.warning(
            "batch is missing samples for %d positive class(es); their risk terms are 0",
            sum(1 for n in batch.counts if n == 0),
        )
    gamma, priors, tau = cfg.gamma, cfg.priors, cfg.tau
    n_u = len(losses.unl0)

    w_pos = [np.zeros_like(l) for l in losses.pos]
    w_pos0 = [np.zeros_like(l) for l in losses.pos0]
    w_unl0 = np.zeros_like(losses.unl0)

    def positive_means() -> float:
        total = 0.0
        for i in range(k):
            n_i = len(losses.pos[i])
            if n_i:
                total += priors[i] * float(np.sum(losses.pos[i])) / n_i
                w_pos[i][:] = gamma * priors[i] / n_i
        return total

    kind = cfg.kind
    if kind == "pn":
        if k != 1:
            raise ValueError("pn risk is defined for k = 1")
        pos_term = positive_means()
        neg = 0.0
        if n_u:
            neg = (1.0 - priors[0]) * float(np.sum(losses.unl0)) / n_u
            w_unl0[:] = (1.0 - priors[0]) / n_u
        return gamma * pos_term + neg, _Weights(w_pos, w_pos0, w_unl0)

    if kind == "mpn":
        pos_term = positive_means()
        neg = 0.0
        if n_u:
            coeff = 1.0 - sum(priors)
            neg = coeff * float(np.sum(losses.unl0)) / n_u
            w_unl0[:] = coeff / n_u
        return gamma * pos_term + neg, _Weights(w_pos, w_pos0, w_unl0)

    if kind in ("bpu", "mpu"):
        if kind == "bpu" and k != 1:
            raise ValueError("bpu risk is defined for k = 1")
        pos_term = positive_means()
        unl_mean = float(np.sum(losses.unl0)) / n_u if n_u else 0.0
        correction = 0.0
        for i in range(k):
            n_i = len(losses.pos0[i])
            if n_i:
                correction += priors[i] * float(np.sum(losses.pos0[i])) / n_i
        bracket = unl_mean - correction
        if bracket > 0.0:
            if n_u:
                w_unl0[:] = 1.0 / n_u
            for i in range(k):
                n_i = len(losses.pos0[i])
                if n_i:
                    w_pos0[i][:] = -priors[i] / n_i
            neg = bracket
        else:
            neg = 0.0
        return gamma * pos_term + neg, _Weights(w_pos, w_pos0, w_unl0)

    assert kind == "conf-mpu"
    _check_conf_scores(batch)
    pos_total = 0.0
    for i in range(k):
        n_i = len(losses.pos[i])
        if n_i == 0:
            continue
        lam = np.asarray(batch.positive_scores[i], dtype=np.float64)
        over = lam > tau
        b = np.where(over, losses.pos0[i] / lam, 0.0)
        # grouped as A + (B - C): at lambda == 1, B - C is exactly 0 and the
        # per-sample term is exactly A
        t = losses.pos[i] + (b - losses.pos0[i])
        active = t > 0.0
        scale = priors[i] / n_i
        pos_total += scale * float(np.sum(np.where(active, t, 0.0)))
        w_pos[i][:] = np.where(active, gamma * scale, 0.0)
        w_pos0[i][:] = np.where(
            active, gamma * scale * (np.where(over, 1.0 / lam, 0.0) - 1.0), 0.0
        )
    neg = 0.0
    if n_u:
        lam_u = np.asarray(batch.unlabeled_scores, dtype=np.float64)
        keep = lam_u <= tau
        neg = float(np.sum(np.where(keep, losses.unl0, 0.0))) / n_u
        w_unl0[:] = np.where(keep, 1.0 / n_u, 0.0)
    return gamma * pos_total + neg, _Weights(w_pos, w_pos0, w_unl0)


def risk_components(
    batch: Batch, cfg: RiskConfig, f: Callable, allow_empty: bool = False
) -> tuple[float, float]:
    """(P, N) with empirical risk == gamma * P + N; both gamma-independent."""
    losses = batch_losses(batch, f)
    v1, _ = value_and_weights(
        RiskConfig(cfg.kind, cfg.priors, gamma=1.0, tau=cfg.tau), losses, batch, allow_empty
    )
    v2, _ = value_and_weights(
        RiskConfig(cfg.kind, cfg.priors, gamma=2.0, tau=cfg.tau), losses, batch, allow_empty
    )
    p = v2 - v1
    return p, v1 - p


def empirical_risk(
    batch: Batch, cfg: RiskConfig, f: Callable, allow_empty: bool = False
) -> float:
    """Evaluate the estimator selected by cfg.kind on one batch."""
    value, _ = value_and_weights(cfg, batch_losses(batch, f), batch, allow_empty)
    return value


def risk_pn(batch: Batch, cfg: RiskConfig, f: Callable) -> float:
    return empirical_risk(batch, _with_kind(cfg, "pn"), f)


def risk_bpu(batch: Batch, cfg: RiskConfig, f: Callable) -> float:
    return empirical_risk(batch, _with_kind(cfg, "bpu"), f)


def risk_mpn(batch: Batch, cfg: RiskConfig, f: Callable) -> float:
    return empirical_risk(batch, _with_kind(cfg, "mpn"), f)


def risk_mpu(batch: Batch, cfg: RiskConfig, f: Callable) -> float:
    return empirical_risk(batch, _with_kind(cfg, "mpu"), f)


def risk_conf_mpu(batch: Batch, cfg: RiskConfig, f: Callable) -> float:
    return empirical_risk(batch, _with_kind(cfg, "conf-mpu"), f)


def _with_kind(cfg: RiskConfig, kind: str) -> RiskConfig:
    if cfg.kind == kind:
        return cfg
    return RiskConfig(kind, cfg.priors, gamma=cfg.gamma, tau=cfg.tau)


@dataclass(frozen=True)
class LossCase:
    """One sample's term breakdown under the conf-mpu estimator.

    Positive rows carry A, B, C; unlabeled rows carry only D.  The
    contribution column sums exactly to the conf-mpu risk.
    """

    group: str      # "positive" | "unlabeled"
    class_id: int   # 1..k for positives, 0 for unlabeled
    index: int
    a: float
    b: float
    c: float
    d: float
    contribution: float


def loss_cases(batch: Batch, cfg: RiskConfig, f: Callable) -> list[LossCase]:
    """Per-sample A/B/C/D diagnostic for the conf-mpu estimator."""
    cfg = _with_kind(cfg, "conf-mpu")
    _require_nonempty(cfg, batch)
    _check_conf_scores(batch)
    losses = batch_losses(batch, f)
    rows: list[LossCase] = []
    for i in range(cfg.num_classes):
        n_i = len(losses.pos[i])
        lam = np.asarray(batch.positive_scores[i], dtype=np.float64)
        for j in range(n_i):
            a = float(losses.pos[i][j])
            c = float(losses.pos0[i][j])
            b = c / float(lam[j]) if lam[j] > cfg.tau else 0.0
            t = a + (b - c)
            contrib = cfg.gamma * cfg.priors[i] / n_i * (t if t > 0.0 else 0.0)
            rows.append(LossCase("positive", i + 1, j, a, b, c, 0.0, contrib))
    n_u = batch.n_unlabeled
    lam_u = np.asarray(batch.unlabeled_scores, dtype=np.float64)
    for j in range(n_u):
        d = float(losses.unl0[j]) if lam_u[j] <= cfg.tau else 0.0
        rows.append(LossCase("unlabeled", 0, j, 0.0, 0.0, 0.0, d, d / n_u))
    return rows


class MCDecomposition(NamedTuple):
    lhs: float
    rhs: float
    gap: float


def mc_decomposition_check(
    sampler,
    f: Callable,
    lam: Callable,
    tau: float,
    n_samples: int,
    seed: int = 0,
) -> MCDecomposition:
    """Monte-Carlo check of the threshold decomposition of the unlabeled
    negative risk:

        E_p(x)[l(f(x),0)] = sum_i pi_i * E_p(x|y=i)[1[lam>tau] l(f(x),0)/lam]
                            + E_p(x)[1[lam<=tau] l(f(x),0)]

    Each expectation is estimated with n_samples independent draws.  The
    sampler must expose ``priors``, ``sample(rng, n)`` drawing from the
    marginal, and ``sample_class(i, rng, n)`` drawing from the i-th
    positive class-conditional; ``f`` and ``lam`` must accept its sample
    batches.  Requires lam(x) > 0 everywhere (the identity's premise).
    """
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must lie in (0, 1]")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)

    def loss0(xs) -> np.ndarray:
        return mae_losses(np.asarray(f(xs), dtype=np.float64), 0)

    def lam_of(xs) -> np.ndarray:
        values = np.asarray(lam(xs), dtype=np.float64)
        if values.size and np.min(values) <= 0.0:
            raise ValueError("lam(x) = 0 encountered; the decomposition requires lam > 0")
        return values

    xs = sampler.sample(rng, n_samples)
    lhs = float(np.mean(loss0(xs)))

    rhs = 0.0
    for i, prior in enumerate(sampler.priors, start=1):
        xpi = sampler.sample_class(i, rng, n_samples)
        lam_p = lam_of(xpi)
        term = np.where(lam_p > tau, loss0(xpi) / lam_p, 0.0)
        rhs += float(prior) * float(np.mean(term))
    xu = sampler.sample(rng, n_samples)
    lam_u = lam_of(xu)
    rhs += float(np.mean(np.where(lam_u <= tau, loss0(xu), 0.0)))
    return MCDecomposition(lhs, rhs, abs(lhs - rhs))
