"""Deliberately naive reference implementations of the risk estimators.

Everything here is written with explicit Python loops and its own loss
arithmetic, sharing no code with the library, so estimator outputs can be
cross-checked against an independent path.  Inputs are plain lists:
per-class lists of probability rows (or sigmoid scalars), parallel
confidence lists, and plain floats for the hyperparameters.
"""

from __future__ import annotations


def naive_loss(pred, target) -> float:
    """Bounded MAE; pred is a probability row or a sigmoid scalar."""
    if isinstance(pred, float):
        return 1.0 - pred if target == 1 else pred
    n = len(pred)
    total = 0.0
    for i in range(n):
        y = 1.0 if i == target else 0.0
        total += abs(y - pred[i])
    return total / n


def _mean(values) -> float:
    return sum(values) / len(values)


def naive_pn(pos, unl, priors, gamma) -> float:
    pi = priors[0]
    pos_term = pi * _mean([naive_loss(p, 1) for p in pos[0]])
    neg_term = (1.0 - pi) * _mean([naive_loss(p, 0) for p in unl])
    return gamma * pos_term + neg_term


def naive_bpu(pos, unl, priors, gamma) -> float:
    pi = priors[0]
    pos_term = pi * _mean([naive_loss(p, 1) for p in pos[0]])
    bracket = _mean([naive_loss(p, 0) for p in unl]) - pi * _mean(
        [naive_loss(p, 0) for p in pos[0]]
    )
    return gamma * pos_term + max(0.0, bracket)


def naive_mpn(pos, unl, priors, gamma) -> float:
    pos_term = 0.0
    for i, rows in enumerate(pos):
        pos_term += priors[i] * _mean([naive_loss(p, i + 1) for p in rows])
    neg_term = (1.0 - sum(priors)) * _mean([naive_loss(p, 0) for p in unl])
    return gamma * pos_term + neg_term


def naive_mpu(pos, unl, priors, gamma) -> float:
    pos_term = 0.0
    correction = 0.0
    for i, rows in enumerate(pos):
        pos_term += priors[i] * _mean([naive_loss(p, i + 1) for p in rows])
        correction += priors[i] * _mean([naive_loss(p, 0) for p in rows])
    unl_term = _mean([naive_loss(p, 0) for p in unl])
    return gamma * pos_term + max(0.0, unl_term - correction)


def naive_conf_mpu(pos, pos_lam, unl, unl_lam, priors, gamma, tau) -> float:
    total = 0.0
    for i, rows in enumerate(pos):
        class_sum = 0.0
        for p, lam in zip(rows, pos_lam[i]):
            a = naive_loss(p, i + 1)
            c = naive_loss(p, 0)
            b = c / lam if lam > tau else 0.0
            class_sum += max(0.0, a + b - c)
        total += gamma * priors[i] / len(rows) * class_sum
    unl_sum = 0.0
    for p, lam in zip(unl, unl_lam):
        if lam <= tau:
            unl_sum += naive_loss(p, 0)
    return total + unl_sum / len(unl)
