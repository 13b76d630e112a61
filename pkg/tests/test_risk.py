import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from confmpu.model import init_params, predictor
from confmpu.risk import (
    Batch,
    RiskConfig,
    _Losses,
    batch_losses,
    empirical_risk,
    loss_cases,
    mc_decomposition_check,
    risk_bpu,
    risk_components,
    risk_conf_mpu,
    risk_mpn,
    risk_mpu,
    risk_pn,
    value_and_weights,
)
from confmpu.synth import GaussianMixtureSampler

from conftest import random_batch, random_predictor
from oracles import (
    naive_bpu,
    naive_conf_mpu,
    naive_mpn,
    naive_mpu,
    naive_pn,
)


def _dummy_batch(counts, n_unl, lam_pos=None, lam_unl=None):
    """Batch whose feature content is irrelevant (loss-injection tests)."""
    return Batch(
        positives=tuple(np.zeros((n, 1)) for n in counts),
        unlabeled=np.zeros((n_unl, 1)),
        positive_scores=None if lam_pos is None else tuple(np.asarray(s) for s in lam_pos),
        unlabeled_scores=None if lam_unl is None else np.asarray(lam_unl),
    )


def _inject(cfg, pos, pos0, unl0, batch):
    losses = _Losses(
        [np.asarray(x, dtype=float) for x in pos],
        [np.asarray(x, dtype=float) for x in pos0],
        np.asarray(unl0, dtype=float),
    )
    value, _ = value_and_weights(cfg, losses, batch)
    return value


# ---- hand-arithmetic checks of the estimator aggregation ----------------


def test_pn_hand_example():
    batch = _dummy_batch([1], 1)
    cfg = RiskConfig("pn", (0.5,), gamma=1.0)
    assert _inject(cfg, [[0.2]], [[0.0]], [0.4], batch) == pytest.approx(0.3)
    cfg2 = RiskConfig("pn", (0.5,), gamma=2.0)
    assert _inject(cfg2, [[0.2]], [[0.0]], [0.4], batch) == pytest.approx(0.4)


def test_bpu_hand_example():
    batch = _dummy_batch([1], 1)
    cfg = RiskConfig("bpu", (0.1,))
    value = _inject(cfg, [[0.2]], [[0.8]], [0.4], batch)
    assert value == pytest.approx(0.02 + max(0.0, 0.4 - 0.08))


def test_bpu_clamp_active():
    batch = _dummy_batch([1], 1)
    cfg = RiskConfig("bpu", (0.5,), gamma=3.0)
    # unlabeled mean 0.5, correction 0.5 * 1.0 -> bracket exactly 0
    value = _inject(cfg, [[0.2]], [[1.0]], [0.5], batch)
    assert value == pytest.approx(3.0 * 0.5 * 0.2)


def test_mpn_hand_example():
    batch = _dummy_batch([1], 1)
    cfg = RiskConfig("mpn", (0.1,))
    assert _inject(cfg, [[0.2]], [[0.0]], [0.4], batch) == pytest.approx(0.38)


def test_mpu_hand_example():
    batch = _dummy_batch([1, 1], 1)
    cfg = RiskConfig("mpu", (0.1, 0.1))
    value = _inject(cfg, [[0.2], [0.4]], [[0.9], [0.8]], [0.5], batch)
    assert value == pytest.approx(0.06 + max(0.0, 0.5 - 0.17))
    # clamp active: unlabeled term 0.1, correction 0.17
    value = _inject(cfg, [[0.2], [0.4]], [[0.9], [0.8]], [0.1], batch)
    assert value == pytest.approx(0.06)


def test_conf_mpu_hand_example():
    # k=1, tau=0.5, gamma=1, pi=0.1; positive f=(0.2,0.8) lam=0.9;
    # unlabeled f=(0.6,0.4) lam=0.3
    def f(x):
        return np.where(x[:, :1] == 1.0, [[0.2, 0.8]], [[0.6, 0.4]])

    batch = Batch(
        positives=(np.array([[1.0, 0.0]]),),
        unlabeled=np.array([[0.0, 1.0]]),
        positive_scores=(np.array([0.9]),),
        unlabeled_scores=np.array([0.3]),
    )
    cfg = RiskConfig("conf-mpu", (0.1,), gamma=1.0, tau=0.5)
    expected = 0.1 * (0.2 + 0.8 / 0.9 - 0.8) + 0.4
    assert risk_conf_mpu(batch, cfg, f) == pytest.approx(expected, abs=1e-6)


def test_conf_mpu_lambda_one_recovers_supervised_loss():
    rng = np.random.default_rng(5)
    batch = random_batch(rng, 2, 4)
    batch = Batch(
        positives=batch.positives,
        unlabeled=batch.unlabeled,
        positive_scores=tuple(np.ones(len(x)) for x in batch.positives),
        unlabeled_scores=batch.unlabeled_scores,
    )
    cfg = RiskConfig("conf-mpu", (0.1, 0.1), tau=0.5)
    f = random_predictor(2, 4, "softmax", seed=1)
    cases = loss_cases(batch, cfg, f)
    for row in cases:
        if row.group == "positive":
            # B - C == 0 exactly at lambda == 1, so the term is exactly A
            assert row.b == row.c
            n_i = len(batch.positives[row.class_id - 1])
            assert row.contribution == cfg.gamma * cfg.priors[row.class_id - 1] / n_i * row.a


def test_conf_mpu_suspected_false_negative_not_counted():
    batch = _dummy_batch([1], 2, lam_pos=[[1.0]], lam_unl=[0.9, 0.2])
    cfg = RiskConfig("conf-mpu", (0.1,), tau=0.5)
    losses = _Losses([np.array([0.1])], [np.array([0.5])], np.array([0.7, 0.3]))
    value, weights = value_and_weights(cfg, losses, batch)
    # lam 0.9 > tau contributes nothing; lam 0.2 contributes 0.3 / 2
    assert value == pytest.approx(0.1 * (0.1 + 0.5 - 0.5) + 0.3 / 2)
    assert weights.unl0[0] == 0.0 and weights.unl0[1] == 0.5


def test_conf_mpu_requires_scores():
    batch = _dummy_batch([1], 1)
    cfg = RiskConfig("conf-mpu", (0.1,))
    with pytest.raises(ValueError, match="confidence scores"):
        risk_conf_mpu(batch, cfg, lambda x: np.full((len(x), 2), 0.5))


def test_conf_mpu_rejects_nonpositive_scores():
    batch = _dummy_batch([1], 1, lam_pos=[[0.0]], lam_unl=[0.5])
    cfg = RiskConfig("conf-mpu", (0.1,))
    with pytest.raises(ValueError, match="scores"):
        risk_conf_mpu(batch, cfg, lambda x: np.full((len(x), 2), 0.5))


def test_empty_sets_rejected_without_allow_empty():
    batch = _dummy_batch([0], 3, lam_pos=[[]], lam_unl=[0.5, 0.5, 0.5])
    cfg = RiskConfig("mpu", (0.1,))
    with pytest.raises(ValueError, match="no samples"):
        empirical_risk(batch, cfg, lambda x: np.full((len(x), 2), 0.5))


def test_pn_and_bpu_require_binary():
    batch = random_batch(np.random.default_rng(0), 2, 3)
    cfg = RiskConfig("pn", (0.1, 0.1))
    with pytest.raises(ValueError, match="k = 1"):
        empirical_risk(batch, cfg, random_predictor(2, 3, "softmax", 0))


# ---- independent naive oracle ------------------------------------------


@pytest.mark.parametrize("head", ["softmax", "sigmoid"])
def test_estimators_match_naive_oracle(head):
    rng = np.random.default_rng(42)
    for trial in range(40):
        k = 1 if head == "sigmoid" else int(rng.choice([1, 2, 4]))
        gamma = float(rng.choice([1.0, 15.0, 28.0]))
        tau = float(rng.choice([0.3, 0.5, 0.7]))
        dim = 4
        batch = random_batch(rng, k, dim)
        f = random_predictor(k, dim, head, seed=trial)
        priors = tuple([0.9 / (2 * k)] * k)
        cfg = RiskConfig("mpn", priors, gamma=gamma, tau=tau)

        def rows(x):
            probs = f(x)
            if probs.ndim == 1:
                return [float(p) for p in probs]
            return [list(map(float, r)) for r in probs]

        pos = [rows(x) for x in batch.positives]
        unl = rows(batch.unlabeled)
        pos_lam = [list(map(float, s)) for s in batch.positive_scores]
        unl_lam = list(map(float, batch.unlabeled_scores))

        assert risk_mpn(batch, cfg, f) == pytest.approx(
            naive_mpn(pos, unl, priors, gamma), abs=1e-12)
        assert risk_mpu(batch, cfg, f) == pytest.approx(
            naive_mpu(pos, unl, priors, gamma), abs=1e-12)
        assert risk_conf_mpu(batch, cfg, f) == pytest.approx(
            naive_conf_mpu(pos, pos_lam, unl, unl_lam, priors, gamma, tau),
            abs=1e-12)
        if k == 1:
            assert risk_pn(batch, cfg, f) == pytest.approx(
                naive_pn(pos, unl, priors, gamma), abs=1e-12)
            assert risk_bpu(batch, cfg, f) == pytest.approx(
                naive_bpu(pos, unl, priors, gamma), abs=1e-12)


# ---- structural properties ----------------------------------------------


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**31 - 1),
    kind_i=st.integers(min_value=0, max_value=4),
)
def test_estimators_never_negative(seed, kind_i):
    kind = ("pn", "bpu", "mpn", "mpu", "conf-mpu")[kind_i]
    rng = np.random.default_rng(seed)
    k = 1 if kind in ("pn", "bpu") else int(rng.integers(1, 4))
    batch = random_batch(rng, k, 3)
    f = random_predictor(k, 3, "softmax", seed=seed % 17)
    cfg = RiskConfig(kind, tuple([0.8 / (2 * k)] * k),
                     gamma=float(rng.uniform(0.5, 30)),
                     tau=float(rng.uniform(0.1, 1.0)))
    assert empirical_risk(batch, cfg, f) >= 0.0


def test_gamma_scales_only_positive_terms():
    rng = np.random.default_rng(11)
    batch = random_batch(rng, 2, 4)
    f = random_predictor(2, 4, "softmax", seed=2)
    for kind in ("mpn", "mpu", "conf-mpu"):
        base = RiskConfig(kind, (0.1, 0.15), gamma=1.0)
        p, n = risk_components(batch, base, f)
        for gamma in (1.0, 7.0, 28.0):
            cfg = RiskConfig(kind, (0.1, 0.15), gamma=gamma)
            assert empirical_risk(batch, cfg, f) == pytest.approx(
                gamma * p + n, abs=1e-12)
        # the unlabeled/clamp side is gamma-independent
        p2, n2 = risk_components(batch, RiskConfig(kind, (0.1, 0.15), gamma=28.0), f)
        assert n2 == pytest.approx(n, abs=1e-12)


def test_mpu_unclamped_decomposition():
    # with the clamp inactive, mpu equals pos + unl - correction computed
    # independently from the loss arrays
    rng = np.random.default_rng(4)
    batch = random_batch(rng, 2, 4)
    f = random_predictor(2, 4, "softmax", seed=9)
    cfg = RiskConfig("mpu", (0.05, 0.05), gamma=2.0)
    losses = batch_losses(batch, f)
    pos = sum(
        cfg.priors[i] * losses.pos[i].mean() for i in range(2)
    )
    correction = sum(
        cfg.priors[i] * losses.pos0[i].mean() for i in range(2)
    )
    unl = losses.unl0.mean()
    assert unl - correction > 0  # fixture chosen off the clamp
    assert risk_mpu(batch, cfg, f) == pytest.approx(
        cfg.gamma * pos + unl - correction, abs=1e-12)


def test_conf_mpu_reduction_to_mpn_positive_side():
    """Oracle scores + all-true-negative unlabeled: the positive side equals
    MPN's exactly and the unlabeled mean enters with coefficient 1 (MPN
    weights it by 1 - sum(priors) instead)."""
    rng = np.random.default_rng(8)
    batch = random_batch(rng, 2, 4)
    batch = Batch(
        positives=batch.positives,
        unlabeled=batch.unlabeled,
        positive_scores=tuple(np.ones(len(x)) for x in batch.positives),
        unlabeled_scores=np.full(len(batch.unlabeled), 1e-6),
    )
    f = random_predictor(2, 4, "softmax", seed=3)
    cfg = RiskConfig("conf-mpu", (0.1, 0.2), gamma=5.0, tau=0.5)
    losses = batch_losses(batch, f)
    pos_mpn = sum(cfg.priors[i] * losses.pos[i].mean() for i in range(2))
    unl_mean = losses.unl0.mean()
    value = risk_conf_mpu(batch, cfg, f)
    assert value == pytest.approx(cfg.gamma * pos_mpn + unl_mean, abs=1e-12)
    mpn = risk_mpn(batch, cfg, f)
    assert mpn == pytest.approx(
        cfg.gamma * pos_mpn + (1 - sum(cfg.priors)) * unl_mean, abs=1e-12)


def test_loss_cases_sum_reproduces_risk():
    rng = np.random.default_rng(21)
    batch = random_batch(rng, 3, 5)
    f = random_predictor(3, 5, "softmax", seed=6)
    cfg = RiskConfig("conf-mpu", (0.1, 0.1, 0.1), gamma=15.0, tau=0.5)
    cases = loss_cases(batch, cfg, f)
    total = sum(c.contribution for c in cases)
    assert total == pytest.approx(risk_conf_mpu(batch, cfg, f), abs=1e-12)
    for row in cases:
        if row.group == "unlabeled":
            assert row.a == row.b == row.c == 0.0
        else:
            assert row.d == 0.0


# ---- Monte-Carlo decomposition -------------------------------------------


def test_mc_decomposition_constant_function():
    sampler = GaussianMixtureSampler.default()

    def const(x):
        return np.full((len(x), 3), 1.0 / 3.0)

    result = mc_decomposition_check(sampler, const, sampler.lam, 0.5, 20000, seed=0)
    analytic = 2.0 * (1.0 - 1.0 / 3.0) / 3.0
    assert result.lhs == pytest.approx(analytic, abs=1e-9)
    assert result.gap < 0.01


def test_mc_decomposition_tau_one():
    sampler = GaussianMixtureSampler.default()
    f = random_predictor(2, 2, "softmax", seed=3)
    result = mc_decomposition_check(sampler, f, sampler.lam, 1.0, 50000, seed=1)
    assert result.gap < 0.01


def test_mc_decomposition_rejects_zero_lambda():
    sampler = GaussianMixtureSampler.default()
    f = random_predictor(2, 2, "softmax", seed=3)
    with pytest.raises(ValueError, match="lam"):
        mc_decomposition_check(sampler, f, lambda x: np.zeros(len(x)), 0.5, 100)


def test_mc_decomposition_argument_validation():
    sampler = GaussianMixtureSampler.default()
    f = random_predictor(2, 2, "softmax", seed=3)
    with pytest.raises(ValueError):
        mc_decomposition_check(sampler, f, sampler.lam, 1.5, 100)
    with pytest.raises(ValueError):
        mc_decomposition_check(sampler, f, sampler.lam, 0.5, 0)


def test_risk_config_validation():
    with pytest.raises(ValueError):
        RiskConfig("nope", (0.1,))
    with pytest.raises(ValueError):
        RiskConfig("mpn", ())
    with pytest.raises(ValueError):
        RiskConfig("mpn", (0.6, 0.6))
    with pytest.raises(ValueError):
        RiskConfig("mpn", (0.1,), gamma=0.0)
    with pytest.raises(ValueError):
        RiskConfig("mpn", (0.1,), tau=0.0)
