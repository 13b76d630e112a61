"""Confidence-weighted multi-class positive-unlabeled risk estimation for
distantly supervised token classification."""

from .data import (
    Corpus,
    Dictionary,
    ParseError,
    Sentence,
    Token,
    corpus_from_texts,
    load_corpus,
    load_dictionary,
    subset_dictionary,
    write_corpus,
    write_dictionary,
)
from .distant import LabelQualityReport, annotate, label_quality
from .evaluate import (
    Metrics,
    Span,
    SweepReport,
    coverage_sweep,
    decode_spans,
    span_prf,
    token_prf,
)
from .features import FeatureConfig, embed, featurize, lexicon_features
from .model import (
    ModelParams,
    Prediction,
    forward,
    grad,
    init_params,
    load_params,
    mae_loss,
    risk_and_grad,
    save_params,
    sgd_step,
)
from .pipeline import (
    TrainConfig,
    TrainResult,
    predict,
    score_confidence,
    train_confidence,
    train_ner,
)
from .prior import PriorEstimate, estimate_priors_induction, oracle_priors
from .risk import (
    Batch,
    RiskConfig,
    empirical_risk,
    loss_cases,
    mc_decomposition_check,
    risk_bpu,
    risk_conf_mpu,
    risk_mpn,
    risk_mpu,
    risk_pn,
)
from .synth import GaussianMixtureSampler, SynthSpec, generate, true_lambda

__version__ = "0.1.0"
