"""Command-line surface for the full pipeline.

Every command validates its inputs before any side effect, prints the
resolved configuration (including the seed) as one JSON line on stdout,
writes only its declared outputs, and exits 0 on success.  Failures print
a single machine-parsable JSON line on stderr naming the originating
module and exit 1.

Label files produced by `predict` are ordinary corpus TSVs whose single
label column holds the predicted classes, so they feed straight into
`eval --pred`.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from . import data, distant, evaluate, features, model, pipeline, prior, synth
from .risk import KINDS, RiskConfig

_CONFIG_KEYS = {"epochs", "lr", "batch_size", "seed", "hidden", "momentum",
                "conf_gamma", "risk", "features"}
_RISK_KEYS = {"kind", "priors", "gamma", "tau"}
_FEATURE_KEYS = {"embed_dim", "window", "embed_source", "embed_seed",
                 "embed_path", "context_radius"}
_SPEC_KEYS = {
    "num_classes", "n_sentences", "sentence_len", "entity_pool",
    "background_pool", "ambiguous_per_class", "priors", "coverage",
    "separation", "ambiguous_mass", "ambiguous_lambda", "leak",
    "embed_dim", "embed_seed", "seed",
}


class CliError(ValueError):
    pass


def _check_keys(obj: dict, allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise CliError(f"unknown {where} key(s): {', '.join(sorted(unknown))}")


def _load_json(path: str) -> dict:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(obj, dict):
        raise CliError(f"{path}: expected a JSON object")
    return obj


def _feature_config(obj: dict | None) -> features.FeatureConfig:
    obj = obj or {}
    _check_keys(obj, _FEATURE_KEYS, "features")
    return features.FeatureConfig(**obj)


def _risk_config(obj: dict | None, kind: str | None, priors, gamma=None, tau=None) -> RiskConfig:
    obj = dict(obj or {})
    _check_keys(obj, _RISK_KEYS, "risk")
    if kind is not None:
        obj["kind"] = kind
    if priors is not None:
        obj["priors"] = priors
    if gamma is not None:
        obj["gamma"] = gamma
    if tau is not None:
        obj["tau"] = tau
    if "kind" not in obj:
        raise CliError("risk kind missing (set --risk or config risk.kind)")
    if "priors" not in obj or obj["priors"] is None:
        raise CliError("priors missing (set --priors or config risk.priors)")
    return RiskConfig(**obj)


def _train_config(args, corpus: data.Corpus, kind: str | None) -> pipeline.TrainConfig:
    cfg = _load_json(args.config) if args.config else {}
    _check_keys(cfg, _CONFIG_KEYS, "config")
    priors = _resolve_priors(args, corpus, cfg)
    risk_cfg = _risk_config(cfg.get("risk"), kind, priors)
    feat_cfg = _feature_config(cfg.get("features"))
    kwargs = {k: cfg[k] for k in
              ("epochs", "lr", "batch_size", "seed", "hidden", "momentum",
               "conf_gamma")
              if k in cfg}
    if getattr(args, "seed", None) is not None:
        kwargs["seed"] = args.seed
    return pipeline.TrainConfig(risk=risk_cfg, features=feat_cfg, **kwargs)


def _resolve_priors(args, corpus: data.Corpus, cfg: dict):
    """--priors beats config; accepts a JSON file path, 'oracle', or
    'induction'."""
    spec = getattr(args, "priors", None)
    if spec is None:
        raw = (cfg.get("risk") or {}).get("priors")
        if raw is None:
            return None
        return _priors_from_raw(raw, corpus)
    if spec == "oracle":
        return prior.oracle_priors(corpus).values
    if spec == "induction":
        if not getattr(args, "dictionary", None):
            raise CliError("induction priors require --dictionary")
        feat_cfg = _feature_config((_load_json(args.config) if args.config else {}).get("features"))
        dictionary = _load_dict(args, corpus)
        feats = pipeline.confidence_features(
            features.featurize(corpus, dictionary, feat_cfg), feat_cfg
        )
        return prior.estimate_priors_induction(corpus, feats).values
    return _priors_from_raw(_load_json(spec), corpus)


def _priors_from_raw(raw, corpus: data.Corpus):
    if isinstance(raw, dict):
        missing = [n for n in corpus.class_names if n not in raw]
        if missing:
            raise CliError(f"priors file missing class(es): {', '.join(missing)}")
        return tuple(float(raw[n]) for n in corpus.class_names)
    return tuple(float(v) for v in raw)


def _load_dict(args, corpus: data.Corpus | None) -> data.Dictionary:
    names = corpus.class_names if corpus is not None else None
    return data.load_dictionary(args.dictionary, class_names=names)


def _announce(command: str, resolved: dict) -> None:
    print(json.dumps({"command": command, **resolved}, sort_keys=True, default=str))


def _featurize_for(args, corpus, cfg: pipeline.TrainConfig):
    dictionary = _load_dict(args, corpus)
    return features.featurize(corpus, dictionary, cfg.features)


# ---------------------------------------------------------------- commands


def _cmd_synth(args) -> int:
    spec_dict = _load_json(args.spec) if args.spec else {}
    _check_keys(spec_dict, _SPEC_KEYS, "spec")
    if args.seed is not None:
        spec_dict["seed"] = args.seed
    if "sentence_len" in spec_dict:
        spec_dict["sentence_len"] = tuple(spec_dict["sentence_len"])
    if "priors" in spec_dict:
        spec_dict["priors"] = tuple(spec_dict["priors"])
    spec = synth.SynthSpec(**spec_dict)
    _announce("synth", {"config": asdict(spec), "seed": spec.seed})
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus, dictionary, lam_table, book = synth.generate(spec)
    data.write_corpus(corpus, out / "corpus.tsv")
    data.write_dictionary(dictionary, out / "dictionary.tsv")
    pipeline.write_scores(lam_table, out / "lambda.txt")
    (out / "bookkeeping.json").write_text(
        json.dumps(synth.bookkeeping_json_dict(book, "lambda.txt"),
                   sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    return 0


def _cmd_annotate(args) -> int:
    corpus = data.load_corpus(args.corpus)
    dictionary = _load_dict(args, corpus)
    _announce("annotate", {
        "corpus": args.corpus, "dictionary": args.dictionary,
        "case_sensitive": not args.case_insensitive,
    })
    annotated = distant.annotate(corpus, dictionary,
                                 case_sensitive=not args.case_insensitive)
    data.write_corpus(annotated, args.out)
    return 0


def _cmd_dict_subset(args) -> int:
    dictionary = data.load_dictionary(args.dictionary)
    _announce("dict-subset", {"dictionary": args.dictionary, "fraction": args.fraction})
    data.write_dictionary(data.subset_dictionary(dictionary, args.fraction), args.out)
    return 0


def _cmd_estimate_prior(args) -> int:
    corpus = data.load_corpus(args.corpus)
    _announce("estimate-prior", {"corpus": args.corpus, "method": args.method})
    if args.method == "oracle":
        est = prior.oracle_priors(corpus)
    else:
        if not args.dictionary:
            raise CliError("induction priors require --dictionary")
        feat_cfg = _feature_config(
            (_load_json(args.config) if args.config else {}).get("features"))
        dictionary = _load_dict(args, corpus)
        feats = pipeline.confidence_features(
            features.featurize(corpus, dictionary, feat_cfg), feat_cfg
        )
        est = prior.estimate_priors_induction(corpus, feats)
    payload = json.dumps(est.to_json_dict(corpus.class_names), sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)
    return 0


def _cmd_train_conf(args) -> int:
    corpus = data.load_corpus(args.corpus)
    cfg = _train_config(args, corpus, kind="bpu")
    _announce("train-conf", {"config": _cfg_dict(cfg), "seed": cfg.seed})
    feats = _featurize_for(args, corpus, cfg)
    result = pipeline.train_confidence(corpus, feats, cfg)
    model.save_params(result.params, args.out)
    if args.log:
        pipeline.write_training_log(result.history, args.log)
    return 0


def _cmd_score_conf(args) -> int:
    corpus = data.load_corpus(args.corpus)
    params = model.load_params(args.model)
    cfg = _train_config_for_features(args)
    _announce("score-conf", {"model": args.model, "features": asdict(cfg)})
    feats = features.featurize(corpus, _load_dict(args, corpus), cfg)
    scores = pipeline.score_confidence(params, corpus, feats)
    pipeline.write_scores(scores, args.out)
    return 0


def _train_config_for_features(args) -> features.FeatureConfig:
    cfg = _load_json(args.config) if args.config else {}
    _check_keys(cfg, _CONFIG_KEYS, "config")
    return _feature_config(cfg.get("features"))


def _cmd_train(args) -> int:
    corpus = data.load_corpus(args.corpus)
    cfg = _train_config(args, corpus, kind=args.risk)
    _announce("train", {"config": _cfg_dict(cfg), "seed": cfg.seed})
    if cfg.risk.kind == "conf-mpu" and not args.conf_scores:
        raise CliError("conf-mpu training requires --conf-scores")
    scores = pipeline.load_scores(args.conf_scores) if args.conf_scores else None
    feats = _featurize_for(args, corpus, cfg)
    result = pipeline.train_ner(corpus, feats, scores, cfg)
    model.save_params(result.params, args.out)
    if args.log:
        pipeline.write_training_log(result.history, args.log)
    return 0


def _cmd_predict(args) -> int:
    corpus = data.load_corpus(args.corpus)
    params = model.load_params(args.model)
    feat_cfg = _train_config_for_features(args)
    _announce("predict", {"model": args.model, "features": asdict(feat_cfg)})
    feats = features.featurize(corpus, _load_dict(args, corpus), feat_cfg)
    labels = pipeline.predict(params, corpus, feats)
    pred_corpus = data.corpus_from_texts(
        [s.texts() for s in corpus.sentences],
        corpus.class_names,
        gold=[[int(v) for v in row] for row in labels],
    )
    data.write_corpus(pred_corpus, args.out)
    return 0


def _cmd_eval(args) -> int:
    pred = data.load_corpus(args.pred)
    gold = data.load_corpus(args.gold)
    _announce("eval", {"pred": args.pred, "gold": args.gold, "level": args.level})
    if pred.gold is None or gold.gold is None:
        raise CliError("eval expects label files with a gold column")
    if args.level == "span":
        overall, per_class = evaluate.span_prf(
            evaluate.decode_spans(pred.gold, pred),
            evaluate.decode_spans(gold.gold, gold),
        )
    else:
        overall, per_class = evaluate.token_prf(pred.gold, gold.gold)
    payload = json.dumps(
        evaluate.metrics_json_dict(overall, per_class, gold.class_names),
        sort_keys=True,
    ) + "\n"
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)
    return 0


def _cmd_sweep(args) -> int:
    corpus = data.load_corpus(args.corpus)
    dictionary = _load_dict(args, corpus)
    cfg = _train_config(args, corpus, kind="conf-mpu")
    fractions = [float(v) for v in args.fractions.split(",")]
    kinds = args.kinds.split(",")
    for kind in kinds:
        if kind not in KINDS:
            raise CliError(f"unknown risk kind {kind!r}")
    seeds = [int(v) for v in args.seeds.split(",")]
    _announce("sweep", {
        "config": _cfg_dict(cfg), "fractions": fractions, "kinds": kinds,
        "seeds": seeds, "jobs": args.jobs, "seed": cfg.seed,
    })
    report = evaluate.coverage_sweep(
        corpus, dictionary, fractions, kinds, seeds, cfg, jobs=args.jobs
    )
    report.write(args.out)
    return 0


def _cfg_dict(cfg: pipeline.TrainConfig) -> dict:
    out = asdict(cfg)
    out["risk"]["priors"] = list(cfg.risk.priors)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="confmpu",
        description="Distantly supervised token classification with "
                    "positive-unlabeled risk estimators.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus + dictionary")
    p.add_argument("--spec", help="JSON file of generator settings")
    p.add_argument("--seed", type=int, help="override the spec seed")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("annotate", help="distant-label a corpus with a dictionary")
    p.add_argument("--corpus", required=True)
    p.add_argument("--dictionary", required=True)
    p.add_argument("--case-insensitive", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_annotate)

    p = sub.add_parser("dict-subset", help="keep the first fraction of entries")
    p.add_argument("--dictionary", required=True)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_dict_subset)

    p = sub.add_parser("estimate-prior", help="estimate class priors")
    p.add_argument("--corpus", required=True)
    p.add_argument("--method", choices=("oracle", "induction"), required=True)
    p.add_argument("--dictionary", help="needed for induction features")
    p.add_argument("--config", help="JSON config (features section)")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_estimate_prior)

    def _train_like(p, needs_risk=False):
        p.add_argument("--corpus", required=True)
        p.add_argument("--dictionary", required=True)
        p.add_argument("--config", help="JSON training config")
        p.add_argument("--priors", help="JSON file, 'oracle', or 'induction'")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", required=True)
        p.add_argument("--log", help="per-epoch CSV training log")
        if needs_risk:
            p.add_argument("--risk", choices=KINDS, required=True)

    p = sub.add_parser("train-conf", help="train the binary PU confidence scorer")
    _train_like(p)
    p.set_defaults(func=_cmd_train_conf)

    p = sub.add_parser("score-conf", help="score per-token confidence")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--dictionary", required=True)
    p.add_argument("--config", help="JSON config (features must match training)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_score_conf)

    p = sub.add_parser("train", help="train the multi-class token classifier")
    _train_like(p, needs_risk=True)
    p.add_argument("--conf-scores", help="scores file (required for conf-mpu)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="write per-token predictions as a label TSV")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--dictionary", required=True)
    p.add_argument("--config", help="JSON config (features must match training)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("eval", help="score predictions against gold labels")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--level", choices=("span", "token"), default="span")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="coverage sweep over (fraction, kind, seed)")
    p.add_argument("--corpus", required=True)
    p.add_argument("--dictionary", required=True)
    p.add_argument("--fractions", required=True, help="comma list, e.g. 0.2,0.4")
    p.add_argument("--kinds", required=True, help="comma list of risk kinds")
    p.add_argument("--seeds", required=True, help="comma list of ints")
    p.add_argument("--config", help="JSON training config")
    p.add_argument("--priors", help="JSON file, 'oracle', or 'induction'")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sweep)
    return parser


def _origin_module(exc: BaseException) -> str:
    origin = "confmpu.cli"
    tb = exc.__traceback__
    while tb is not None:
        name = tb.tb_frame.f_globals.get("__name__", "")
        if isinstance(name, str) and name.startswith("confmpu"):
            origin = name
        tb = tb.tb_next
    return origin


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, ArithmeticError, OSError) as exc:
        sys.stderr.write(json.dumps(
            {"error": str(exc), "module": _origin_module(exc)}
        ) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
