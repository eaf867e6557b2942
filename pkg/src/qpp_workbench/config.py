"""Run configuration: JSON loading, defaults and aggregated validation."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .correlation import CorrelationKind
from .metrics import MetricSpec
from .predictors import PredictorSpec
from .retrieval import RetrievalModel
from .synthetic import bundled_paths

DEFAULT_SEED = 42

DEFAULT_MODELS = [
    "LMJM:0.3", "LMJM:0.6",
    "BM25:0.7,0.3", "BM25:1,1", "BM25:0.3,0.7",
    "LMDIR:100", "LMDIR:500", "LMDIR:1000",
]
DEFAULT_METRICS = [
    "AP@10", "AP@100", "AP@1000",
    "R@10", "R@100", "R@1000",
    "nDCG@10", "nDCG@100", "nDCG@1000",
    "P@10",
]
DEFAULT_PREDICTORS = ["AvgIDF", "Clarity", "WIG", "NQC", "UEF(Clarity)", "UEF(WIG)", "UEF(NQC)"]
SENSITIVITY_MODELS = ["LMJM:0.6", "BM25:0.7,0.3", "LMDIR:1000"]
SENSITIVITY_METRICS = ["AP@100", "nDCG@100", "R@100", "P@10"]
METRIC_AXIS_METRICS = [m for m in DEFAULT_METRICS if m != "P@10"]


def default_config() -> dict[str, Any]:
    paths = bundled_paths()
    return {
        "corpus": {"path": str(paths["corpus"]), "format": "tsv"},
        "topics": {"path": str(paths["topics"]), "format": "tsv"},
        "qrels": str(paths["qrels"]),
        "models": list(DEFAULT_MODELS),
        "metrics": list(DEFAULT_METRICS),
        "predictors": list(DEFAULT_PREDICTORS),
        "predictor_params": {"k": 20, "K": 100, "num_samples": 10, "fb_terms": 100, "mu": 1000.0, "nqc_ddof": 0},
        "correlations": [k.value for k in CorrelationKind],
        "sensitivity": {"models": list(SENSITIVITY_MODELS), "metrics": list(SENSITIVITY_METRICS)},
        "contingency": {
            "rank_by": ["PEARSON_R", "KENDALL_TAU"],
            "metric_axis": {"models": list(SENSITIVITY_MODELS), "metrics": list(METRIC_AXIS_METRICS)},
            "model_axis": {"models": list(DEFAULT_MODELS), "metrics": list(SENSITIVITY_METRICS)},
        },
        "kappa": None,
        "graded_ndcg": True,
        "cache_runs": True,
        "seed": DEFAULT_SEED,
        "output_dir": "qpp-report",
    }


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class Source:
    path: Path
    format: str = "tsv"


@dataclass(frozen=True)
class AxisSpec:
    models: tuple[RetrievalModel, ...]
    metrics: tuple[MetricSpec, ...]


@dataclass(frozen=True)
class RunConfig:
    corpus: Source
    topics: Source
    qrels: Path
    models: tuple[RetrievalModel, ...]
    metrics: tuple[MetricSpec, ...]
    predictors: tuple[PredictorSpec, ...]
    correlations: tuple[CorrelationKind, ...]
    sensitivity: AxisSpec
    metric_axis: AxisSpec
    model_axis: AxisSpec
    rank_by: tuple[CorrelationKind, ...]
    kappa: int
    seed: int
    output_dir: Path
    graded_ndcg: bool = True
    cache_runs: bool = True
    raw: dict = field(default_factory=dict, compare=False, repr=False)


def _source(value, base: Path, name: str, errors: list[str], formats=("tsv", "trec")) -> Optional[Source]:
    if isinstance(value, str):
        value = {"path": value}
    if not isinstance(value, dict) or "path" not in value:
        errors.append(f"{name}: expected a path or {{'path': ..., 'format': ...}}")
        return None
    path = Path(os.path.expanduser(value["path"]))
    if not path.is_absolute():
        path = base / path
    fmt = value.get("format", "tsv")
    if fmt not in formats:
        errors.append(f"{name}.format: must be one of {', '.join(formats)}, got {fmt!r}")
    if not path.exists():
        errors.append(f"{name}: {path} does not exist")
    return Source(path, fmt)


def _parse_list(values, parser, name: str, errors: list[str]) -> list:
    if not isinstance(values, list) or not values:
        errors.append(f"{name}: expected a non-empty list")
        return []
    out = []
    for i, v in enumerate(values):
        try:
            out.append(parser(v))
        except (ValueError, TypeError, KeyError) as exc:
            errors.append(f"{name}[{i}]: {exc}")
    return out


def _model(v) -> RetrievalModel:
    if isinstance(v, dict):
        return RetrievalModel(v["kind"].upper(), tuple(v.get("params", ())))
    return RetrievalModel.parse(v)


def _metric(v) -> MetricSpec:
    if isinstance(v, dict):
        return MetricSpec.parse(f"{v['kind']}@{v['cutoff']}")
    return MetricSpec.parse(v)


def _axis(raw, name, models, metrics, errors) -> AxisSpec:
    if not isinstance(raw, dict):
        errors.append(f"{name}: expected an object with 'models' and 'metrics'")
        return AxisSpec((), ())
    ax_models = _parse_list(raw.get("models"), _model, f"{name}.models", errors)
    ax_metrics = _parse_list(raw.get("metrics"), _metric, f"{name}.metrics", errors)
    for m in ax_models:
        if m not in models:
            errors.append(f"{name}.models: {m.label} is not in 'models'")
    for m in ax_metrics:
        if m not in metrics:
            errors.append(f"{name}.metrics: {m.label} is not in 'metrics'")
    return AxisSpec(tuple(ax_models), tuple(ax_metrics))


def resolve(raw: dict[str, Any], base_dir: str | Path = ".") -> RunConfig:
    """Merge ``raw`` over the defaults and validate, collecting every error."""
    base = Path(base_dir)
    cfg = default_config()
    user = dict(raw)
    # axes default to the full lists once the user replaces models or metrics
    if ("models" in user or "metrics" in user) and "sensitivity" not in user:
        user["sensitivity"] = {"models": user.get("models", cfg["models"]), "metrics": user.get("metrics", cfg["metrics"])}
    if ("models" in user or "metrics" in user) and "contingency" not in user:
        models = user.get("models", cfg["models"])
        metrics = user.get("metrics", cfg["metrics"])
        user["contingency"] = {
            "rank_by": cfg["contingency"]["rank_by"],
            "metric_axis": {"models": models, "metrics": metrics},
            "model_axis": {"models": models, "metrics": metrics},
        }
    unknown = set(user) - set(cfg)
    cfg.update(user)
    errors = [f"unknown config key {k!r}" for k in sorted(unknown)]

    corpus = _source(cfg["corpus"], base, "corpus", errors)
    topics = _source(cfg["topics"], base, "topics", errors, formats=("tsv", "trec", "auto"))
    qrels = _source(cfg["qrels"], base, "qrels", errors)

    models = _parse_list(cfg["models"], _model, "models", errors)
    metrics = _parse_list(cfg["metrics"], _metric, "metrics", errors)
    correlations = _parse_list(cfg["correlations"], CorrelationKind.parse, "correlations", errors)

    pp = dict(cfg.get("predictor_params") or {})
    params = {
        "k": pp.pop("k", 20),
        "pool": pp.pop("K", 100),
        "num_samples": pp.pop("num_samples", 10),
        "fb_terms": pp.pop("fb_terms", 100),
        "mu": pp.pop("mu", 1000.0),
        "nqc_ddof": pp.pop("nqc_ddof", 0),
    }
    for key in sorted(pp):
        errors.append(f"predictor_params: unknown key {key!r}")
    seed = cfg["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool):
        errors.append(f"seed: expected an integer, got {seed!r}")
        seed = DEFAULT_SEED
    predictors = _parse_list(
        cfg["predictors"], lambda v: PredictorSpec.parse(v, seed=seed, **params), "predictors", errors
    )
    labels = [p.label for p in predictors]
    if len(set(labels)) != len(labels):
        errors.append("predictors: duplicate entries")

    sens = _axis(cfg["sensitivity"], "sensitivity", models, metrics, errors)
    cont = cfg["contingency"] if isinstance(cfg["contingency"], dict) else {}
    metric_axis = _axis(cont.get("metric_axis"), "contingency.metric_axis", models, metrics, errors)
    model_axis = _axis(cont.get("model_axis"), "contingency.model_axis", models, metrics, errors)
    rank_by = _parse_list(cont.get("rank_by", ["PEARSON_R", "KENDALL_TAU"]), CorrelationKind.parse,
                          "contingency.rank_by", errors)
    for kind in rank_by:
        if kind not in correlations:
            errors.append(f"contingency.rank_by: {kind.value} is not in 'correlations'")

    kappa = cfg["kappa"]
    if kappa is None:
        kappa = max((m.cutoff for m in metrics), default=1000)
    elif not isinstance(kappa, int) or kappa < 1:
        errors.append(f"kappa: expected a positive integer, got {kappa!r}")

    if errors:
        raise ConfigError(errors)
    out = Path(cfg["output_dir"])
    return RunConfig(
        corpus=corpus,
        topics=topics,
        qrels=qrels.path,
        models=tuple(models),
        metrics=tuple(metrics),
        predictors=tuple(predictors),
        correlations=tuple(correlations),
        sensitivity=sens,
        metric_axis=metric_axis,
        model_axis=model_axis,
        rank_by=tuple(rank_by),
        kappa=kappa,
        seed=seed,
        output_dir=out if out.is_absolute() else base / out,
        graded_ndcg=bool(cfg["graded_ndcg"]),
        cache_runs=bool(cfg["cache_runs"]),
        raw=cfg,
    )


def load_config(path: Optional[str | Path] = None, overrides: Optional[dict[str, Any]] = None) -> RunConfig:
    """Load a JSON config file (or the defaults) and apply CLI overrides."""
    raw: dict[str, Any] = {}
    base = Path.cwd()
    if path is not None:
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError([f"config file {path} does not exist"]) from None
        except json.JSONDecodeError as exc:
            raise ConfigError([f"{path}: invalid JSON ({exc})"]) from None
        if not isinstance(raw, dict):
            raise ConfigError([f"{path}: top level must be a JSON object"])
        base = path.parent
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(raw.get(key), dict):
            value = {**raw[key], **value}
        raw[key] = value
    return resolve(raw, base)
