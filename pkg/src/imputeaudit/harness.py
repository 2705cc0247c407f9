"""End-to-end experiment pipelines: train, parity-gate, attack, report.

Both scenarios share one backbone: build a normalized corpus, split it, train
a target and a reference imputer, check they are of comparable skill, then
score private (member) and test (nonmember) series with the ratio attack and
the naive-loss baseline over identical mask schedules. Every stage seed is
derived from the master seed, so report.json is a pure function of
(config, master seed); wall-clock time is reported separately to keep it so.
"""
from __future__ import annotations

import json
import os
import time
from dataclasses import asdict, dataclass, replace

from .attack import (
    AttackConfig,
    AttackReport,
    StdRule,
    report_to_dict,
    run_attack,
    theta_rule_from_dict,
    theta_rule_to_dict,
)
from .core import TimeSeries, derive_seed, zscore_normalize
from .data import (
    ScenarioSplit,
    SyntheticConfig,
    generate_synthetic,
    load_csv,
    split_scenario1,
    split_scenario2,
)
from .metrics import LabeledScores, RocCurve, headline_summary, roc_curve, write_roc_csv
from .models import ImputerConfig, ParityReport, TrainedImputer, fine_tune, parity_check, train

__all__ = [
    "CsvSource",
    "ExperimentConfig",
    "ExperimentReport",
    "ParityError",
    "config_from_dict",
    "config_from_file",
    "config_to_dict",
    "run_scenario1",
    "run_scenario2",
    "run_experiment",
    "metrics_from_report",
    "report_json_dict",
    "write_experiment_outputs",
    "OUTPUT_DIR_ENV",
]

OUTPUT_DIR_ENV = "IMPUTEAUDIT_OUT"


class ParityError(RuntimeError):
    """Target and reference skill differ too much for the ratio to mean anything."""


@dataclass(frozen=True)
class CsvSource:
    path: str


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: int
    master_seed: int
    data_source: SyntheticConfig | CsvSource
    target_model: ImputerConfig
    reference_model: ImputerConfig
    attack: AttackConfig
    fine_tune: ImputerConfig | None = None
    parity_tolerance: float = 0.1
    parity_fraction: float = 0.2
    output_dir: str = "out"
    override_parity: bool = False
    independent_reference: bool = False

    def __post_init__(self) -> None:
        if self.scenario not in (1, 2):
            raise ValueError(f"scenario must be 1 or 2, got {self.scenario}")
        if self.scenario == 2 and self.fine_tune is None:
            raise ValueError("scenario 2 requires a fine_tune config")
        if self.parity_tolerance <= 0:
            raise ValueError("parity_tolerance must be positive")
        if not 0.0 < self.parity_fraction < 1.0:
            raise ValueError("parity_fraction must be in (0, 1)")


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    scenario: int
    master_seed: int
    config_echo: dict
    parity: ParityReport
    attack_report: AttackReport
    labels: tuple[bool, ...]
    lbrm_metrics: dict[str, float]
    naive_metrics: dict[str, float]
    lbrm_curve: RocCurve
    naive_curve: RocCurve
    n_members: int
    n_nonmembers: int
    wall_clock_seconds: float


def _model_config_from_dict(doc: dict) -> ImputerConfig:
    return ImputerConfig(**doc)


def _attack_config_from_dict(doc: dict) -> AttackConfig:
    doc = dict(doc)
    if "theta_rule" in doc:
        doc["theta_rule"] = theta_rule_from_dict(doc["theta_rule"])
    return AttackConfig(**doc)


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Parse the documented JSON schema (see README) into an ExperimentConfig."""
    data = dict(doc["data"])
    source_kind = data.pop("source")
    if source_kind == "synthetic":
        components = data.pop("components", (1, 3))
        amplitude = data.pop("amplitude_range", (0.5, 2.0))
        source: SyntheticConfig | CsvSource = SyntheticConfig(
            components=tuple(components), amplitude_range=tuple(amplitude), **data
        )
    elif source_kind == "csv":
        source = CsvSource(path=data["path"])
    else:
        raise ValueError(f"unknown data source {source_kind!r}")

    fine_tune_cfg = None
    if "fine_tune" in doc and doc["fine_tune"] is not None:
        fine_tune_cfg = _model_config_from_dict(doc["fine_tune"])

    return ExperimentConfig(
        scenario=int(doc["scenario"]),
        master_seed=int(doc.get("master_seed", 0)),
        data_source=source,
        target_model=_model_config_from_dict(doc["target_model"]),
        reference_model=_model_config_from_dict(doc["reference_model"]),
        attack=_attack_config_from_dict(doc.get("attack", {})),
        fine_tune=fine_tune_cfg,
        parity_tolerance=float(doc.get("parity_tolerance", 0.1)),
        parity_fraction=float(doc.get("parity_fraction", 0.2)),
        output_dir=str(doc.get("output_dir", "out")),
        override_parity=bool(doc.get("override_parity", False)),
        independent_reference=bool(doc.get("independent_reference", False)),
    )


def config_from_file(path: str) -> ExperimentConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Canonical echo of the config for reports (JSON-safe, deterministic)."""
    if isinstance(cfg.data_source, SyntheticConfig):
        data = {"source": "synthetic", **asdict(cfg.data_source)}
        data["components"] = list(data["components"])
        data["amplitude_range"] = list(data["amplitude_range"])
    else:
        data = {"source": "csv", "path": cfg.data_source.path}
    out = {
        "scenario": cfg.scenario,
        "master_seed": cfg.master_seed,
        "data": data,
        "target_model": asdict(cfg.target_model),
        "reference_model": asdict(cfg.reference_model),
        "fine_tune": asdict(cfg.fine_tune) if cfg.fine_tune is not None else None,
        "attack": {**asdict(cfg.attack), "theta_rule": theta_rule_to_dict(cfg.attack.theta_rule)},
        "parity_tolerance": cfg.parity_tolerance,
        "parity_fraction": cfg.parity_fraction,
        "output_dir": cfg.output_dir,
        "override_parity": cfg.override_parity,
        "independent_reference": cfg.independent_reference,
    }
    return out


def _load_corpus(cfg: ExperimentConfig) -> list[TimeSeries]:
    if isinstance(cfg.data_source, SyntheticConfig):
        source = replace(cfg.data_source, seed=derive_seed(cfg.master_seed, "data"))
        corpus = generate_synthetic(source)
    else:
        corpus = load_csv(cfg.data_source.path)
    return [zscore_normalize(s)[0] for s in corpus]


def metrics_from_report(report: AttackReport, labels: list[bool]):
    """Headline metric blocks for both methods, straight from the score record.

    The naive baseline is a projection of the same record (target loss only):
    no additional oracle queries are ever made for it. Theta never enters.
    """
    if len(labels) != len(report.scores):
        raise ValueError(f"{len(labels)} labels for {len(report.scores)} scores")
    lbrm = LabeledScores([s.r for s in report.scores], labels)
    naive = LabeledScores([s.l_t for s in report.scores], labels)
    return headline_summary(lbrm), headline_summary(naive), roc_curve(lbrm), roc_curve(naive)


def _finish(
    cfg: ExperimentConfig,
    split: ScenarioSplit,
    target: TrainedImputer,
    reference: TrainedImputer,
    started: float,
) -> ExperimentReport:
    parity = parity_check(
        target,
        reference,
        list(split.test),
        cfg.parity_tolerance,
        fraction=cfg.parity_fraction,
        seed=derive_seed(cfg.master_seed, "parity"),
    )
    if not parity.passed and not cfg.override_parity:
        raise ParityError(
            f"model parity failed: target MAE {parity.mae_target:.4f} vs reference MAE "
            f"{parity.mae_reference:.4f} (gap {parity.gap:.4f} > tolerance {parity.tolerance})"
        )

    candidates = list(split.private) + list(split.test)
    labels = [True] * len(split.private) + [False] * len(split.test)
    attack_cfg = replace(cfg.attack, seed=derive_seed(cfg.master_seed, "attack"))
    known_nonmembers = list(split.test) if isinstance(attack_cfg.theta_rule, StdRule) else None
    report = run_attack(target, reference, candidates, attack_cfg, known_nonmembers=known_nonmembers)

    lbrm_metrics, naive_metrics, lbrm_curve, naive_curve = metrics_from_report(report, labels)
    return ExperimentReport(
        scenario=cfg.scenario,
        master_seed=cfg.master_seed,
        config_echo=config_to_dict(cfg),
        parity=parity,
        attack_report=report,
        labels=tuple(labels),
        lbrm_metrics=lbrm_metrics,
        naive_metrics=naive_metrics,
        lbrm_curve=lbrm_curve,
        naive_curve=naive_curve,
        n_members=len(split.private),
        n_nonmembers=len(split.test),
        wall_clock_seconds=time.monotonic() - started,
    )


def run_scenario1(cfg: ExperimentConfig) -> ExperimentReport:
    """Target trained on the private split only; reference on the public split."""
    started = time.monotonic()
    corpus = _load_corpus(cfg)
    split = split_scenario1(corpus, derive_seed(cfg.master_seed, "split"))
    target = train(list(split.private), replace(cfg.target_model, seed=derive_seed(cfg.master_seed, "target")))
    reference = train(list(split.public), replace(cfg.reference_model, seed=derive_seed(cfg.master_seed, "reference")))
    return _finish(cfg, split, target, reference, started)


def run_scenario2(cfg: ExperimentConfig) -> ExperimentReport:
    """Base model trained on public data, then fine-tuned on private data.

    The reference is the un-fine-tuned base itself (cheapest skill-matched
    benchmark); set independent_reference to train a separate one instead.
    """
    started = time.monotonic()
    corpus = _load_corpus(cfg)
    split = split_scenario2(corpus, derive_seed(cfg.master_seed, "split"))
    base = train(list(split.public), replace(cfg.reference_model, seed=derive_seed(cfg.master_seed, "reference")))
    if cfg.independent_reference:
        reference = train(
            list(split.public),
            replace(cfg.reference_model, seed=derive_seed(cfg.master_seed, "reference-independent")),
        )
    else:
        reference = base
    assert cfg.fine_tune is not None  # enforced by ExperimentConfig
    target = fine_tune(base, list(split.private), replace(cfg.fine_tune, seed=derive_seed(cfg.master_seed, "fine-tune")))
    return _finish(cfg, split, target, reference, started)


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    return run_scenario1(cfg) if cfg.scenario == 1 else run_scenario2(cfg)


def report_json_dict(report: ExperimentReport) -> dict:
    """The report.json payload. Wall-clock is deliberately excluded so two runs
    with the same config and seed serialize byte-identically."""
    return {
        "scenario": report.scenario,
        "master_seed": report.master_seed,
        "config": report.config_echo,
        "parity": {
            "mae_target": report.parity.mae_target,
            "mae_reference": report.parity.mae_reference,
            "gap": report.parity.gap,
            "tolerance": report.parity.tolerance,
            "passed": report.parity.passed,
        },
        "theta": report.attack_report.theta,
        "theta_rule": theta_rule_to_dict(report.attack_report.theta_rule),
        "candidates": {"members": report.n_members, "nonmembers": report.n_nonmembers},
        "methods": {"lbrm": report.lbrm_metrics, "naive": report.naive_metrics},
        "roc_files": {"lbrm": "roc_lbrm.csv", "naive": "roc_naive.csv"},
    }


def _write_json(doc: dict, path: str) -> None:
    tmp = f"{path}.tmp-{os.getpid()}"
    with open(tmp, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


def write_experiment_outputs(report: ExperimentReport, out_dir: str | None = None) -> str:
    """Write report.json, scores.json and both ROC CSVs atomically.

    Output directory resolution: explicit argument, then the IMPUTEAUDIT_OUT
    environment variable, then the config's output_dir.
    """
    resolved = out_dir or os.environ.get(OUTPUT_DIR_ENV) or report.config_echo["output_dir"]
    os.makedirs(resolved, exist_ok=True)
    _write_json(report_json_dict(report), os.path.join(resolved, "report.json"))
    _write_json(report_to_dict(report.attack_report), os.path.join(resolved, "scores.json"))
    write_roc_csv(report.lbrm_curve, os.path.join(resolved, "roc_lbrm.csv"))
    write_roc_csv(report.naive_curve, os.path.join(resolved, "roc_naive.csv"))
    return resolved
