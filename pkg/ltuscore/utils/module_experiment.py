"""
Reproducible experiment runs: flat YAML configuration, multi-trial evaluation,
Table-1-style grids, attacker comparisons and oracle reports, each written to a
fresh, timestamped run directory.
"""
import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, fields, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union, get_args, get_origin, get_type_hints

import numpy as np
import yaml
from rich.table import Table

from ltuscore.ltuscore import LtuScore, reserved_accuracy
from ltuscore.utils.errors import ArgumentError, ConfigError, ParseError
from ltuscore.utils.module_attacker import AttackerSpec, OrderPolicy, SeedPolicy, Strategy
from ltuscore.utils.module_data import LabeledDataset, flip_labels, generate_blobs, load_csv, split_source
from ltuscore.utils.module_defender import Algorithm, LossKind, TrainerConfig, losses
from ltuscore.utils.module_oracle import (
    exact_expected_losses,
    exact_pair_stats,
    theorem1_accuracy,
    theorem2_accuracy,
    threshold_metrics,
    zero_one_equality_check,
)
from ltuscore.utils.utils import Config, derive_seed, utility_from_counts

logger = logging.getLogger(__name__)

HIGHLIGHT = 0.90


class Regime(str, Enum):
    ORIG_ORDER_SEEDED = "orig_order_seeded"
    RAND_ORDER_SEEDED = "rand_order_seeded"
    NOT_SEEDED = "not_seeded"


# (sample order known to the attacker, seed access of the attacker)
REGIME_POLICIES = {
    Regime.ORIG_ORDER_SEEDED: (OrderPolicy.ORIGINAL, SeedPolicy.SHARED),
    Regime.RAND_ORDER_SEEDED: (OrderPolicy.RANDOM, SeedPolicy.SHARED),
    Regime.NOT_SEEDED: (OrderPolicy.RANDOM, SeedPolicy.FRESH),
}


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Flat experiment configuration, every key a scalar or a list of scalars

    `dataset` is either `blobs` (synthetic Gaussian blobs) or the path of a CSV file.
    Attackers are written `strategy` or `strategy:discriminant`, e.g. `gap:entropy`.
    """

    name: str = "ltu"
    dataset: str = "blobs"
    num_classes: Optional[int] = None
    dim: int = 2
    per_class: int = 100
    class_separation: float = 4.0
    noise_scale: float = 1.0
    split_fraction: float = 0.5
    flip_fraction: float = 0.0
    algorithm: str = Algorithm.LOGISTIC_GD.value
    learning_rate: Optional[float] = None
    epochs: Optional[int] = None
    l2: float = 0.0
    fit_intercept: bool = True
    k_neighbors: int = 5
    hidden_width: int = 32
    batch_size: int = 32
    init_scale: float = 0.01
    var_smoothing: float = 1e-9
    shuffle_each_epoch: bool = True
    init_seed: Optional[int] = None
    early_stopping: bool = False
    validation_fraction: float = 0.1
    patience: int = 10
    regime: str = Regime.ORIG_ORDER_SEEDED.value
    attackers: Tuple[str, ...] = (Strategy.GAP.value,)
    discriminant: str = "bounded_loss"
    loss_kind: str = LossKind.BOUNDED_TRUE_CLASS.value
    gradient_loss: Optional[str] = None
    seed_policy: Optional[str] = None
    distance: str = "auto"
    wrong_seed: int = 0
    features: Tuple[str, ...] = Config.ATTACK_FEATURES
    include_raw: bool = False
    rounds: int = Config.ROUNDS
    trials: int = Config.TRIALS
    seed: Optional[int] = None
    individual: bool = True
    individual_rounds: int = Config.INDIVIDUAL_ROUNDS
    include_reserved: bool = False
    histogram_bins: int = Config.HISTOGRAM_BINS
    n_jobs: int = 1
    grid_algorithms: Tuple[str, ...] = (
        Algorithm.LOGISTIC_GD.value,
        Algorithm.GAUSSIAN_NB.value,
        Algorithm.PERCEPTRON_SGD.value,
        Algorithm.MLP_SGD.value,
    )
    grid_regimes: Tuple[str, ...] = tuple(regime.value for regime in Regime)
    out: str = "runs"

    def __post_init__(self):
        for key, minimum in (
            ("dim", 1),
            ("per_class", 1),
            ("rounds", 1),
            ("trials", 1),
            ("individual_rounds", 1),
            ("histogram_bins", 1),
            ("n_jobs", 1),
            ("wrong_seed", 0),
        ):
            if getattr(self, key) < minimum:
                raise ConfigError(key, f"must be at least {minimum}, got {getattr(self, key)}")
        if self.num_classes is not None and self.num_classes < 2:
            raise ConfigError("num_classes", f"must be at least 2, got {self.num_classes}")
        if self.seed is not None and self.seed < 0:
            raise ConfigError("seed", f"must be non-negative, got {self.seed}")
        if not 0.0 < self.split_fraction < 1.0:
            raise ConfigError("split_fraction", f"must lie in (0, 1), got {self.split_fraction}")
        if not 0.0 <= self.flip_fraction <= 1.0:
            raise ConfigError("flip_fraction", f"must lie in [0, 1], got {self.flip_fraction}")
        if not self.attackers:
            raise ConfigError("attackers", "must name at least one attacker")

        for key, enum, values in (
            ("regime", Regime, [self.regime]),
            ("grid_regimes", Regime, self.grid_regimes),
            ("grid_algorithms", Algorithm, self.grid_algorithms),
            ("loss_kind", LossKind, [self.loss_kind]),
            ("gradient_loss", LossKind, [self.gradient_loss] if self.gradient_loss else []),
            ("seed_policy", SeedPolicy, [self.seed_policy] if self.seed_policy else []),
        ):
            for value in values:
                try:
                    enum(value)
                except ValueError:
                    choices = ", ".join(member.value for member in enum)
                    raise ConfigError(key, f"unknown value `{value}`, choose from {choices}") from None

        if self.regime == Regime.NOT_SEEDED.value and self.init_seed is not None:
            raise ConfigError("regime", "`not_seeded` contradicts a fixed `init_seed`")

        try:
            self.trainer_config()
        except ArgumentError as error:
            raise ConfigError("algorithm" if "algorithm" in str(error) else "trainer", str(error)) from error
        try:
            self.attacker_specs()
        except ArgumentError as error:
            raise ConfigError("attackers", str(error)) from error

    def trainer_config(self, algorithm: Optional[str] = None) -> TrainerConfig:
        return TrainerConfig(
            algorithm=algorithm if algorithm is not None else self.algorithm,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            l2=self.l2,
            fit_intercept=self.fit_intercept,
            k_neighbors=self.k_neighbors,
            hidden_width=self.hidden_width,
            batch_size=self.batch_size,
            init_scale=self.init_scale,
            var_smoothing=self.var_smoothing,
            shuffle_each_epoch=self.shuffle_each_epoch,
            init_seed=self.init_seed,
            early_stopping=self.early_stopping,
            validation_fraction=self.validation_fraction,
            patience=self.patience,
        )

    def attacker_specs(self, regime: Optional[str] = None) -> List[AttackerSpec]:
        order_policy, seed_policy = REGIME_POLICIES[Regime(regime if regime is not None else self.regime)]
        if self.seed_policy is not None:
            seed_policy = SeedPolicy(self.seed_policy)

        specs = list()
        for entry in self.attackers:
            strategy, _, discriminant = entry.partition(":")
            specs.append(
                AttackerSpec(
                    strategy=strategy,
                    discriminant=discriminant or self.discriminant,
                    loss_kind=self.loss_kind,
                    gradient_loss=self.gradient_loss,
                    seed_policy=seed_policy,
                    order_policy=order_policy,
                    distance=self.distance,
                    wrong_seed=self.wrong_seed,
                    features=self.features,
                    include_raw=self.include_raw,
                )
            )
        return specs

    def scorer_config(self) -> Config:
        return replace(
            Config(),
            ROUNDS=self.rounds,
            TRIALS=self.trials,
            HISTOGRAM_BINS=self.histogram_bins,
            INDIVIDUAL_ROUNDS=self.individual_rounds,
            ATTACK_FEATURES=self.features,
        )

    def resolved(self) -> "ExperimentConfig":
        """Same configuration with the master seed drawn from OS entropy when missing"""
        if self.seed is not None:
            return self
        seed = int(np.random.SeedSequence().entropy % 2 ** 32)
        logger.info("No seed configured, drew master seed %d", seed)
        return replace(self, seed=seed)

    def to_dict(self) -> Dict:
        return {key: list(value) if isinstance(value, tuple) else value for key, value in asdict(self).items()}

    @classmethod
    def from_dict(cls, values: Dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        for key in values:
            if key not in known:
                raise ConfigError(key, "unknown key")
        return cls(**{key: _coerce(key, value) for key, value in values.items()})

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ExperimentConfig":
        """
        Load a flat YAML configuration file

        Args:
            path (Union[str, Path]): configuration file

        Returns:
            ExperimentConfig: validated configuration

        """
        try:
            with open(path, "r", encoding="utf-8") as f:
                values = yaml.safe_load(f)
        except yaml.YAMLError as error:
            mark = getattr(error, "problem_mark", None)
            raise ParseError(f"invalid YAML in {path}", line=mark.line + 1 if mark else None) from error

        if values is None:
            values = dict()
        if not isinstance(values, dict):
            raise ParseError(f"{path} must hold a mapping of keys to values")
        return cls.from_dict(values)

    def with_overrides(self, assignments: Sequence[str] = (), **flags) -> "ExperimentConfig":
        """
        Apply `key=value` assignments, then non-None flags, on top of this configuration

        Args:
            assignments (Sequence[str], optional): `key=value` strings, values parsed as YAML scalars
            flags: keyword overrides such as seed, rounds, trials or out

        Returns:
            ExperimentConfig: new configuration

        """
        values = self.to_dict()
        for assignment in assignments:
            key, sep, raw = assignment.partition("=")
            if not sep or not key.strip():
                raise ConfigError(assignment, "expected `key=value`")
            try:
                values[key.strip()] = yaml.safe_load(raw) if raw.strip() else None
            except yaml.YAMLError as error:
                raise ConfigError(key.strip(), f"cannot parse `{raw}`") from error
        values.update({key: value for key, value in flags.items() if value is not None})
        return ExperimentConfig.from_dict(values)


_HINTS = get_type_hints(ExperimentConfig)


def _coerce(key: str, value):
    hint = _HINTS[key]
    optional = False
    if get_origin(hint) is Union:
        hint = next(arg for arg in get_args(hint) if arg is not type(None))
        optional = True

    if value is None:
        if optional:
            return None
        raise ConfigError(key, "must not be empty")

    if get_origin(hint) is tuple:
        if isinstance(value, str):
            value = [item.strip() for item in value.split(",") if item.strip()]
        if not isinstance(value, (list, tuple)) or any(isinstance(item, (dict, list)) for item in value):
            raise ConfigError(key, "must be a list of scalars")
        return tuple(str(item) for item in value)

    if isinstance(value, (dict, list, tuple)):
        raise ConfigError(key, "must be a scalar")
    if hint is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false"):
            return value.lower() == "true"
        raise ConfigError(key, f"expected a boolean, got `{value}`")
    if hint is int:
        if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
            raise ConfigError(key, f"expected an integer, got `{value}`")
        try:
            return int(value)
        except ValueError:
            raise ConfigError(key, f"expected an integer, got `{value}`") from None
    if hint is float:
        if isinstance(value, bool):
            raise ConfigError(key, f"expected a number, got `{value}`")
        try:
            value = float(value)
        except ValueError:
            raise ConfigError(key, f"expected a number, got `{value}`") from None
        if not math.isfinite(value):
            raise ConfigError(key, f"must be finite, got `{value}`")
        return value
    return str(value)


def load_source(config: ExperimentConfig) -> LabeledDataset:
    """Source data D_S: synthetic blobs seeded from the master seed, or a CSV file"""
    if config.dataset == "blobs":
        return generate_blobs(
            num_classes=config.num_classes if config.num_classes is not None else 3,
            dim=config.dim,
            per_class=config.per_class,
            class_separation=config.class_separation,
            noise_scale=config.noise_scale,
            seed=derive_seed(config.seed, "data"),
        )
    return load_csv(config.dataset, config.num_classes)


def trial_data(
    config: ExperimentConfig,
    source: LabeledDataset,
    trial_seed: int,
) -> Tuple[LabeledDataset, LabeledDataset]:
    """Split the source for one trial, and flip labels of both sets when configured"""
    defender, reserved = split_source(source, config.split_fraction, derive_seed(trial_seed, "split"))
    if config.flip_fraction > 0:
        defender = flip_labels(defender, config.flip_fraction, derive_seed(trial_seed, "flip", "defender"))
        reserved = flip_labels(reserved, config.flip_fraction, derive_seed(trial_seed, "flip", "reserved"))
    return defender, reserved


def _mean_score(scores: Sequence[Dict]) -> Dict:
    """Mean of independent estimates, standard error of the mean"""
    return {
        "value": math.fsum(score["value"] for score in scores) / len(scores),
        "stderr": math.sqrt(math.fsum(score["stderr"] ** 2 for score in scores)) / len(scores),
        "n": sum(score["n"] for score in scores),
    }


def evaluate(
    config: ExperimentConfig,
    algorithm: Optional[str] = None,
    regime: Optional[str] = None,
    individual: Optional[bool] = None,
) -> Dict:
    """
    Evaluate utility and privacy over every trial of a resolved configuration

    Args:
        config (ExperimentConfig): configuration with a master seed
        algorithm (str, optional): trainer override (grid cells). Defaults to None.
        regime (str, optional): randomness regime override (grid cells). Defaults to None.
        individual (bool, optional): individual privacy report override. Defaults to None.

    Returns:
        Dict: report body, free of timestamps

    """
    if config.seed is None:
        raise ConfigError("seed", "must be resolved before evaluation")

    trainer = config.trainer_config(algorithm)
    attackers = config.attacker_specs(regime)
    individual = config.individual if individual is None else individual
    scorer = LtuScore(trainer, attackers[0], config.scorer_config())

    source = load_source(config)
    trials = list()
    for t in range(config.trials):
        trial_seed = derive_seed(config.seed, "trial", t)
        defender, reserved = trial_data(config, source, trial_seed)
        defender_seed = derive_seed(trial_seed, "defender")
        model = scorer.train_defender(defender, seed=defender_seed)

        correct = reserved_accuracy(model, reserved)
        utility = utility_from_counts(correct, len(reserved), model.num_classes)
        trial = {
            "trial": t,
            "trial_seed": trial_seed,
            "defender_seed": defender_seed,
            "defender_size": len(defender),
            "reserved_size": len(reserved),
            "utility": {**utility.to_dict(), "a_d": correct / len(reserved), "correct": correct},
            "attackers": list(),
        }

        for attacker in attackers:
            result = scorer.run_ltu(
                defender,
                reserved,
                attacker=attacker,
                master_seed=derive_seed(trial_seed, "rounds"),
                model=model,
                n_jobs=config.n_jobs,
            )
            entry = result.to_dict()
            entry["spec"] = attacker.to_dict()
            entry["theory"] = scorer.theory(defender, reserved, model, attacker)
            trial["attackers"].append(entry)

        if individual:
            report = scorer.individual_privacy_report(
                defender,
                reserved,
                model,
                attacker=attackers[0],
                seed=derive_seed(trial_seed, "individual"),
                include_reserved=config.include_reserved,
            )
            trial["individual"] = report.to_dict()
        trials.append(trial)

    capabilities = trainer.capabilities
    if capabilities.example_based:
        logger.warning(
            "`%s` stores its training data, membership leaks regardless of attack outcome",
            trainer.algorithm.value,
        )

    body = {
        "config": config.to_dict(),
        "seeds": {"master": config.seed, "trials": [trial["trial_seed"] for trial in trials]},
        "trainer": {**trainer.to_dict(), "capabilities": asdict(capabilities)},
        "example_based": capabilities.example_based,
        "utility": {
            **_mean_score([trial["utility"] for trial in trials]),
            "a_d": math.fsum(trial["utility"]["a_d"] for trial in trials) / len(trials),
        },
        "privacy": dict(),
        "trials": trials,
    }
    for i, attacker in enumerate(attackers):
        entries = [trial["attackers"][i] for trial in trials]
        body["privacy"][attacker.tag] = {
            **_mean_score([entry["privacy"] for entry in entries]),
            "a_ltu": math.fsum(entry["a_ltu"] for entry in entries) / len(entries),
        }
    body["per_round"] = trials[0]["attackers"][0]["per_round"]

    if individual:
        body["individual_scores"] = [
            {"trial": trial["trial"], **row} for trial in trials for row in trial["individual"]["individual_scores"]
        ]
        histogram = [dict(row) for row in trials[0]["individual"]["histogram"]]
        for trial in trials[1:]:
            for row, other in zip(histogram, trial["individual"]["histogram"]):
                row["count"] += other["count"]
        body["histogram"] = histogram
    return body


def _utc_compact() -> str:
    return datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")


def make_run_dir(out: Union[str, Path], prefix: str) -> Path:
    """Allocate a fresh run directory, never reusing an existing one"""
    out = Path(out)
    for attempt in range(10000):
        run_dir = out / f"{prefix}-{_utc_compact()}-{attempt:04d}"
        try:
            run_dir.mkdir(parents=True, exist_ok=False)
        except FileExistsError:
            continue
        return run_dir
    raise ConfigError("out", f"unable to allocate a fresh run directory under {out}")


def _builtin(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def dumps_report(report: Dict) -> str:
    """Deterministic JSON text: sorted keys, exact float repr"""
    return json.dumps(report, indent=2, sort_keys=True, default=_builtin) + "\n"


def _cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def _write_rows(path: Path, header: Sequence[str], rows: Sequence[Dict]):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(header), extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _cell(value) for key, value in row.items()})


def run_experiment(config: ExperimentConfig) -> Tuple[Path, Dict]:
    """
    Run one experiment and write report.json, individual_scores.csv and histogram.csv

    Args:
        config (ExperimentConfig): configuration, resolved here if its seed is missing

    Returns:
        Tuple[Path, Dict]: run directory and report

    """
    config = config.resolved()
    report = evaluate(config)

    run_dir = make_run_dir(config.out, config.name)
    (run_dir / "report.json").write_text(dumps_report(report), encoding="utf-8")
    if "individual_scores" in report:
        _write_rows(
            run_dir / "individual_scores.csv",
            ("trial", "membership", "index", "score", "stderr", "n"),
            report["individual_scores"],
        )
        _write_rows(run_dir / "histogram.csv", ("bin_low", "bin_high", "count"), report["histogram"])
    logger.info("Wrote report to %s", run_dir)
    return run_dir, report


def compare_attackers(config: ExperimentConfig, attackers: Optional[Sequence[str]] = None) -> Tuple[Path, Dict]:
    """
    Evaluate every configured attacker on the identical rounds of the first trial

    Args:
        config (ExperimentConfig): configuration
        attackers (Sequence[str], optional): attacker entries overriding `config.attackers`. Defaults to None.

    Returns:
        Tuple[Path, Dict]: run directory and comparison, written to compare.json

    """
    config = config.resolved()
    if attackers is not None:
        config = config.with_overrides(attackers=list(attackers))
    specs = config.attacker_specs()
    if len(specs) < 2:
        raise ConfigError("attackers", "`compare` needs at least two attackers")

    scorer = LtuScore(config.trainer_config(), specs[0], config.scorer_config())
    trial_seed = derive_seed(config.seed, "trial", 0)
    defender, reserved = trial_data(config, load_source(config), trial_seed)
    comparison = scorer.compare(
        defender,
        reserved,
        specs,
        n_rounds=config.rounds,
        master_seed=derive_seed(trial_seed, "rounds"),
        defender_seed=derive_seed(trial_seed, "defender"),
    )
    comparison.pop("results")
    comparison["config"] = config.to_dict()

    run_dir = make_run_dir(config.out, f"{config.name}-compare")
    (run_dir / "compare.json").write_text(dumps_report(comparison), encoding="utf-8")
    return run_dir, comparison


def run_grid(config: ExperimentConfig) -> Tuple[Path, List[Dict]]:
    """
    Table-1-style sweep over trainers and randomness regimes

    Args:
        config (ExperimentConfig): configuration, its first attacker scores every cell

    Returns:
        Tuple[Path, List[Dict]]: run directory and one row per (algorithm, regime), written to grid.json

    """
    config = config.resolved()
    rows = list()
    for algorithm in config.grid_algorithms:
        for regime in config.grid_regimes:
            logger.info("Grid cell %s / %s", algorithm, regime)
            body = evaluate(config, algorithm=algorithm, regime=regime, individual=False)
            tag, privacy = next(iter(body["privacy"].items()))
            rows.append({
                "algorithm": algorithm,
                "regime": regime,
                "attacker": tag,
                "example_based": body["example_based"],
                "utility": body["utility"],
                "privacy": privacy,
            })

    run_dir = make_run_dir(config.out, f"{config.name}-grid")
    (run_dir / "grid.json").write_text(dumps_report({"config": config.to_dict(), "cells": rows}), encoding="utf-8")
    return run_dir, rows


def run_oracle(config: ExperimentConfig) -> Tuple[Path, Dict]:
    """
    Exact oracle values on the first trial's data: pair statistics and expected losses
    of the bounded and 0-1 losses, their equality check, and thresholded individual metrics

    Args:
        config (ExperimentConfig): configuration

    Returns:
        Tuple[Path, Dict]: run directory and oracle report, written to oracle.json

    """
    config = config.resolved()
    trial_seed = derive_seed(config.seed, "trial", 0)
    defender, reserved = trial_data(config, load_source(config), trial_seed)
    scorer = LtuScore(config.trainer_config(), config=config.scorer_config())
    model = scorer.train_defender(defender, seed=derive_seed(trial_seed, "defender"))

    report = {"config": config.to_dict(), "losses": dict()}
    for kind in LossKind:
        l_d, l_r = losses(model, defender, kind), losses(model, reserved, kind)
        stats = exact_pair_stats(l_d, l_r)
        e_d, e_r = exact_expected_losses(l_d, l_r)
        report["losses"][kind.value] = {
            **stats.to_dict(),
            "e_d": e_d,
            "e_r": e_r,
            "gap_accuracy": theorem1_accuracy(stats),
            "bounded_loss_accuracy": theorem2_accuracy(e_d, e_r),
            "threshold": threshold_metrics(l_d, l_r, 0.5),
        }

    margin, gap = zero_one_equality_check(
        losses(model, defender, LossKind.ZERO_ONE),
        losses(model, reserved, LossKind.ZERO_ONE),
    )
    report["zero_one"] = {"margin": margin, "gap": gap, "equal": abs(margin - gap) <= 1e-12}

    run_dir = make_run_dir(config.out, f"{config.name}-oracle")
    (run_dir / "oracle.json").write_text(dumps_report(report), encoding="utf-8")
    return run_dir, report


def _cell_style(utility: float, privacy: float) -> str:
    if utility > HIGHLIGHT and privacy > HIGHLIGHT:
        return "underline"
    if utility > HIGHLIGHT or privacy > HIGHLIGHT:
        return "bold"
    return ""


def grid_table(rows: Sequence[Dict]) -> Table:
    """Utility / Privacy per trainer (rows) and regime (columns)"""
    regimes = list(dict.fromkeys(row["regime"] for row in rows))
    table = Table(title="Utility / Privacy")
    table.add_column("Trainer")
    for regime in regimes:
        table.add_column(regime)

    for algorithm in dict.fromkeys(row["algorithm"] for row in rows):
        cells = {row["regime"]: row for row in rows if row["algorithm"] == algorithm}
        example_based = any(row["example_based"] for row in cells.values())
        rendered = list()
        for regime in regimes:
            row = cells.get(regime)
            if row is None:
                rendered.append("")
                continue
            u, p = row["utility"]["value"], row["privacy"]["value"]
            style = _cell_style(u, p)
            text = f"{u:.2f} / {p:.2f}"
            rendered.append(f"[{style}]{text}[/{style}]" if style else text)
        table.add_row(algorithm, *rendered, style="red" if example_based else None)
    return table


def compare_table(comparison: Dict) -> Table:
    """Per-attacker accuracy with violation flags, followed by the agreement matrix"""
    tags = [row["attacker"] for row in comparison["attackers"]]
    table = Table(title=f"Attackers on {comparison['n']} shared rounds")
    table.add_column("Attacker")
    table.add_column("A_ltu")
    table.add_column("Privacy")
    table.add_column("Violation")
    for tag in tags:
        table.add_column(tag, justify="right")

    for row, agreement in zip(comparison["attackers"], comparison["agreement"]):
        privacy = row["privacy"]
        table.add_row(
            row["attacker"],
            f"{row['a_ltu']:.3f}",
            f"{privacy['value']:.2f} ± {privacy['stderr']:.2f}",
            "[red]yes[/red]" if row["violation"] else "no",
            *[f"{value:.2f}" for value in agreement],
        )
    return table


def report_table(report: Dict) -> Table:
    """Utility and per-attacker privacy of a run report"""
    table = Table(title=f"{report['config']['name']} ({report['config']['algorithm']})")
    table.add_column("Score")
    table.add_column("Value")
    table.add_column("A")
    utility = report["utility"]
    table.add_row("Utility", f"{utility['value']:.2f} ± {utility['stderr']:.2f}", f"{utility['a_d']:.3f}")
    for tag, privacy in report["privacy"].items():
        value = f"{privacy['value']:.2f} ± {privacy['stderr']:.2f}"
        table.add_row(f"Privacy {tag}", value, f"{privacy['a_ltu']:.3f}")
    return table
