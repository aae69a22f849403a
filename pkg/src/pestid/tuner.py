"""Random-search hyperparameter tuning over a discrete grid.

Configurations are drawn uniformly without replacement (a seeded
permutation prefix, so extending the trial budget keeps earlier draws).
Each trial trains a fresh head for the tuning epoch budget; its objective
is the best validation accuracy seen across epochs. The winner is the
argmax, ties broken by lower trial index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Callable, Sequence

from .dataset import dumps_canonical
from .features import FeatureMatrix
from .optim import (
    SEARCH_DROPOUT_RATES,
    SEARCH_LEARNING_RATES,
    SEARCH_OPTIMIZERS,
    HyperParams,
)
from .seeding import derive_seed, stream
from .trainer import TrainConfig, train


@dataclass(frozen=True)
class SearchSpace:
    optimizers: tuple[str, ...] = SEARCH_OPTIMIZERS
    learning_rates: tuple[float, ...] = SEARCH_LEARNING_RATES
    dropout_rates: tuple[float, ...] = SEARCH_DROPOUT_RATES

    def __post_init__(self) -> None:
        if not (self.optimizers and self.learning_rates and self.dropout_rates):
            raise ValueError("search space axes must be non-empty")

    @property
    def size(self) -> int:
        return len(self.optimizers) * len(self.learning_rates) * len(self.dropout_rates)

    def grid(self) -> list[HyperParams]:
        return [HyperParams(o, lr, dr)
                for o, lr, dr in product(self.optimizers, self.learning_rates,
                                         self.dropout_rates)]


@dataclass
class TrialRecord:
    trial_index: int
    hyperparams: HyperParams
    epochs_run: int
    val_accuracy_per_epoch: list[float]
    objective: float
    training_seed: int = 0


@dataclass
class TuneResult:
    trials: list[TrialRecord]
    best: TrialRecord
    seed: int
    space: SearchSpace = field(default_factory=SearchSpace)
    tune_epochs: int = 0

    @property
    def best_hyperparams(self) -> HyperParams:
        return self.best.hyperparams


def sample_configs(space: SearchSpace, n: int, seed: int) -> list[HyperParams]:
    """n distinct configurations drawn uniformly from the grid."""
    grid = space.grid()
    if n > len(grid):
        raise ValueError(
            f"cannot draw {n} distinct configurations from a grid of {len(grid)}")
    order = stream(seed).permutation(len(grid))
    return [grid[i] for i in order[:n]]


def run_search(space: SearchSpace, n: int, tune_epochs: int,
               train_data: FeatureMatrix | None, val_data: FeatureMatrix | None,
               seed: int,
               configs: Sequence[HyperParams] | None = None,
               evaluate_trial: Callable[[HyperParams, int], list[float]] | None = None,
               batch_size: int = 16) -> TuneResult:
    """Evaluate n sampled configurations and pick the best.

    ``configs`` replays an explicit configuration list instead of
    sampling; ``evaluate_trial(hp, trial_seed) -> per-epoch accuracies``
    substitutes the trainer (used to rerun recorded search ledgers and in
    tests). Both default to the real pipeline.
    """
    if configs is None:
        configs = sample_configs(space, n, seed)
    elif len(configs) != n:
        raise ValueError(f"{len(configs)} explicit configs but n={n}")

    if evaluate_trial is None:
        if train_data is None or val_data is None:
            raise ValueError("run_search needs train and validation features")

        def evaluate_trial(hp: HyperParams, trial_seed: int) -> list[float]:
            config = TrainConfig(epochs=tune_epochs, hyperparams=hp,
                                 batch_size=batch_size, seed=trial_seed)
            _, records = train(train_data, val_data, config)
            return [r.val_accuracy for r in records]

    trials: list[TrialRecord] = []
    for index, hp in enumerate(configs):
        trial_seed = derive_seed(seed, index)
        try:
            accuracies = list(evaluate_trial(hp, trial_seed))
        except Exception as exc:
            raise RuntimeError(f"trial {index} ({hp}) failed: {exc}") from exc
        trials.append(TrialRecord(
            trial_index=index,
            hyperparams=hp,
            epochs_run=len(accuracies),
            val_accuracy_per_epoch=accuracies,
            objective=max(accuracies),
            training_seed=trial_seed,
        ))

    best = trials[0]
    for trial in trials[1:]:
        if trial.objective > best.objective:
            best = trial
    return TuneResult(trials=trials, best=best, seed=seed, space=space,
                      tune_epochs=tune_epochs)


def _row(trial: TrialRecord) -> dict:
    hp = trial.hyperparams
    return {
        "trial": trial.trial_index,
        "dropout": hp.dropout_rate,
        "lr": hp.learning_rate,
        "optimizer": hp.optimizer,
        "val_accuracy": trial.objective * 100.0,
    }


def tune_result_dict(result: TuneResult, provenance: dict | None = None) -> dict:
    doc = {
        "seed": result.seed,
        "tune_epochs": result.tune_epochs,
        "space": {
            "optimizers": list(result.space.optimizers),
            "learning_rates": list(result.space.learning_rates),
            "dropout_rates": list(result.space.dropout_rates),
        },
        "rows": [_row(t) for t in result.trials],
        "best": _row(result.best),
        "trials": [
            {
                "trial_index": t.trial_index,
                "optimizer": t.hyperparams.optimizer,
                "learning_rate": t.hyperparams.learning_rate,
                "dropout_rate": t.hyperparams.dropout_rate,
                "epochs_run": t.epochs_run,
                "val_accuracy_per_epoch": t.val_accuracy_per_epoch,
                "objective": t.objective,
                "training_seed": t.training_seed,
            }
            for t in result.trials
        ],
    }
    if provenance:
        doc["provenance"] = provenance
    return doc


def save_tune_result(result: TuneResult, path: str | Path,
                     provenance: dict | None = None) -> None:
    Path(path).write_text(dumps_canonical(tune_result_dict(result, provenance)))


def load_best_hyperparams(path: str | Path) -> HyperParams:
    import json

    doc = json.loads(Path(path).read_text())
    best = doc["best"]
    return HyperParams(best["optimizer"], best["lr"], best["dropout"])
