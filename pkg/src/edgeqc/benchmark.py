"""Two-task drift benchmark: how much does rehearsal protect old accuracy?

Task A is the stock plant; task B shifts every phase-5 setpoint mean by two
pooled reading stds. A model is trained on task A, then retrained on task B
twice from the same snapshot - once with rehearsal (ratio 1) and once
without - and both are scored on the task-A holdout. The rehearsal advantage
is the difference of those accuracies.
"""

from __future__ import annotations

from dataclasses import dataclass

from .features import samples_to_arrays
from .metrics import evaluate
from .plant_sim import PlantConfig, batch_samples, default_config, inject_drift, phase5_drift
from .serialize import dumps_model, loads_model
from .training import TrainConfig, train_incremental, train_initial

TRAIN_BATCHES = 200
HOLDOUT_BATCHES = 100
DRIFT_STDS = 2.0


@dataclass(frozen=True)
class ForgettingResult:
    accuracy_before: float
    accuracy_with_rehearsal: float
    accuracy_without_rehearsal: float

    @property
    def rehearsal_advantage(self) -> float:
        return self.accuracy_with_rehearsal - self.accuracy_without_rehearsal


def run_forgetting_benchmark(seed: int = 42,
                             cfg: PlantConfig | None = None) -> ForgettingResult:
    """Deterministic for a given seed; data seeds derive from the master."""
    cfg = cfg or default_config()
    cfg_shifted = inject_drift(cfg, phase5_drift(cfg, DRIFT_STDS))

    task_a_train = batch_samples(cfg, TRAIN_BATCHES, seed=seed * 2 + 1)
    task_a_hold = batch_samples(cfg, HOLDOUT_BATCHES, seed=seed * 2 + 2)
    task_b_train = batch_samples(cfg_shifted, TRAIN_BATCHES, seed=seed * 2 + 3)

    base, _ = train_initial(task_a_train, TrainConfig(seed=seed))
    X_hold, y_hold = samples_to_arrays(task_a_hold)
    before = evaluate(base.forest, base.standardizer().transform(X_hold), y_hold).accuracy

    snapshot = dumps_model(base.forest, base.memory)
    accuracy = {}
    for rho in (1.0, 0.0):
        forest, memory = loads_model(snapshot)
        retrained, _ = train_incremental(
            forest, memory, task_b_train,
            TrainConfig(seed=seed, rehearsal_ratio=rho))
        scaler = memory.stats.standardizer()
        accuracy[rho] = evaluate(retrained, scaler.transform(X_hold), y_hold).accuracy

    return ForgettingResult(before, accuracy[1.0], accuracy[0.0])
