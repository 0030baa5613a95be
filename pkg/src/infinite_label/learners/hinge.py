"""Hinge-loss empirical risk minimization over the full data x label grid."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..bilinear import BilinearModel
from ..errors import ContractError
from .common import TrainTrace, check_batch, check_training_inputs, descend


@dataclass
class HingeConfig:
    epochs: int = 500
    step0: float = 1.0
    batch: int | str = "full"
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ContractError("epochs must be >= 1")
        if self.step0 <= 0:
            raise ContractError("step0 must be > 0")
        check_batch(self.batch)


def _margins(v, x, labels, y):
    return y * ((x @ v.T) @ labels.T)


def hinge_objective(model, x, labels, y) -> float:
    """``mean over (m, l) of max(1 - y_ml <V x_m, lam_l>, 0)``."""
    v = getattr(model, "v", model)
    x, labels, y = check_training_inputs(x, labels, y)
    if v.shape != (labels.shape[1], x.shape[1]):
        raise ContractError(f"V is {v.shape}, expected {(labels.shape[1], x.shape[1])}")
    return float(np.mean(np.maximum(1.0 - _margins(v, x, labels, y), 0.0)))


def hinge_subgradient(v, x, labels, y) -> np.ndarray:
    """Subgradient of :func:`hinge_objective`; cells at margin exactly 1 contribute 0."""
    active = np.where(_margins(v, x, labels, y) < 1.0, y, 0.0)
    return -(labels.T @ active.T @ x) / active.size


def train_hinge(x, labels, y, cfg: HingeConfig = HingeConfig()) -> tuple[BilinearModel, TrainTrace]:
    x, labels, y = check_training_inputs(x, labels, y)
    batch = check_batch(cfg.batch)

    def objective(v):
        return float(np.mean(np.maximum(1.0 - _margins(v, x, labels, y), 0.0)))

    def gradient(v, rows):
        if rows is None:
            return hinge_subgradient(v, x, labels, y)
        return hinge_subgradient(v, x[rows], labels, y[rows])

    return descend(objective, gradient, (labels.shape[1], x.shape[1]), x.shape[0],
                   cfg.epochs, cfg.step0, batch, cfg.seed, "hinge")
