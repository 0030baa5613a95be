from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..bilinear import BilinearModel
from ..errors import ContractError, DivergedError
from ..numkit import as_matrix


@dataclass
class TrainTrace:
    objectives: list[float]  # objective after each epoch; index 0 is the starting point V = 0
    best: list[float]  # running best-so-far of ``objectives``
    final_objective: float
    seconds: float = field(default=0.0, compare=False)

    def rows(self):
        for epoch, (obj, best) in enumerate(zip(self.objectives, self.best)):
            yield epoch, obj, best


def check_batch(batch) -> int | None:
    if batch in (None, "full"):
        return None
    batch = int(batch)
    if batch < 1:
        raise ContractError("batch must be a positive count or 'full'")
    return batch


def check_training_inputs(x, labels, y):
    x = as_matrix(x, "features")
    labels = as_matrix(labels, "labels")
    y = np.asarray(getattr(y, "values", y))
    if y.shape != (x.shape[0], labels.shape[0]):
        raise ContractError(f"annotations are {y.shape}, expected {(x.shape[0], labels.shape[0])} "
                            "for the given features and labels")
    return x, labels, y.astype(np.float64)


def descend(
    objective: Callable[[np.ndarray], float],
    gradient: Callable[[np.ndarray, np.ndarray | None], np.ndarray],
    shape: tuple[int, int],
    n_rows: int,
    epochs: int,
    step0: float,
    batch: int | None,
    seed: int,
    learner: str,
    fused: Callable[[np.ndarray], tuple[float, np.ndarray]] | None = None,
) -> tuple[BilinearModel, TrainTrace]:
    """(Sub)gradient descent from V = 0 with step ``step0 / sqrt(t)``.

    ``t`` counts updates. With mini-batches the row order is reshuffled each
    epoch by a generator seeded from ``seed``. Returns the best iterate seen,
    judged by the full objective at the end of each epoch.

    ``fused(v)`` may return ``(objective, full gradient)`` in one pass; it is
    used for full-batch runs to share work between the two.
    """
    if epochs < 1:
        raise ContractError("epochs must be >= 1")
    if step0 <= 0:
        raise ContractError("step0 must be > 0")
    started = time.perf_counter()
    v = np.zeros(shape)
    best_v = v.copy()
    full = batch is None or batch >= n_rows
    if full and fused is not None:
        best, grad = fused(v)
    else:
        best, grad = objective(v), None
    objectives, bests = [best], [best]
    rng = np.random.default_rng(seed)
    t = 0
    for epoch in range(1, epochs + 1):
        if full and fused is not None:
            t += 1
            v = v - (step0 / math.sqrt(t)) * grad
            f, grad = fused(v)
        else:
            if full:
                chunks = [None]
            else:
                perm = rng.permutation(n_rows)
                chunks = [perm[i:i + batch] for i in range(0, n_rows, batch)]
            for rows in chunks:
                t += 1
                v = v - (step0 / math.sqrt(t)) * gradient(v, rows)
            f = objective(v)
        if not math.isfinite(f):
            raise DivergedError(epoch, learner)
        if f < best:
            best, best_v = f, v.copy()
        objectives.append(f)
        bests.append(best)
    trace = TrainTrace(objectives, bests, best, time.perf_counter() - started)
    return BilinearModel(best_v), trace


def suggest_step(x, labels, base: float = 1.0) -> float:
    """``base / (mean ||x||^2 * mean ||lam||^2)``, a curvature-scaled initial step."""
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    scale = float(np.mean(np.sum(x * x, axis=1)) * np.mean(np.sum(labels * labels, axis=1)))
    return base / scale if scale > 0 else base
