"""Numeric evaluation of the infinite-label generalization bound.

With probability at least 1 - delta, for every bilinear hypothesis,

    R(h) - R_emp(h) <= 2 * max(eps_data, eps_label)
    eps_data  = sqrt((8 log(8/delta)   + 8 d log(2 e M / d)) / M)
    eps_label = sqrt((8 log(8 M/delta) + 8 n log(2 e L / n)) / L)

where R_emp is the 0-1 risk over the full M x L training grid. Logs are natural.
The second term pays a union bound over the M data points, so it grows with M.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .bilinear import BilinearModel, predict_all
from .errors import ContractError
from .synthgen import SyntheticWorld, derive_seed, draw_sample


@dataclass(frozen=True)
class BoundInput:
    m: int
    l: int
    d: int
    n: int
    delta: float = 0.05

    def __post_init__(self):
        for name in ("m", "l", "d", "n"):
            if int(getattr(self, name)) < 1:
                raise ContractError(f"{name} must be >= 1")
        if not 0.0 < self.delta < 1.0:
            raise ContractError(f"delta must lie in (0, 1), got {self.delta}")
        if 2 * math.e * self.m / self.d <= 1 or 2 * math.e * self.l / self.n <= 1:
            warnings.warn("growth-function log terms are not positive at these sizes; "
                          "the bound carries no information", stacklevel=3)


def epsilon1(m: int, d: int, delta: float) -> float:
    """Data-side deviation term."""
    BoundInput(m, 1, d, 1, delta)
    return math.sqrt((8 * math.log(8 / delta) + 8 * d * math.log(2 * math.e * m / d)) / m)


def epsilon2(m: int, l: int, n: int, delta: float) -> float:
    """Label-side deviation term, including the union bound over the M data points."""
    BoundInput(m, l, 1, n, delta)
    return math.sqrt((8 * math.log(8 * m / delta) + 8 * n * math.log(2 * math.e * l / n)) / l)


def theorem_bound(inp: BoundInput) -> float:
    return 2.0 * max(epsilon1(inp.m, inp.d, inp.delta), epsilon2(inp.m, inp.l, inp.n, inp.delta))


def bound_report(inp: BoundInput) -> dict:
    e1 = epsilon1(inp.m, inp.d, inp.delta)
    e2 = epsilon2(inp.m, inp.l, inp.n, inp.delta)
    bound = 2.0 * max(e1, e2)
    return {**asdict(inp), "epsilon1": e1, "epsilon2": e2, "bound": bound, "vacuous": bound >= 1.0}


def zero_one_risk(model: BilinearModel, x, labels, y) -> float:
    """Mismatch fraction of ``sgn <V x, lam>`` against observed annotations."""
    y = np.asarray(getattr(y, "values", y))
    return float(np.mean(predict_all(model, x, labels) != y))


def estimate_risk(model: BilinearModel, world: SyntheticWorld, m_mc: int = 2000, l_mc: int = 2000,
                  seed: int = 0) -> tuple[float, float]:
    """Monte-Carlo estimate of the generalization risk and its standard error.

    Fresh data, fresh labels and fresh noisy annotations are drawn from the
    world; the standard error treats the ``m_mc * l_mc`` cells as independent,
    which is exact when only the label noise causes mismatches.
    """
    if m_mc < 1 or l_mc < 1:
        raise ContractError("m_mc and l_mc must be >= 1")
    x, labels, y = draw_sample(world, m_mc, l_mc, derive_seed(seed, "risk"))
    risk = zero_one_risk(model, x, labels, y)
    return risk, math.sqrt(risk * (1.0 - risk) / (m_mc * l_mc))


@dataclass
class GapRecord:
    m: int
    l: int
    trial: int
    seed: int
    train_risk: float
    test_risk: float
    gap: float
    bound: float
    vacuous: bool

    def to_row(self) -> dict:
        return asdict(self)


GAP_COLUMNS = ["m", "l", "trial", "seed", "train_risk", "test_risk", "gap", "bound", "vacuous"]


def gap_experiment(grid, trials: int, world: SyntheticWorld, train, delta: float = 0.05,
                   m_mc: int = 2000, l_mc: int = 2000, seed: int = 0) -> list[GapRecord]:
    """Measure ``R(h) - R_emp(h)`` for ERM solutions against the bound.

    ``train(x, labels, y)`` returns a :class:`BilinearModel`. Each ``(m, l)``
    cell and trial draws its own training sample from the fixed world.
    """
    if trials < 1:
        raise ContractError("trials must be >= 1")
    records = []
    for m, l in sorted(grid):
        bound = theorem_bound(BoundInput(m, l, world.v_star.d, world.v_star.n, delta))
        for trial in range(trials):
            trial_seed = derive_seed(seed, f"gap/{m}/{l}/{trial}")
            x, labels, y = draw_sample(world, m, l, trial_seed)
            model = train(x, labels, y)
            train_risk = zero_one_risk(model, x, labels, y)
            test_risk, _ = estimate_risk(model, world, m_mc, l_mc, trial_seed)
            records.append(GapRecord(m, l, trial, trial_seed, train_risk, test_risk,
                                     test_risk - train_risk, bound, bound >= 1.0))
    return records
