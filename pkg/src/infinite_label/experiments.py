"""The two empirical studies.

``run_fig1c`` trains on a few seen labels and grades unseen labels by their
distance to the seen set. ``run_seen_fraction_sweep`` trains on shrinking,
nested subsets of the label vocabulary and always tests on all of it.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .bilinear import BilinearModel, predict_all, score_all
from .dataio import Dataset
from .errors import ContractError
from .learners import (ConseConfig, ConseModel, HingeConfig, RankNetConfig, conse_score_all,
                       train_conse, train_eszsl, train_hinge, train_ranknet)
from .learners.common import suggest_step
from .metrics import BinSpec, distance_bins, hamming_loss, miap, report
from .synthgen import SynthConfig, derive_seed, generate_world

LEARNERS = ("hinge", "ranknet", "eszsl", "conse")


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("ILL_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items):
    items = list(items)
    workers = worker_count()
    if workers == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- distance-binned study ----------------------------------------------------

@dataclass
class BinCurve:
    kinds: list[str]
    seeds: list[int]
    distances: np.ndarray  # seeds x groups, mean distance of each group
    losses: np.ndarray  # seeds x groups

    @property
    def mean(self) -> np.ndarray:
        return self.losses.mean(axis=0)

    def rows(self) -> list[dict]:
        out = []
        for s, seed in enumerate(self.seeds):
            for g, kind in enumerate(self.kinds):
                out.append({"group_index": g, "group_kind": kind,
                            "mean_distance": float(self.distances[s, g]), "seed": seed,
                            "hamming": float(self.losses[s, g])})
        for g, kind in enumerate(self.kinds):
            out.append({"group_index": g, "group_kind": kind,
                        "mean_distance": float(self.distances[:, g].mean()), "seed": "mean",
                        "hamming": float(self.mean[g])})
        return out


FIG1C_COLUMNS = ["group_index", "group_kind", "mean_distance", "seed", "hamming"]


def default_hinge_config(x, labels, seed: int = 0) -> HingeConfig:
    return HingeConfig(epochs=1000, step0=suggest_step(x, labels, 4.0), seed=seed)


def hinge_trainer(epochs: int = 300, base: float = 4.0, seed: int = 0):
    """``train(x, labels, y) -> BilinearModel`` for the generalization-gap study."""
    def train(x, labels, y):
        cfg = HingeConfig(epochs=epochs, step0=suggest_step(x, labels, base), seed=seed)
        return train_hinge(x, labels, y, cfg)[0]
    return train


def run_fig1c(config: SynthConfig = SynthConfig(), hinge: HingeConfig | None = None,
              bins: BinSpec = BinSpec(), seeds=(0, 1, 2, 3, 4),
              learner: Callable | None = None, against: str = "flipped") -> BinCurve:
    """Hamming loss per label group on the test points, one curve per seed.

    ``learner(draw)`` may replace hinge training (e.g. to plug in V*).
    ``against`` picks the observed ("flipped") or "noiseless" test annotations.
    """
    seeds = list(seeds)
    if not seeds:
        raise ContractError("run_fig1c needs at least one seed")
    if against not in ("flipped", "noiseless"):
        raise ContractError("against must be 'flipped' or 'noiseless'")

    def one(seed):
        draw = generate_world(config, seed)
        if learner is not None:
            model = learner(draw)
        else:
            cfg = hinge or default_hinge_config(draw.train_x, draw.seen, seed)
            model, _ = train_hinge(draw.train_x, draw.seen, draw.train_y, cfg)
        pred = predict_all(model, draw.test_x, draw.all_labels)
        truth = draw.test_y.values if against == "flipped" else draw.test_y.noiseless
        groups = distance_bins(draw.seen, draw.unseen, bins)
        losses = [hamming_loss(pred[:, g.indices], truth[:, g.indices]) for g in groups]
        return [g.kind for g in groups], [g.mean_distance for g in groups], losses

    results = parallel_map(one, seeds)
    kinds = results[0][0]
    return BinCurve(kinds, seeds, np.array([r[1] for r in results]), np.array([r[2] for r in results]))


# -- seen-fraction sweep ------------------------------------------------------

SWEEP_WORLD = SynthConfig(d=20, n=8, k=5, dirichlet_alpha=3.0, m_train=3000, m_test=1000,
                          l_seen=50, l_unseen=0, flip_prob=0.1)


@dataclass
class SweepConfig:
    fractions: list[float] = field(default_factory=lambda: [1.0, 0.9, 0.8, 0.7, 0.6, 0.5])
    learners: list[str] = field(default_factory=lambda: list(LEARNERS))
    k: int = 3
    validation_fraction: float = 0.2
    gamma_grid: list[float] = field(default_factory=lambda: [0.0, 1e-3, 1e-2])
    eszsl_grid: list[float] = field(default_factory=lambda: [0.1, 1.0, 10.0, 100.0])
    conse_grid: list[float] = field(default_factory=lambda: [1e-3, 1e-2, 1e-1])
    conse_t: int = 5
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    nested: bool = True
    ranknet_epochs: int = 60
    hinge_epochs: int = 300

    def __post_init__(self):
        fr = list(self.fractions)
        if not fr or any(not 0.0 < f <= 1.0 for f in fr) or fr != sorted(fr, reverse=True):
            raise ContractError("fractions must be non-empty, in (0, 1] and sorted descending")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ContractError("validation_fraction must lie in (0, 1)")
        unknown = set(self.learners) - set(LEARNERS)
        if unknown:
            raise ContractError(f"unknown learners: {sorted(unknown)}")
        if not self.gamma_grid:
            raise ContractError("gamma_grid must be non-empty")

    def to_dict(self) -> dict:
        return asdict(self)


def seen_count(fraction: float, total: int) -> int:
    """Half-up rounding, so 50% of 81 labels is 41."""
    return max(1, int(math.floor(fraction * total + 0.5)))


def select_seen(total: int, fractions, seed: int, nested: bool = True) -> dict[float, np.ndarray]:
    """Seen-label index sets per fraction; nested sets shrink along one permutation."""
    out = {}
    perm = np.random.default_rng(derive_seed(seed, "sweep.labels")).permutation(total)
    for f in fractions:
        if not nested:
            perm = np.random.default_rng(derive_seed(seed, f"sweep.labels/{f!r}")).permutation(total)
        out[f] = np.sort(perm[:seen_count(f, total)])
    return out


def _fit(learner: str, x, labels, y, hp, sweep: SweepConfig, seed: int):
    if learner == "ranknet":
        cfg = RankNetConfig(epochs=sweep.ranknet_epochs, step0=suggest_step(x, labels, 256.0),
                            gamma=hp, seed=seed)
        return train_ranknet(x, labels, y, cfg)[0]
    if learner == "hinge":
        cfg = HingeConfig(epochs=sweep.hinge_epochs, step0=suggest_step(x, labels, 2.0), seed=seed)
        return train_hinge(x, labels, y, cfg)[0]
    if learner == "eszsl":
        return train_eszsl(x, labels, y, hp, hp)
    if learner == "conse":
        return train_conse(x, labels, y, min(sweep.conse_t, labels.shape[0]), ConseConfig(reg=hp))
    raise ContractError(f"unknown learner {learner!r}")


def model_scores(model, x, labels) -> np.ndarray:
    if isinstance(model, ConseModel):
        return conse_score_all(model, x, labels)
    return score_all(model, x, labels)


def _grid_for(learner: str, sweep: SweepConfig) -> list:
    return {"ranknet": sweep.gamma_grid, "eszsl": sweep.eszsl_grid,
            "conse": sweep.conse_grid, "hinge": [None]}[learner]


def tune_gamma(train_split, val_split, gamma_grid, learner: str = "ranknet",
               sweep: SweepConfig | None = None, seed: int = 0):
    """Pick the grid value with the best validation MiAP (ties go to the smaller value).

    Each split is ``(x, labels, y)``. Returns ``(gamma, table)`` where the
    table has one ``{"gamma", "val_miap"}`` row per grid point.
    """
    grid = list(gamma_grid)
    if not grid:
        raise ContractError("gamma grid is empty")
    sweep = sweep or SweepConfig(learners=[learner])
    table = []
    for g in grid:
        model = _fit(learner, *train_split, g, sweep, seed)
        vx, vl, vy = val_split
        table.append({"gamma": g, "val_miap": miap(model_scores(model, vx, vl), vy)})
    if len(grid) == 1:
        return grid[0], table
    best = max(table, key=lambda r: (r["val_miap"], -(r["gamma"] if r["gamma"] is not None else 0.0)))
    return best["gamma"], table


SWEEP_COLUMNS = ["seed", "fraction", "l_seen", "l_total", "learner", "gamma", "miap", "precision_at_k",
                 "recall_at_k", "f1_at_k", "hamming", "k", "zero_miap", "m_train"]


def _sweep_source(source, seed: int) -> Dataset:
    if isinstance(source, Dataset):
        return source
    if isinstance(source, SynthConfig):
        return Dataset.from_draw(generate_world(source, seed))
    raise ContractError("sweep source must be a Dataset or a SynthConfig")


def run_seen_fraction_sweep(source=SWEEP_WORLD, sweep: SweepConfig = SweepConfig()) -> list[dict]:
    """One metric row per (seed, fraction, learner).

    A :class:`SynthConfig` source regenerates the world for every seed; a
    :class:`Dataset` stays fixed and the seed only drives label selection and
    the validation split. The label vocabulary is the dataset's seen labels;
    testing always covers all of them.
    """
    jobs = []
    prepared = {}
    for seed in sweep.seeds:
        ds = _sweep_source(source, seed)
        if ds.test_x.shape[0] == 0:
            raise ContractError("the sweep needs a test split")
        total = ds.seen.shape[0]
        subsets = select_seen(total, sweep.fractions, seed, sweep.nested)
        perm = np.random.default_rng(derive_seed(seed, "sweep.split")).permutation(ds.train_x.shape[0])
        n_val = int(round(sweep.validation_fraction * perm.size))
        prepared[seed] = (ds, subsets, np.sort(perm[n_val:]), np.sort(perm[:n_val]))
        for f in sweep.fractions:
            for learner in sweep.learners:
                jobs.append((seed, f, learner))

    def run(job):
        seed, f, learner = job
        ds, subsets, tr_idx, va_idx = prepared[seed]
        cols = subsets[f]
        labels = ds.seen[cols]
        y = ds.train_y.values[:, cols]
        keep = np.any(y == 1, axis=1)
        if not np.any(keep):
            raise ContractError(f"fraction {f}: no training point has a relevant seen label")
        tr = tr_idx[keep[tr_idx]]
        va = va_idx[keep[va_idx]]
        if tr.size == 0 or va.size == 0:
            raise ContractError(f"fraction {f}: the train or validation split is empty after dropping")
        gamma, _ = tune_gamma((ds.train_x[tr], labels, y[tr]), (ds.train_x[va], labels, y[va]),
                              _grid_for(learner, sweep), learner, sweep, seed)
        all_idx = np.sort(np.concatenate([tr, va]))
        model = _fit(learner, ds.train_x[all_idx], labels, y[all_idx], gamma, sweep, seed)
        scores = model_scores(model, ds.test_x, ds.seen)
        truth = ds.test_y_seen.values
        rep = report(scores, truth, sweep.k)
        zero = miap(np.zeros_like(scores), truth)
        return {"seed": seed, "fraction": f, "l_seen": int(cols.size), "l_total": int(ds.seen.shape[0]),
                "learner": learner, "gamma": gamma, **rep.to_dict(), "zero_miap": zero,
                "m_train": int(all_idx.size)}

    rows = parallel_map(run, jobs)
    order = {l: i for i, l in enumerate(LEARNERS)}
    return sorted(rows, key=lambda r: (r["seed"], -r["fraction"], order[r["learner"]]))


def summarize_sweep(rows: list[dict]) -> list[dict]:
    """Seed-averaged metrics per (learner, fraction)."""
    keys = sorted({(r["learner"], r["fraction"]) for r in rows}, key=lambda k: (k[0], -k[1]))
    out = []
    for learner, f in keys:
        sel = [r for r in rows if r["learner"] == learner and r["fraction"] == f]
        out.append({"learner": learner, "fraction": f, "l_seen": sel[0]["l_seen"], "seeds": len(sel),
                    **{m: float(np.mean([r[m] for r in sel]))
                       for m in ("miap", "precision_at_k", "recall_at_k", "f1_at_k", "hamming",
                                 "zero_miap")}})
    return out


def ground_truth_learner(draw) -> BilinearModel:
    return draw.world.v_star
