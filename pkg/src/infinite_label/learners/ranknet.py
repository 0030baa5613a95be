"""Pairwise RankNet loss for the bilinear model.

For image m with K_m relevant labels, every (relevant k, irrelevant kbar) pair
costs ``log(1 + exp(s_kbar - s_k))`` and the pairs are weighted by
``1 / (K_m (L - K_m))``. Images with no relevant or no irrelevant label carry
no pairs and are dropped, including from the 1/M normalizer. The regularizer
is ``gamma * ||V||_F^2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..bilinear import BilinearModel
from ..errors import ContractError
from ..numkit import frobenius_norm_sq
from .common import TrainTrace, check_batch, check_training_inputs, descend

_CUT = 35.0


def softplus(z) -> np.ndarray:
    """``log(1 + exp(z))``: ``z`` above 35, ``exp(z)`` below -35."""
    z = np.asarray(z, dtype=np.float64)
    mid = np.abs(z) <= _CUT
    out = np.where(z > _CUT, z, 0.0)
    out = np.where(z < -_CUT, np.exp(np.minimum(z, 0.0)), out)
    out[mid] = np.log1p(np.exp(z[mid]))
    return out


def logistic(z) -> np.ndarray:
    """``1 / (1 + exp(-z))`` with ``exp(z)`` used below -35."""
    z = np.asarray(z, dtype=np.float64)
    return np.where(z < -_CUT, np.exp(np.minimum(z, 0.0)), 1.0 / (1.0 + np.exp(-np.maximum(z, -_CUT))))


@dataclass
class RankNetConfig:
    epochs: int = 300
    step0: float = 1.0
    gamma: float = 0.0
    batch: int | str = "full"
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ContractError("epochs must be >= 1")
        if self.step0 <= 0:
            raise ContractError("step0 must be > 0")
        if self.gamma < 0:
            raise ContractError("gamma must be >= 0")
        check_batch(self.batch)


class _Pairs:
    """Relevant/irrelevant label pairs of the retained images."""

    def __init__(self, y: np.ndarray):
        n_labels = y.shape[1]
        k = np.count_nonzero(y == 1, axis=1)
        self.retained = np.flatnonzero((k > 0) & (k < n_labels))
        yr = y[self.retained]
        kr = k[self.retained]
        img, pos, neg = np.nonzero((yr == 1)[:, :, None] & (yr == -1)[:, None, :])
        self.img = img
        # flat positions into the (retained images x labels) score matrix
        self.flat_pos = img * n_labels + pos
        self.flat_neg = img * n_labels + neg
        self.weight = 1.0 / (kr * (n_labels - kr)).astype(np.float64)[img]
        self.n_labels = n_labels

    @property
    def count(self) -> int:
        return self.retained.size

    def gaps(self, scores_r: np.ndarray) -> np.ndarray:
        # s_kbar - s_k for every pair
        flat = scores_r.ravel()
        return np.take(flat, self.flat_neg) - np.take(flat, self.flat_pos)

    def scatter(self, coef: np.ndarray) -> np.ndarray:
        """d(sum coef * gap)/d(scores) as a (retained images x labels) matrix."""
        size = self.count * self.n_labels
        out = (np.bincount(self.flat_neg, weights=coef, minlength=size)
               - np.bincount(self.flat_pos, weights=coef, minlength=size))
        return out.reshape(self.count, self.n_labels)


def _prepare(x, labels, y):
    x, labels, y = check_training_inputs(x, labels, y)
    pairs = _Pairs(y)
    if pairs.count == 0:
        raise ContractError("every image has all or none of its labels relevant; nothing to rank")
    return x, labels, pairs


def _objective(v, x_r, labels, pairs, gamma):
    scores = (x_r @ v.T) @ labels.T
    loss = np.sum(pairs.weight * softplus(pairs.gaps(scores))) / pairs.count
    return float(loss + gamma * frobenius_norm_sq(v))


def _gradient(v, x_r, labels, pairs, gamma):
    scores = (x_r @ v.T) @ labels.T
    d_scores = pairs.scatter(pairs.weight * logistic(pairs.gaps(scores)))
    return (labels.T @ d_scores.T @ x_r) / pairs.count + 2.0 * gamma * v


def _value_and_gradient(v, x_r, labels, pairs, gamma):
    # one exp shared by the loss and its derivative
    gap = pairs.gaps((x_r @ v.T) @ labels.T)
    e = np.exp(-np.abs(gap))
    loss = np.maximum(gap, 0.0) + np.log1p(e)
    sig = np.where(gap >= 0.0, 1.0, e) / (1.0 + e)
    reg = gamma * frobenius_norm_sq(v)
    value = float(np.dot(pairs.weight, loss) / pairs.count + reg)
    d_scores = pairs.scatter(pairs.weight * sig)
    return value, (labels.T @ d_scores.T @ x_r) / pairs.count + 2.0 * gamma * v


def ranknet_objective(model, x, labels, y, gamma: float = 0.0) -> float:
    v = getattr(model, "v", model)
    x, labels, pairs = _prepare(x, labels, y)
    return _objective(np.asarray(v, float), x[pairs.retained], labels, pairs, gamma)


def ranknet_gradient(model, x, labels, y, gamma: float = 0.0) -> np.ndarray:
    """Exact gradient of :func:`ranknet_objective` with respect to V (n x d)."""
    v = getattr(model, "v", model)
    x, labels, pairs = _prepare(x, labels, y)
    return _gradient(np.asarray(v, float), x[pairs.retained], labels, pairs, gamma)


def train_ranknet(x, labels, y, cfg: RankNetConfig = RankNetConfig()) -> tuple[BilinearModel, TrainTrace]:
    x, labels, pairs = _prepare(x, labels, y)
    x_r = x[pairs.retained]
    y_r = np.asarray(getattr(y, "values", y))[pairs.retained]
    batch = check_batch(cfg.batch)

    def objective(v):
        return _objective(v, x_r, labels, pairs, cfg.gamma)

    def gradient(v, rows):
        if rows is None:
            return _gradient(v, x_r, labels, pairs, cfg.gamma)
        return _gradient(v, x_r[rows], labels, _Pairs(y_r[rows]), cfg.gamma)

    def fused(v):
        return _value_and_gradient(v, x_r, labels, pairs, cfg.gamma)

    return descend(objective, gradient, (labels.shape[1], x.shape[1]), pairs.count,
                   cfg.epochs, cfg.step0, batch, cfg.seed, "ranknet", fused=fused)
