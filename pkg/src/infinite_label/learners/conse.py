"""ConSE baseline: convex combination of seen label codes.

One logistic regression per seen label gives relevance probabilities. An image
is embedded as the probability-weighted mean of its top-T seen label codes and
any label, seen or unseen, is scored by cosine similarity to that embedding.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from ..numkit import as_matrix, as_vector
from .common import check_training_inputs
from .ranknet import logistic


@dataclass
class ConseConfig:
    epochs: int = 300
    reg: float = 1e-3


@dataclass(frozen=True)
class ConseModel:
    weights: np.ndarray  # d x L_seen
    bias: np.ndarray  # (L_seen,)
    seen: np.ndarray  # L_seen x n
    t: int

    def __post_init__(self):
        if not 1 <= self.t <= self.seen.shape[0]:
            raise ContractError(f"T must lie in [1, {self.seen.shape[0]}], got {self.t}")
        if self.weights.shape[1] != self.seen.shape[0] or self.bias.shape != (self.seen.shape[0],):
            raise ContractError("need exactly one classifier per seen label")

    @property
    def d(self) -> int:
        return self.weights.shape[0]

    @property
    def n(self) -> int:
        return self.seen.shape[1]


def _lipschitz(x1: np.ndarray) -> float:
    """Largest eigenvalue of ``x1^T x1 / M`` by power iteration."""
    gram = x1.T @ x1 / x1.shape[0]
    u = np.ones(gram.shape[0]) / np.sqrt(gram.shape[0])
    lam = 0.0
    for _ in range(100):
        w = gram @ u
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            return 0.0
        u = w / lam
    return lam


def train_conse(x, labels, y, t: int = 5, cfg: ConseConfig | None = None) -> ConseModel:
    """Fit the per-label classifiers by full-batch gradient descent on L2-regularized log-loss.

    A label column holding a single class cannot be separated; its classifier
    falls back to the (Laplace-smoothed) prior.
    """
    cfg = cfg or ConseConfig()
    x, labels, y = check_training_inputs(x, labels, y)
    m, d = x.shape
    if not 1 <= t <= labels.shape[0]:
        raise ContractError(f"T must lie in [1, {labels.shape[0]}], got {t}")
    target = (y > 0).astype(np.float64)  # M x L
    x1 = np.hstack([x, np.ones((m, 1))])
    step = 1.0 / (0.25 * _lipschitz(x1) + cfg.reg + 1e-12)
    coef = np.zeros((d + 1, labels.shape[0]))
    for _ in range(cfg.epochs):
        resid = logistic(x1 @ coef) - target
        grad = x1.T @ resid / m
        grad[:d] += cfg.reg * coef[:d]
        coef -= step * grad
    pos = target.sum(axis=0)
    single = (pos == 0) | (pos == m)
    if np.any(single):
        prior = (pos[single] + 1.0) / (m + 2.0)
        coef[:, single] = 0.0
        coef[d, single] = np.log(prior / (1.0 - prior))
    return ConseModel(coef[:d].copy(), coef[d].copy(), labels.copy(), t)


def seen_probabilities(model: ConseModel, x) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    return logistic(x @ model.weights + model.bias)


def embed(model: ConseModel, x) -> np.ndarray:
    """``sum p_l lam_l / sum p_l`` over each row's T most probable seen labels."""
    probs = seen_probabilities(model, x)
    top = np.argsort(-probs, axis=1, kind="stable")[:, :model.t]
    p_top = np.take_along_axis(probs, top, axis=1)
    total = p_top.sum(axis=1, keepdims=True)
    weighted = np.einsum("mt,mtn->mn", p_top, model.seen[top])
    return np.divide(weighted, total, out=np.zeros_like(weighted), where=total > 0)


def _cosine(e: np.ndarray, labels: np.ndarray) -> np.ndarray:
    e_norm = np.linalg.norm(e, axis=1)
    l_norm = np.linalg.norm(labels, axis=1)
    denom = e_norm[:, None] * l_norm[None, :]
    return np.divide(e @ labels.T, denom, out=np.zeros(denom.shape), where=denom > 0)


def conse_score(model: ConseModel, x_vec, lam) -> float:
    x_vec = as_vector(x_vec, "x")
    lam = as_vector(lam, "lambda")
    if x_vec.size != model.d or lam.size != model.n:
        raise ContractError(f"ConSE model expects x of dim {model.d} and lambda of dim {model.n}")
    return float(np.clip(_cosine(embed(model, x_vec), lam[None, :])[0, 0], -1.0, 1.0))


def conse_score_all(model: ConseModel, x, labels) -> np.ndarray:
    x = as_matrix(x, "features")
    labels = as_matrix(labels, "labels")
    if x.shape[1] != model.d or labels.shape[1] != model.n:
        raise ContractError(f"ConSE model expects features of dim {model.d} and labels of dim {model.n}")
    return np.clip(_cosine(embed(model, x), labels), -1.0, 1.0)
