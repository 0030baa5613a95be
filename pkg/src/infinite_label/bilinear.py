"""Bilinear labeling function ``h(x, lam) = sgn <V x, lam>``.

A label is relevant to a data point when the label code falls on the positive
side of the hyperplane ``V x``. Seen and unseen labels are scored the same way,
which is what lets a model trained on a handful of labels tag new ones.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .numkit import as_matrix, as_vector, matmul


def sign(scores) -> np.ndarray:
    """Elementwise sign with the tie rule ``sgn(0) = -1``."""
    return np.where(np.asarray(scores) > 0, 1, -1).astype(np.int8)


@dataclass(frozen=True)
class BilinearModel:
    v: np.ndarray  # n x d

    def __post_init__(self):
        v = as_matrix(self.v, "V").copy()
        v.setflags(write=False)
        object.__setattr__(self, "v", v)

    @property
    def n(self) -> int:
        return self.v.shape[0]

    @property
    def d(self) -> int:
        return self.v.shape[1]

    @classmethod
    def zeros(cls, n: int, d: int) -> "BilinearModel":
        return cls(np.zeros((n, d)))

    def scaled(self, c: float) -> "BilinearModel":
        return BilinearModel(self.v * c)

    def __neg__(self) -> "BilinearModel":
        return BilinearModel(-self.v)


def score(model: BilinearModel, x, lam) -> float:
    """``lam^T (V x)``, the pre-sign value."""
    x = as_vector(x, "x")
    lam = as_vector(lam, "lambda")
    if x.shape[0] != model.d or lam.shape[0] != model.n:
        raise ContractError(f"model is {model.n}x{model.d} but got x of dim {x.shape[0]} "
                            f"and lambda of dim {lam.shape[0]}")
    vx = matmul(model.v, x[:, None])
    return float(matmul(lam[None, :], vx)[0, 0])


def score_all(model: BilinearModel, x, labels) -> np.ndarray:
    """Score matrix ``(X V^T) Lambda^T`` of shape M x L.

    Entry (m, l) is bit-identical to ``score(model, x[m], labels[l])``.
    """
    x = as_matrix(x, "features")
    labels = as_matrix(labels, "labels")
    if x.shape[1] != model.d or labels.shape[1] != model.n:
        raise ContractError(f"model is {model.n}x{model.d} but features are {x.shape[0]}x{x.shape[1]} "
                            f"and labels are {labels.shape[0]}x{labels.shape[1]}")
    return matmul(matmul(x, model.v.T), labels.T)


def predict(model: BilinearModel, x, lam) -> int:
    return 1 if score(model, x, lam) > 0 else -1


def predict_all(model: BilinearModel, x, labels) -> np.ndarray:
    return sign(score_all(model, x, labels))
