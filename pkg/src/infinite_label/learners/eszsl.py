"""Closed-form two-sided ridge baseline (ESZSL).

Minimizes ``||Lam V X^T - Y^T||_F^2 + g_l ||V X^T||_F^2 + g_d ||Lam V||_F^2
+ g_l g_d ||V||_F^2``, whose unique stationary point is
``V = (Lam^T Lam + g_l I)^-1 Lam^T Y^T X (X^T X + g_d I)^-1``.
"""
from __future__ import annotations

import numpy as np

from ..bilinear import BilinearModel
from ..errors import ContractError
from ..numkit import frobenius_norm_sq, solve_spd
from .common import check_training_inputs


def eszsl_objective(model, x, labels, y, gamma_label: float = 0.1, gamma_data: float = 0.1) -> float:
    v = np.asarray(getattr(model, "v", model), dtype=np.float64)
    x, labels, y = check_training_inputs(x, labels, y)
    vxt = v @ x.T
    lam_v = labels @ v
    return (frobenius_norm_sq(labels @ vxt - y.T)
            + gamma_label * frobenius_norm_sq(vxt)
            + gamma_data * frobenius_norm_sq(lam_v)
            + gamma_label * gamma_data * frobenius_norm_sq(v))


def train_eszsl(x, labels, y, gamma_label: float = 0.1, gamma_data: float = 0.1) -> BilinearModel:
    if gamma_label < 0 or gamma_data < 0:
        raise ContractError("ESZSL regularizers must be >= 0")
    x, labels, y = check_training_inputs(x, labels, y)
    n, d = labels.shape[1], x.shape[1]
    label_gram = labels.T @ labels + gamma_label * np.eye(n)
    data_gram = x.T @ x + gamma_data * np.eye(d)
    cross = labels.T @ y.T @ x  # n x d
    left = solve_spd(label_gram, cross)
    return BilinearModel(solve_spd(data_gram, left.T).T)
