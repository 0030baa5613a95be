"""Evaluation measures for multi-label tagging.

Rankings sort labels by descending score and break ties by ascending label
index. Ranking metrics are averaged over images that have at least one
relevant label; images without any are skipped.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ContractError


def _as_pm1(a, name: str) -> np.ndarray:
    arr = np.asarray(getattr(a, "values", a))
    if arr.ndim != 2:
        raise ContractError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def hamming_loss(pred, truth) -> float:
    """Mean over rows of the fraction of mismatched label assignments."""
    pred = _as_pm1(pred, "pred")
    truth = _as_pm1(truth, "truth")
    if pred.shape != truth.shape:
        raise ContractError(f"shape mismatch: pred {pred.shape} vs truth {truth.shape}")
    mismatches = np.count_nonzero(pred != truth, axis=1)
    return float(np.mean(mismatches / truth.shape[1]))


def ranking(scores) -> np.ndarray:
    """Label indices from best to worst; stable sort keeps lower indices first on ties."""
    return np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")


def average_precision(scores, truth_row) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    truth_row = np.asarray(truth_row)
    if scores.shape != truth_row.shape or scores.ndim != 1:
        raise ContractError(f"scores {scores.shape} and truth {truth_row.shape} must be matching vectors")
    relevant = truth_row[ranking(scores)] == 1
    n_rel = int(np.count_nonzero(relevant))
    if n_rel == 0:
        raise ContractError("average_precision needs at least one relevant label")
    ranks = np.flatnonzero(relevant) + 1
    hits = np.arange(1, n_rel + 1)
    return float(np.sum(hits / ranks) / n_rel)


def _score_truth(scores, truth):
    scores = np.asarray(scores, dtype=np.float64)
    truth = _as_pm1(truth, "truth")
    if scores.shape != truth.shape:
        raise ContractError(f"shape mismatch: scores {scores.shape} vs truth {truth.shape}")
    return scores, truth


def per_image_ap(scores, truth) -> np.ndarray:
    """AP of every image with K_m >= 1, in image order."""
    scores, truth = _score_truth(scores, truth)
    keep = np.any(truth == 1, axis=1)
    return np.array([average_precision(scores[m], truth[m]) for m in np.flatnonzero(keep)])


def miap(scores, truth) -> float:
    aps = per_image_ap(scores, truth)
    if aps.size == 0:
        raise ContractError("no image has a relevant label; MiAP is undefined")
    return float(np.mean(aps))


def topk_prf(scores, truth, k: int = 3) -> tuple[float, float, float]:
    """Top-k precision, recall and F1, with F1 taken from the averaged P and R."""
    scores, truth = _score_truth(scores, truth)
    n_labels = scores.shape[1]
    if not 1 <= k <= n_labels:
        raise ContractError(f"k must be in [1, {n_labels}], got {k}")
    relevant = truth == 1
    n_rel = relevant.sum(axis=1)
    keep = n_rel > 0
    if not np.any(keep):
        raise ContractError("no image has a relevant label; top-k metrics are undefined")
    order = np.argsort(-scores[keep], axis=1, kind="stable")[:, :k]
    hits = np.take_along_axis(relevant[keep], order, axis=1).sum(axis=1)
    p = float(np.mean(hits / k))
    r = float(np.mean(hits / n_rel[keep]))
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


@dataclass
class MetricReport:
    miap: float
    precision_at_k: float
    recall_at_k: float
    f1_at_k: float
    hamming: float
    k: int

    def to_dict(self) -> dict:
        return asdict(self)


def report(scores, truth, k: int = 3) -> MetricReport:
    """All measures at once; Hamming uses the sign of the scores (0 -> -1)."""
    scores, truth = _score_truth(scores, truth)
    p, r, f1 = topk_prf(scores, truth, k)
    pred = np.where(scores > 0, 1, -1)
    return MetricReport(miap(scores, truth), p, r, f1, hamming_loss(pred, truth), k)


@dataclass(frozen=True)
class BinSpec:
    bin_size: int = 500
    include_seen_group: bool = True

    def __post_init__(self):
        if self.bin_size < 1:
            raise ContractError("bin_size must be >= 1")


def min_distances(seen, unseen) -> np.ndarray:
    """Distance from each unseen label to its nearest seen label."""
    seen = np.asarray(seen, dtype=np.float64)
    unseen = np.asarray(unseen, dtype=np.float64)
    if unseen.shape[0] == 0:
        return np.zeros(0)
    diff = unseen[:, None, :] - seen[None, :, :]
    return np.sqrt(np.min(np.sum(diff * diff, axis=2), axis=1))


@dataclass
class LabelGroup:
    kind: str  # "seen" or "unseen"
    indices: np.ndarray  # column indices into [seen; unseen]
    mean_distance: float


def distance_bins(seen, unseen, spec: BinSpec = BinSpec()) -> list[LabelGroup]:
    """Group labels by difficulty.

    Indices refer to the stacked label matrix ``[seen; unseen]``. Unseen labels
    are sorted by ascending distance to the seen set and cut into consecutive
    bins of ``spec.bin_size``; the last bin keeps the remainder.
    """
    n_seen = np.asarray(seen).shape[0]
    dist = min_distances(seen, unseen)
    order = np.lexsort((np.arange(dist.size), dist))
    groups = []
    if spec.include_seen_group:
        groups.append(LabelGroup("seen", np.arange(n_seen), 0.0))
    for start in range(0, order.size, spec.bin_size):
        chunk = order[start:start + spec.bin_size]
        groups.append(LabelGroup("unseen", chunk + n_seen, float(np.mean(dist[chunk]))))
    return groups
