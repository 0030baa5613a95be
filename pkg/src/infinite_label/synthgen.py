"""Synthetic infinite-label worlds.

Data come from a Gaussian mixture, label codes from a single Gaussian drawn
independently of the data, and annotations from a ground-truth bilinear model
whose signs are flipped independently at rate ``flip_prob``. Training sets are
drawn in three steps: M data points, then L labels, then the full M x L grid of
annotations.

Every random stream gets its own generator seeded from ``(seed, stream name)``
so that, e.g., changing the number of unseen labels leaves the data untouched.
"""
from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .bilinear import BilinearModel, score_all, sign
from .errors import ContractError
from .numkit import as_matrix, as_vector, psd_factor

PAPER_LABEL_MEAN = (2.0, 3.0)
PAPER_LABEL_COV = ((1.0, 1.5), (1.5, 3.0))


def derive_seed(seed: int, stream: str) -> int:
    digest = hashlib.sha256(f"{int(seed)}/{stream}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(seed: int, stream: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, stream))


@dataclass(frozen=True)
class GmmParams:
    weights: np.ndarray  # (k,)
    means: np.ndarray  # (k, d)
    factors: np.ndarray  # (k, d, d); covariance_k = factors[k] @ factors[k].T

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size < 1 or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ContractError("mixture weights must be a non-negative vector summing to 1")
        means = np.asarray(self.means, dtype=np.float64)
        factors = np.asarray(self.factors, dtype=np.float64)
        k, d = means.shape
        if w.size != k or factors.shape != (k, d, d):
            raise ContractError(f"inconsistent mixture shapes: weights {w.shape}, means {means.shape}, "
                                f"factors {factors.shape}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "factors", factors)

    @property
    def k(self) -> int:
        return self.weights.size

    @property
    def d(self) -> int:
        return self.means.shape[1]

    def mean(self) -> np.ndarray:
        return self.weights @ self.means


@dataclass(frozen=True)
class LabelGaussian:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = as_vector(self.mean, "label mean")
        cov = as_matrix(self.cov, "label covariance")
        if cov.shape != (mean.size, mean.size):
            raise ContractError(f"label covariance {cov.shape} does not match mean of dim {mean.size}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def n(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class SyntheticWorld:
    gmm: GmmParams
    label_dist: LabelGaussian
    v_star: BilinearModel
    flip_prob: float
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ContractError(f"flip_prob must lie in [0, 1], got {self.flip_prob}")
        if self.v_star.d != self.gmm.d or self.v_star.n != self.label_dist.n:
            raise ContractError(f"V* is {self.v_star.n}x{self.v_star.d} but data dim is {self.gmm.d} "
                                f"and label dim is {self.label_dist.n}")

    def with_flip_prob(self, p: float) -> "SyntheticWorld":
        return SyntheticWorld(self.gmm, self.label_dist, self.v_star, p, self.seed)


@dataclass(frozen=True)
class AnnotationMatrix:
    """M x L matrix over {-1, +1}, optionally paired with its noiseless version."""

    values: np.ndarray
    noiseless: np.ndarray | None = None

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.ndim != 2:
            raise ContractError(f"annotations must be 2-D, got shape {vals.shape}")
        if not np.all((vals == 1) | (vals == -1)):
            raise ContractError("annotations must be -1 or +1")
        object.__setattr__(self, "values", vals.astype(np.int8))
        if self.noiseless is not None:
            clean = np.asarray(self.noiseless)
            if clean.shape != vals.shape:
                raise ContractError(f"noiseless annotations {clean.shape} differ from {vals.shape}")
            if not np.all((clean == 1) | (clean == -1)):
                raise ContractError("noiseless annotations must be -1 or +1")
            object.__setattr__(self, "noiseless", clean.astype(np.int8))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def columns(self, idx) -> "AnnotationMatrix":
        clean = None if self.noiseless is None else self.noiseless[:, idx]
        return AnnotationMatrix(self.values[:, idx], clean)

    def rows(self, idx) -> "AnnotationMatrix":
        clean = None if self.noiseless is None else self.noiseless[idx]
        return AnnotationMatrix(self.values[idx], clean)


@dataclass
class SynthConfig:
    d: int = 3
    n: int = 2
    k: int = 5
    dirichlet_alpha: float = 3.0
    m_train: int = 500
    m_test: int = 1000
    l_seen: int = 10
    l_unseen: int = 2990
    flip_prob: float = 0.1
    seed: int = 0
    # None -> the published label Gaussian when n == 2, else N(0, I_n)
    label_mean: list[float] | None = None
    label_cov: list[list[float]] | None = None

    def __post_init__(self):
        for name in ("d", "n", "k", "m_train", "m_test", "l_seen"):
            if int(getattr(self, name)) < 1:
                raise ContractError(f"{name} must be >= 1")
        if self.l_unseen < 0:
            raise ContractError("l_unseen must be >= 0")
        if self.dirichlet_alpha <= 0:
            raise ContractError("dirichlet_alpha must be > 0")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ContractError("flip_prob must lie in [0, 1]")

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ContractError(f"unknown synth config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def label_distribution(self) -> LabelGaussian:
        if self.label_mean is not None or self.label_cov is not None:
            mean = self.label_mean if self.label_mean is not None else np.zeros(self.n)
            cov = self.label_cov if self.label_cov is not None else np.eye(self.n)
            return LabelGaussian(np.asarray(mean, float), np.asarray(cov, float))
        if self.n == 2:
            return LabelGaussian(np.array(PAPER_LABEL_MEAN), np.array(PAPER_LABEL_COV))
        return LabelGaussian(np.zeros(self.n), np.eye(self.n))


def dirichlet(alpha: float, k: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Symmetric Dirichlet draws as normalized Gamma(alpha) variates."""
    g = rng.gamma(alpha, size=(k,) if size is None else (size, k))
    return g / g.sum(axis=-1, keepdims=True)


def sample_gmm_params(d: int, k: int, dirichlet_alpha: float, seed: int) -> GmmParams:
    """Mixture weights ~ Dir(alpha, ..., alpha); means and factor entries ~ N(0, 1)."""
    if d < 1 or k < 1 or dirichlet_alpha <= 0:
        raise ContractError("need d >= 1, k >= 1 and dirichlet_alpha > 0")
    weights = dirichlet(dirichlet_alpha, k, rng_for(seed, "gmm.weights"))
    means = rng_for(seed, "gmm.means").standard_normal((k, d))
    factors = rng_for(seed, "gmm.factors").standard_normal((k, d, d))
    return GmmParams(weights, means, factors)


def sample_data(gmm: GmmParams, count: int, seed: int) -> np.ndarray:
    if count < 1:
        raise ContractError("count must be >= 1")
    rng = np.random.default_rng(derive_seed(seed, "data"))
    comp = rng.choice(gmm.k, size=count, p=gmm.weights)
    z = rng.standard_normal((count, gmm.d))
    return gmm.means[comp] + np.einsum("mij,mj->mi", gmm.factors[comp], z)


def sample_labels(dist: LabelGaussian, count: int, seed: int) -> np.ndarray:
    if count < 1:
        raise ContractError("count must be >= 1")
    factor = psd_factor(dist.cov)
    z = np.random.default_rng(derive_seed(seed, "labels")).standard_normal((count, dist.n))
    return dist.mean + z @ factor.T


def annotate(world: SyntheticWorld, x, labels, seed: int) -> AnnotationMatrix:
    """Noiseless signs under V*, then independent sign flips at ``world.flip_prob``."""
    clean = sign(score_all(world.v_star, x, labels))
    flips = np.random.default_rng(derive_seed(seed, "flips")).random(clean.shape) < world.flip_prob
    return AnnotationMatrix(np.where(flips, -clean, clean), clean)


def make_world(config: SynthConfig, seed: int) -> SyntheticWorld:
    gmm = sample_gmm_params(config.d, config.k, config.dirichlet_alpha, derive_seed(seed, "gmm"))
    v_star = BilinearModel(rng_for(seed, "v_star").standard_normal((config.n, config.d)))
    return SyntheticWorld(gmm, config.label_distribution(), v_star, float(config.flip_prob), int(seed))


def draw_sample(world: SyntheticWorld, m: int, l: int, seed: int):
    """Three-step draw: M points, then L labels, then the M x L annotations."""
    x = sample_data(world.gmm, m, derive_seed(seed, "sample.data"))
    labels = sample_labels(world.label_dist, l, derive_seed(seed, "sample.labels"))
    y = annotate(world, x, labels, derive_seed(seed, "sample.flips"))
    return x, labels, y


@dataclass
class WorldDraw:
    """A generated world plus its train/test split.

    ``test_y`` covers all labels, seen columns first then unseen.
    """

    world: SyntheticWorld
    train_x: np.ndarray
    train_y: AnnotationMatrix
    test_x: np.ndarray
    test_y: AnnotationMatrix
    seen: np.ndarray
    unseen: np.ndarray
    config: SynthConfig = field(default_factory=SynthConfig)

    @property
    def all_labels(self) -> np.ndarray:
        return np.vstack([self.seen, self.unseen])

    @property
    def test_y_seen(self) -> AnnotationMatrix:
        return self.test_y.columns(slice(0, self.seen.shape[0]))

    @property
    def test_y_unseen(self) -> AnnotationMatrix:
        return self.test_y.columns(slice(self.seen.shape[0], None))


def generate_world(config: SynthConfig, seed: int | None = None) -> WorldDraw:
    seed = config.seed if seed is None else seed
    world = make_world(config, seed)
    train_x = sample_data(world.gmm, config.m_train, derive_seed(seed, "train.data"))
    test_x = sample_data(world.gmm, config.m_test, derive_seed(seed, "test.data"))
    seen = sample_labels(world.label_dist, config.l_seen, derive_seed(seed, "labels.seen"))
    if config.l_unseen > 0:
        unseen = sample_labels(world.label_dist, config.l_unseen, derive_seed(seed, "labels.unseen"))
    else:
        unseen = np.zeros((0, config.n))
    train_y = annotate(world, train_x, seen, derive_seed(seed, "train.flips"))
    test_y = annotate(world, test_x, np.vstack([seen, unseen]), derive_seed(seed, "test.flips"))
    return WorldDraw(world, train_x, train_y, test_x, test_y, seen, unseen, config)
