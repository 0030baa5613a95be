"""Training procedures for the bilinear model and the zero-shot baselines."""
from .common import TrainTrace
from .conse import ConseConfig, ConseModel, conse_score, conse_score_all, embed, train_conse
from .eszsl import eszsl_objective, train_eszsl
from .hinge import HingeConfig, hinge_objective, hinge_subgradient, train_hinge
from .ranknet import RankNetConfig, logistic, ranknet_gradient, ranknet_objective, softplus, train_ranknet

__all__ = [
    "TrainTrace",
    "ConseConfig", "ConseModel", "conse_score", "conse_score_all", "embed", "train_conse",
    "eszsl_objective", "train_eszsl",
    "HingeConfig", "hinge_objective", "hinge_subgradient", "train_hinge",
    "RankNetConfig", "logistic", "ranknet_gradient", "ranknet_objective", "softplus", "train_ranknet",
]
