"""PAC-Bayesian learning and domain adaptation of linear classifiers."""

from .data_io import LabeledSample, ToySpec, UnlabeledSample, gen_toy, load_csv, load_svmlight
from .estimators import DualPosterior, LinearPosterior
from .kernels import Kernel, gram, joint_gram
from .training import OptimizerSettings, TrainedModel, load_model, predict, save_model, train

__version__ = "0.1.0"

__all__ = [
    "DualPosterior", "Kernel", "LabeledSample", "LinearPosterior", "OptimizerSettings",
    "ToySpec", "TrainedModel", "UnlabeledSample", "gen_toy", "gram", "joint_gram",
    "load_csv", "load_model", "load_svmlight", "predict", "save_model", "train",
]
