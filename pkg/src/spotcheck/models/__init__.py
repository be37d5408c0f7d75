"""Models whose blindspots we search for: a small trained CNN and a
ground-truth oracle, plus label induction and the shared outputs format."""

from .classifier import CnnModel, TrainConfig, train_classifier
from .labels import (
    InductionReport,
    LabeledSplit,
    VerifyThresholds,
    induce_labels,
    membership_matrix,
    verify_induction,
)
from .nn import ConvNetConfig, SmallConvNet
from .oracle import OracleConfig, OracleModel
from .outputs import ModelOutputs, read_outputs_csv, write_outputs_csv

__all__ = [
    "CnnModel",
    "ConvNetConfig",
    "InductionReport",
    "LabeledSplit",
    "ModelOutputs",
    "OracleConfig",
    "OracleModel",
    "SmallConvNet",
    "TrainConfig",
    "VerifyThresholds",
    "induce_labels",
    "membership_matrix",
    "read_outputs_csv",
    "train_classifier",
    "verify_induction",
    "write_outputs_csv",
]
