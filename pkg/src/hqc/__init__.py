"""Hierarchical quantum classifiers: tree/renormalization circuits on a dense simulator."""

from .gates import GateKind, MeasurementRotation, UnitaryBlock
from .sim import DensityMatrix, Statevector
from .topology import (
    ClassifierModel,
    build_mera,
    build_ttn,
    export_qasm,
    hybrid_init,
    predict_expectation,
    predict_label,
    predict_label_sampled,
)
from .gradients import GradientResult, cost_and_grad, finite_diff_grad
from .training import TrainConfig, TrainReport, adam_step, init_params, load_checkpoint, save_checkpoint, train

__all__ = [
    "ClassifierModel",
    "DensityMatrix",
    "GateKind",
    "GradientResult",
    "MeasurementRotation",
    "Statevector",
    "TrainConfig",
    "TrainReport",
    "UnitaryBlock",
    "adam_step",
    "build_mera",
    "build_ttn",
    "cost_and_grad",
    "export_qasm",
    "finite_diff_grad",
    "hybrid_init",
    "init_params",
    "load_checkpoint",
    "predict_expectation",
    "predict_label",
    "predict_label_sampled",
    "save_checkpoint",
    "train",
]

__version__ = "0.1.0"
