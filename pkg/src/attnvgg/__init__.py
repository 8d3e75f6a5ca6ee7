"""Attention-gated VGG binary image classifier, built on numpy with
hand-derived backpropagation, plus data pipeline, metrics, and CLI."""

from .attention import AttentionGateParams, GateOutput, attention_backward, attention_forward
from .config import ExperimentConfig
from .data import Sample, DatasetSplit, stratified_split, synth_dataset
from .estimator import AttentionVggClassifier
from .layers import Parameter, gradient_check
from .losses import LossConfig, batch_loss, loss_ce, loss_ensemble, loss_logcosh
from .metrics import ConfusionMatrix, MetricsReport, compute_metrics, confusion_from_predictions
from .model import ArchitectureSpec, Model, build, forward, backward, load_weights, save_weights, \
    vgg16_spec, vgg_tiny_spec
from .optim import OptimizerConfig, lr_at, rmsprop_step
from .train import evaluate, run_training
from .verification import run_all_gradient_checks

__version__ = "0.1.0"

__all__ = [
    "AttentionGateParams",
    "AttentionVggClassifier",
    "ArchitectureSpec",
    "ConfusionMatrix",
    "DatasetSplit",
    "ExperimentConfig",
    "GateOutput",
    "LossConfig",
    "MetricsReport",
    "Model",
    "OptimizerConfig",
    "Parameter",
    "Sample",
    "attention_backward",
    "attention_forward",
    "backward",
    "batch_loss",
    "build",
    "compute_metrics",
    "confusion_from_predictions",
    "evaluate",
    "forward",
    "gradient_check",
    "load_weights",
    "loss_ce",
    "loss_ensemble",
    "loss_logcosh",
    "lr_at",
    "rmsprop_step",
    "run_all_gradient_checks",
    "run_training",
    "save_weights",
    "stratified_split",
    "synth_dataset",
    "vgg16_spec",
    "vgg_tiny_spec",
]
