"""Frame-wise gesture recognizer built on numpy with hand-written backpropagation."""

from .model import (
    GraphConfig, ModelConfig, ModelState, PROFILES, TemporalEncoderConfig, init_model, load_checkpoint,
    make_config, predict_frames, relational_graph_step, save_checkpoint, temporal_encode, weighted_cross_entropy,
)
from .training import TRAIN_PROFILES, TrainConfig, fit_model, gradient_check, prepare_fold, train, train_config

__all__ = [
    "GraphConfig", "ModelConfig", "ModelState", "PROFILES", "TemporalEncoderConfig", "TrainConfig",
    "TRAIN_PROFILES", "fit_model", "gradient_check", "init_model", "load_checkpoint", "make_config", "predict_frames",
    "prepare_fold", "relational_graph_step", "save_checkpoint", "temporal_encode", "train", "train_config",
    "weighted_cross_entropy",
]
