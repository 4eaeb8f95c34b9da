"""Scorers producing p(response | context) for context-response pairs."""

from .baselines import (ConstantScorer, LabelOracleScorer, OverlapScorer,
                        TableScorer)
from .external import ExternalScorer
from .model import (ModelParameters, NeuralScorer, Prediction, ScorerConfig,
                    best_preset, init_parameters, load_checkpoint,
                    neural_forward, save_checkpoint, tiny_preset)
from .train import AdamW, TrainingHistory, gradient_check, train_scorer

__all__ = [
    "AdamW", "ConstantScorer", "ExternalScorer", "LabelOracleScorer",
    "ModelParameters", "NeuralScorer", "OverlapScorer", "Prediction",
    "ScorerConfig", "TableScorer", "TrainingHistory", "best_preset",
    "gradient_check", "init_parameters", "load_checkpoint", "neural_forward",
    "save_checkpoint", "tiny_preset", "train_scorer",
]
