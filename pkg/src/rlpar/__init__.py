"""Multi-label attribute recognition as a sequential decision process.

One deep Q-learning agent per attribute group walks through the group's
attributes for each sample and answers present/absent at every step.
"""

from .dataio import Dataset, Sample, SynthSpec, generate_synthetic, load_dataset, save_dataset
from .errors import RlparError, ValidationError
from .metrics import evaluate, example_metrics, mean_accuracy
from .schema import AttributeSchema, GroupConfig, compute_group_stats, load_group_config, rho_for
from .trainer import TrainConfig, TrainedModel, TrainingReport, predict_image, train

__all__ = [
    "AttributeSchema", "Dataset", "GroupConfig", "RlparError", "Sample", "SynthSpec", "TrainConfig",
    "TrainedModel", "TrainingReport", "ValidationError", "compute_group_stats", "evaluate",
    "example_metrics", "generate_synthetic", "load_dataset", "load_group_config", "mean_accuracy",
    "predict_image", "rho_for", "save_dataset", "train",
]

__version__ = "0.1.0"
