"""LAC-GAN: an adversarially trained classifier over learned latent features.

An Extractor maps raw inputs to a 50-dim bottleneck; a conditional Generator
produces fake latents; a Discriminator judges real vs fake and predicts the
class.  Everything is float64 numpy with hand-written backpropagation.
"""

__version__ = "0.1.0"

from .data import (
    LabelCategory,
    RawSample,
    embed_samples,
    generate_separable,
    generate_synthetic,
    load_jsonl,
    save_jsonl,
    split_dataset,
)
from .errors import (
    CheckpointError,
    ConfigError,
    DataError,
    DimensionError,
    LacGanError,
    NumericalError,
    StateError,
    ValidationError,
)
from .model import AcGanBaseline, ExtractorOnly, LacGanModel, build_model, sample_latent
from .train import TrainConfig, Trainer, compare_methods, evaluate, fit, prepare_data

__all__ = [
    "AcGanBaseline",
    "CheckpointError",
    "ConfigError",
    "DataError",
    "DimensionError",
    "ExtractorOnly",
    "LabelCategory",
    "LacGanError",
    "LacGanModel",
    "NumericalError",
    "RawSample",
    "StateError",
    "TrainConfig",
    "Trainer",
    "ValidationError",
    "__version__",
    "build_model",
    "compare_methods",
    "embed_samples",
    "evaluate",
    "fit",
    "generate_separable",
    "generate_synthetic",
    "load_jsonl",
    "prepare_data",
    "sample_latent",
    "save_jsonl",
    "split_dataset",
]
