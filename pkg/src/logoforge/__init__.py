"""logoforge: clustered-GAN toolkit for logo synthesis and latent-space design."""

from .models import ModelConfig
from .snapshot import ModelSnapshot
from .training import TrainingConfig, train_run

__version__ = "0.1.0"

__all__ = ["ModelConfig", "ModelSnapshot", "TrainingConfig", "train_run", "__version__"]
