"""CNN patch classifier and trainer for seam-carving forensics corpora."""

from .model import PatchClassifier
from .train import TrainConfig, train

__all__ = ["PatchClassifier", "TrainConfig", "train"]
__version__ = "0.1.0"
