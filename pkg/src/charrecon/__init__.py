"""Character-level word encoders pre-trained to reconstruct teacher embeddings."""

from .errors import (
    CorruptCheckpointError,
    DegenerateInputError,
    DimensionError,
    ParseError,
    SingularMatrixError,
    TrainingDivergedError,
)
from .metrics import DistanceMetric, distance, distance_grad
from .encoder import CharEncoder, CharVocab, build_char_vocab, encode_vocab, encode_word
from .embeddings import EmbeddingTable
from .reconstruct import LossTrace, TrainConfig, reconstruction_loss, train_reconstruction

__version__ = "0.1.0"

__all__ = [
    "CharEncoder",
    "CharVocab",
    "CorruptCheckpointError",
    "DegenerateInputError",
    "DimensionError",
    "DistanceMetric",
    "EmbeddingTable",
    "LossTrace",
    "ParseError",
    "SingularMatrixError",
    "TrainConfig",
    "TrainingDivergedError",
    "build_char_vocab",
    "distance",
    "distance_grad",
    "encode_vocab",
    "encode_word",
    "reconstruction_loss",
    "train_reconstruction",
]
