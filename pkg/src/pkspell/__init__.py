"""Joint pitch spelling and key signature estimation from MIDI note sequences."""

from .corpus import LabeledPiece, Note, Piece
from .model import Model, ModelConfig, load_weights, predict, save_weights
from .tonal import KeySignature, TonalPitchClass

__version__ = "0.1.0"

__all__ = [
    "KeySignature",
    "LabeledPiece",
    "Model",
    "ModelConfig",
    "Note",
    "Piece",
    "TonalPitchClass",
    "load_weights",
    "predict",
    "save_weights",
]
