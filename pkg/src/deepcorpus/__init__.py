"""Entity-aware denoising data pipeline for MT pre-training and finetuning."""
__version__ = "0.1.0"

from .kb import EntityRecord, KBSnapshot, load_kb, lookup, surface
from .kernels import BACKEND
from .linker import Gazetteer, LinkedSpan, build_gazetteer, link
from .noise import NoisedExample, NoiseParams, f_deep, g_dae
from .subword import Segment, SubwordVocab, decode, encode, pack_segments

__all__ = [
    "BACKEND",
    "EntityRecord",
    "Gazetteer",
    "KBSnapshot",
    "LinkedSpan",
    "NoiseParams",
    "NoisedExample",
    "Segment",
    "SubwordVocab",
    "build_gazetteer",
    "decode",
    "encode",
    "f_deep",
    "g_dae",
    "link",
    "load_kb",
    "lookup",
    "pack_segments",
    "surface",
]
