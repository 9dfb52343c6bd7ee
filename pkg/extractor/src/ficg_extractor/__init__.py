"""Feature and prosody-target extraction for dialogue corpora.

Turns a directory of transcribed, word-aligned audio into the JSON-lines
dataset consumed by the interaction-graph prosody model: per-word text and
speech features, per-utterance features, and z-normalized pitch/energy
targets.
"""

from .audio import read_wav, write_wav
from .corpus import (CorpusError, RawDialogue, RawUtterance, WordSpan,
                     load_corpus, load_dialogue)
from .features import (Backends, HashedUttTextBackend, HashedWordTextBackend,
                       MelFrameBackend, offline_backends, pool_word_frames)
from .fixture import make_fixture
from .pipeline import (ExtractionResult, extract_corpus, extract_dialogue,
                       featurize_utterance)
from .targets import prosody_raw, z_normalize
from .writer import DialogueOut, UtteranceOut, quantize, write_dataset

__all__ = [
    "Backends", "CorpusError", "DialogueOut", "ExtractionResult",
    "HashedUttTextBackend", "HashedWordTextBackend", "MelFrameBackend",
    "RawDialogue", "RawUtterance", "UtteranceOut", "WordSpan",
    "extract_corpus", "extract_dialogue", "featurize_utterance",
    "load_corpus", "load_dialogue", "make_fixture", "offline_backends",
    "pool_word_frames", "prosody_raw", "quantize", "read_wav",
    "write_dataset", "write_wav", "z_normalize",
]
