"""Feature backends and word-level pooling.

The default backends are self-contained and deterministic: text features are
unit vectors derived from hashes of the token or sentence plus a mixed-in
dialogue-context vector, speech frame features are log mel-band powers. They
stand in for pretrained encoders wherever reproducibility matters more than
linguistic quality (tests, fixtures, offline runs); the pretrained
equivalents live in `pretrained.py` and load lazily.

Word speech features pool the frame features whose centers fall inside the
word's alignment interval; an interval too short to contain a frame center
borrows the frame nearest to its midpoint.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .audio import frame_centers, frame_sizes, mel_frame_features
from .corpus import WordSpan

HASHED_WORD_TEXT_DIM = 32
HASHED_UTT_TEXT_DIM = 48
MEL_SPEECH_DIM = 24
_CONTEXT_WEIGHT = 0.25


def hashed_unit_vector(namespace: str, key: str, dim: int) -> np.ndarray:
    """Deterministic unit vector; independent draws per (namespace, key)."""
    digest = hashlib.blake2b(f"{namespace}\x1f{key}".encode("utf-8"),
                             digest_size=32).digest()
    rng = np.random.default_rng(np.frombuffer(digest, dtype=np.uint64))
    vec = rng.standard_normal(dim)
    return vec / (np.linalg.norm(vec) + 1e-12)


def _blend(parts: list[np.ndarray]) -> np.ndarray:
    acc = np.sum(parts, axis=0)
    return acc / (np.linalg.norm(acc) + 1e-12)


class HashedWordTextBackend:
    """Word vectors from token hashes with the dialogue context mixed in."""

    dim = HASHED_WORD_TEXT_DIM

    def extract(self, words: tuple[str, ...], context: str) -> np.ndarray:
        ctx = hashed_unit_vector("word-text-ctx", context, self.dim)
        rows = [_blend([hashed_unit_vector("word-text", w, self.dim),
                        _CONTEXT_WEIGHT * ctx]) for w in words]
        return np.stack(rows)


class HashedUttTextBackend:
    """Sentence vectors: token-mean plus sentence and context hashes."""

    dim = HASHED_UTT_TEXT_DIM

    def extract(self, transcript: str, context: str) -> np.ndarray:
        tokens = transcript.split()
        token_mean = np.mean([hashed_unit_vector("utt-text-token", t, self.dim)
                              for t in tokens], axis=0)
        return _blend([token_mean,
                       hashed_unit_vector("utt-text-sent", transcript, self.dim),
                       _CONTEXT_WEIGHT
                       * hashed_unit_vector("utt-text-ctx", context, self.dim)])


class MelFrameBackend:
    """Frame-level speech features: log mel-band power."""

    dim = MEL_SPEECH_DIM

    def frames(self, signal: np.ndarray, sample_rate: int) -> np.ndarray:
        return mel_frame_features(signal, sample_rate, n_mels=self.dim)

    def centers(self, n_frames: int, sample_rate: int) -> np.ndarray:
        frame_len, hop = frame_sizes(sample_rate)
        return frame_centers(n_frames, frame_len, hop, sample_rate)


@dataclass(frozen=True)
class Backends:
    """Any objects with the extract / frames+centers / dim interface fit."""
    word_text: object
    utt_text: object
    frame_speech: object

    def dims(self) -> dict:
        return {"word_text": self.word_text.dim,
                "word_speech": self.frame_speech.dim,
                "utt_text": self.utt_text.dim,
                "utt_speech": self.frame_speech.dim}


def offline_backends() -> Backends:
    return Backends(word_text=HashedWordTextBackend(),
                    utt_text=HashedUttTextBackend(),
                    frame_speech=MelFrameBackend())


def pool_word_frames(frame_feats: np.ndarray, centers: np.ndarray,
                     spans: tuple[WordSpan, ...]) -> np.ndarray:
    """Mean frame feature per word interval [start, end).

    Interval membership is decided by frame centers. An interval containing
    no center borrows the single frame nearest to its midpoint.
    """
    rows = []
    for span in spans:
        inside = np.flatnonzero((centers >= span.start) & (centers < span.end))
        if inside.size == 0:
            midpoint = (span.start + span.end) / 2.0
            inside = np.array([int(np.argmin(np.abs(centers - midpoint)))])
        rows.append(frame_feats[inside].mean(axis=0))
    return np.stack(rows)
