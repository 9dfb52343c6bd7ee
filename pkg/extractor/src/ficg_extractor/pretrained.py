"""Pretrained feature backends (optional).

These mirror the offline backends' interfaces but run published encoders:
a dialogue-tuned BERT for word-level text features (sub-token vectors
mean-pooled per word), a sentence encoder for utterance-level text, and a
self-supervised speech encoder for frame-level features with the hidden
layer configurable (default: the final layer).

torch/transformers/sentence-transformers are imported lazily so the rest of
the package works without them; instantiation fails with a pointer to the
`pretrained` extra if they (or the model weights) are unavailable. Outputs
are deterministic for fixed model versions: models run in eval mode under
no_grad.
"""

from __future__ import annotations

import numpy as np

from .corpus import WordSpan

WORD_TEXT_MODEL = "TODBERT/TOD-BERT-JNT-V1"
UTT_TEXT_MODEL = "sentence-transformers/all-MiniLM-L6-v2"
SPEECH_MODEL = "facebook/wav2vec2-base-960h"
_INSTALL_HINT = ("pretrained backends need the 'pretrained' extra: "
                 "pip install ficg-extractor[pretrained]")


def _import_torch():
    try:
        import torch
    except ImportError as exc:
        raise RuntimeError(_INSTALL_HINT) from exc
    return torch


class PretrainedWordTextBackend:
    """Per-word mean of sub-token hidden states from a dialogue BERT."""

    def __init__(self, model_name: str = WORD_TEXT_MODEL):
        torch = _import_torch()
        try:
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise RuntimeError(_INSTALL_HINT) from exc
        self._torch = torch
        self._tokenizer = AutoTokenizer.from_pretrained(model_name, use_fast=True)
        self._model = AutoModel.from_pretrained(model_name).eval()
        self.dim = int(self._model.config.hidden_size)

    def extract(self, words: tuple[str, ...], context: str) -> np.ndarray:
        torch = self._torch
        encoded = self._tokenizer(list(words), is_split_into_words=True,
                                  return_tensors="pt", truncation=True)
        with torch.no_grad():
            hidden = self._model(**encoded).last_hidden_state[0]
        word_ids = encoded.word_ids(0)
        rows = np.zeros((len(words), self.dim))
        counts = np.zeros(len(words))
        for position, word_id in enumerate(word_ids):
            if word_id is None:
                continue
            rows[word_id] += hidden[position].numpy()
            counts[word_id] += 1.0
        if np.any(counts == 0):
            missing = [words[i] for i in np.flatnonzero(counts == 0)]
            raise ValueError(f"tokenizer produced no sub-tokens for {missing}")
        return rows / counts[:, None]


class PretrainedUttTextBackend:
    """Sentence embedding of the transcript."""

    def __init__(self, model_name: str = UTT_TEXT_MODEL):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise RuntimeError(_INSTALL_HINT) from exc
        self._model = SentenceTransformer(model_name)
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def extract(self, transcript: str, context: str) -> np.ndarray:
        return np.asarray(self._model.encode([transcript],
                                             convert_to_numpy=True)[0],
                          dtype=np.float64)


class PretrainedFrameBackend:
    """Frame features from a speech encoder's chosen hidden layer."""

    def __init__(self, model_name: str = SPEECH_MODEL, layer: int | None = None):
        torch = _import_torch()
        try:
            from transformers import AutoFeatureExtractor, AutoModel
        except ImportError as exc:
            raise RuntimeError(_INSTALL_HINT) from exc
        self._torch = torch
        self._processor = AutoFeatureExtractor.from_pretrained(model_name)
        self._model = AutoModel.from_pretrained(model_name,
                                                output_hidden_states=True).eval()
        self._layer = layer
        self.dim = int(self._model.config.hidden_size)

    def frames(self, signal: np.ndarray, sample_rate: int) -> np.ndarray:
        torch = self._torch
        inputs = self._processor(signal, sampling_rate=sample_rate,
                                 return_tensors="pt")
        with torch.no_grad():
            states = self._model(**inputs).hidden_states
        layer = -1 if self._layer is None else self._layer
        return states[layer][0].numpy().astype(np.float64)

    def centers(self, n_frames: int, sample_rate: int) -> np.ndarray:
        # the encoder's stride is 20 ms with a ~25 ms receptive field
        return 0.02 * np.arange(n_frames) + 0.0125


def pretrained_backends(layer: int | None = None):
    from .features import Backends
    return Backends(word_text=PretrainedWordTextBackend(),
                    utt_text=PretrainedUttTextBackend(),
                    frame_speech=PretrainedFrameBackend(layer=layer))
