"""Dataset file writer.

Emits the dialogue dataset format consumed by the prosody model trainer:
a JSON-lines file whose first line is a header

    {"format":"ficg-dialogue","version":1,"dims":{...},"n_speakers":K}

followed by one dialogue object per line. Floats are stored at 9
significant digits so a write/read/write cycle is byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FORMAT_TAG = "ficg-dialogue"
FORMAT_VERSION = 1


def quantize(x: float) -> float:
    """Round to 9 significant decimal digits, the storage precision."""
    return float(f"{float(x):.9g}")


@dataclass(frozen=True)
class UtteranceOut:
    """One utterance, fully featurized, ready for serialization."""
    speaker_id: int
    words: tuple[str, ...]
    word_text_feats: np.ndarray   # (n_words, d_wt)
    word_speech_feats: np.ndarray  # (n_words, d_ws)
    utt_text_feat: np.ndarray     # (d_ut,)
    utt_speech_feat: np.ndarray   # (d_us,)
    pitch_target: float
    energy_target: float


@dataclass(frozen=True)
class DialogueOut:
    dialogue_id: str
    utterances: tuple[UtteranceOut, ...]


def _utt_obj(utt: UtteranceOut) -> dict:
    return {
        "speaker_id": int(utt.speaker_id),
        "words": list(utt.words),
        "word_text_feats": [[quantize(v) for v in row] for row in np.asarray(utt.word_text_feats)],
        "word_speech_feats": [[quantize(v) for v in row] for row in np.asarray(utt.word_speech_feats)],
        "utt_text_feat": [quantize(v) for v in np.asarray(utt.utt_text_feat)],
        "utt_speech_feat": [quantize(v) for v in np.asarray(utt.utt_speech_feat)],
        "pitch_target": quantize(utt.pitch_target),
        "energy_target": quantize(utt.energy_target),
    }


def write_dataset(dialogues: list[DialogueOut], dims: dict[str, int],
                  n_speakers: int, path: str | Path) -> None:
    """Write header plus one line per dialogue."""
    for key in ("word_text", "word_speech", "utt_text", "utt_speech"):
        if key not in dims:
            raise ValueError(f"dims missing entry {key!r}")
    header = {"format": FORMAT_TAG, "version": FORMAT_VERSION,
              "dims": {k: int(dims[k]) for k in
                       ("word_text", "word_speech", "utt_text", "utt_speech")},
              "n_speakers": int(n_speakers)}
    lines = [json.dumps(header, separators=(",", ":"), allow_nan=False)]
    for dlg in dialogues:
        obj = {"dialogue_id": dlg.dialogue_id,
               "utterances": [_utt_obj(u) for u in dlg.utterances]}
        lines.append(json.dumps(obj, separators=(",", ":"), allow_nan=False))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
