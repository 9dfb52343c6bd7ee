"""Synthetic corpus generator for tests and demos.

Each utterance is rendered as a sequence of harmonic tone bursts (one per
word) separated by short gaps, with a per-utterance fundamental and
amplitude so pitch and energy targets vary across the corpus. Alignments
are exact because the writer knows every segment boundary.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .audio import write_wav

SAMPLE_RATE = 16000
_WORDS = ("alpha", "bravo", "carry", "delta", "early", "focus",
          "gather", "hollow", "inner", "jolly", "keeper", "lumen")
_FADE_SECONDS = 0.005


def _tone(f0: float, duration: float, amplitude: float) -> np.ndarray:
    t = np.arange(int(round(duration * SAMPLE_RATE))) / SAMPLE_RATE
    wave = 0.7 * np.sin(2 * np.pi * f0 * t) + 0.3 * np.sin(4 * np.pi * f0 * t)
    n_fade = min(int(_FADE_SECONDS * SAMPLE_RATE), len(t) // 2)
    envelope = np.ones(len(t))
    if n_fade > 0:
        ramp = np.linspace(0.0, 1.0, n_fade)
        envelope[:n_fade] = ramp
        envelope[-n_fade:] = ramp[::-1]
    return amplitude * wave * envelope


def _write_utterance(directory: Path, stem: str, speaker_id: int,
                     rng: np.random.Generator, silent: bool) -> None:
    n_words = int(rng.integers(2, 5))
    words = [str(rng.choice(_WORDS)) for _ in range(n_words)]
    base_f0 = float(rng.uniform(120.0, 300.0))
    amplitude = float(rng.uniform(0.2, 0.8))

    pieces = [np.zeros(int(rng.uniform(0.05, 0.1) * SAMPLE_RATE))]
    cursor = len(pieces[0]) / SAMPLE_RATE
    spans = []
    for word in words:
        duration = float(rng.uniform(0.12, 0.25))
        f0 = base_f0 * float(rng.uniform(0.95, 1.05))
        pieces.append(_tone(f0, duration, amplitude))
        spans.append({"word": word, "start": round(cursor, 6),
                      "end": round(cursor + duration, 6)})
        cursor += duration
        gap = float(rng.uniform(0.03, 0.06))
        pieces.append(np.zeros(int(gap * SAMPLE_RATE)))
        cursor += gap
    pieces.append(np.zeros(int(rng.uniform(0.05, 0.1) * SAMPLE_RATE)))

    signal = np.concatenate(pieces)
    if silent:
        signal = np.zeros_like(signal)
    write_wav(directory / f"{stem}.wav", signal, SAMPLE_RATE)
    (directory / f"{stem}.txt").write_text(" ".join(words) + "\n",
                                           encoding="utf-8")
    alignment = {"speaker_id": speaker_id, "words": spans}
    (directory / f"{stem}.words.json").write_text(
        json.dumps(alignment, indent=2) + "\n", encoding="utf-8")


def make_fixture(root: str | Path, n_dialogues: int = 3, turns: int = 3,
                 seed: int = 0, silent_dialogue: bool = False) -> list[str]:
    """Write a small corpus under root; returns the dialogue ids created.

    silent_dialogue appends one all-silence dialogue, which a correct
    pipeline must drop because none of its utterances carries pitch.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    ids = [f"dlg-{d:03d}" for d in range(n_dialogues)]
    if silent_dialogue:
        ids.append("dlg-silent")
    for dlg_idx, dialogue_id in enumerate(ids):
        directory = root / dialogue_id
        directory.mkdir(exist_ok=True)
        silent = silent_dialogue and dlg_idx == len(ids) - 1
        for turn in range(turns):
            _write_utterance(directory, f"{turn:03d}",
                             speaker_id=(dlg_idx + turn) % 2, rng=rng,
                             silent=silent)
    return ids
