"""Raw corpus reading.

A corpus is a directory of per-dialogue subdirectories. Each utterance `NNN`
of a dialogue contributes three files:

    NNN.txt         transcript (UTF-8)
    NNN.wav         mono PCM audio
    NNN.words.json  {"speaker_id": int,
                     "words": [{"word": str, "start": sec, "end": sec}, ...]}

Dialogues are ordered by directory name, utterances by their number. The
alignment's word sequence must match the whitespace tokenization of the
transcript, and intervals must be non-overlapping and increasing.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

_UTT_FILE = re.compile(r"^(\d+)\.txt$")


class CorpusError(ValueError):
    """Malformed corpus layout or alignment; carries the offending path."""


@dataclass(frozen=True)
class WordSpan:
    word: str
    start: float
    end: float


@dataclass(frozen=True)
class RawUtterance:
    transcript: str
    audio_path: Path
    speaker_id: int
    words: tuple[WordSpan, ...]


@dataclass(frozen=True)
class RawDialogue:
    dialogue_id: str
    utterances: tuple[RawUtterance, ...]


def _load_alignment(path: Path) -> tuple[int, tuple[WordSpan, ...]]:
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{path}: malformed JSON ({exc})") from exc
    if not isinstance(obj, dict):
        raise CorpusError(f"{path}: alignment must be a JSON object")
    speaker = obj.get("speaker_id")
    if not isinstance(speaker, int) or isinstance(speaker, bool) or speaker < 0:
        raise CorpusError(f"{path}: speaker_id must be a non-negative integer")
    words_obj = obj.get("words")
    if not isinstance(words_obj, list) or not words_obj:
        raise CorpusError(f"{path}: words must be a non-empty list")
    spans = []
    for i, w in enumerate(words_obj):
        if not isinstance(w, dict) or not isinstance(w.get("word"), str):
            raise CorpusError(f"{path}: word {i} must be an object with a "
                              "'word' string")
        try:
            start = float(w["start"])
            end = float(w["end"])
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusError(f"{path}: word {i} needs numeric start/end") from exc
        if not (start >= 0.0 and end >= start):
            raise CorpusError(f"{path}: word {i} interval [{start}, {end}] must "
                              "satisfy 0 <= start <= end")
        if spans and start < spans[-1].end - 1e-9:
            raise CorpusError(f"{path}: word {i} starts at {start} before the "
                              f"previous word ends at {spans[-1].end}")
        spans.append(WordSpan(word=w["word"], start=start, end=end))
    return speaker, tuple(spans)


def _load_utterance(directory: Path, stem: str) -> RawUtterance:
    txt = directory / f"{stem}.txt"
    wav = directory / f"{stem}.wav"
    align = directory / f"{stem}.words.json"
    for required in (wav, align):
        if not required.is_file():
            raise CorpusError(f"{txt}: utterance is missing its companion "
                              f"{required.name}")
    transcript = txt.read_text(encoding="utf-8").strip()
    if not transcript:
        raise CorpusError(f"{txt}: empty transcript")
    speaker, spans = _load_alignment(align)
    tokens = transcript.split()
    aligned = [s.word for s in spans]
    if tokens != aligned:
        raise CorpusError(f"{align}: aligned words {aligned} do not match the "
                          f"transcript tokens {tokens}")
    return RawUtterance(transcript=transcript, audio_path=wav,
                        speaker_id=speaker, words=spans)


def load_dialogue(directory: Path) -> RawDialogue:
    stems = sorted((int(m.group(1)), m.group(1))
                   for f in directory.iterdir()
                   if (m := _UTT_FILE.match(f.name)))
    if not stems:
        raise CorpusError(f"{directory}: no utterance files (expected NNN.txt)")
    utts = tuple(_load_utterance(directory, stem) for _, stem in stems)
    return RawDialogue(dialogue_id=directory.name, utterances=utts)


def load_corpus(root: str | Path) -> list[RawDialogue]:
    """All dialogues under root, ordered by directory name."""
    root = Path(root)
    if not root.is_dir():
        raise CorpusError(f"{root}: not a directory")
    directories = sorted(p for p in root.iterdir() if p.is_dir())
    if not directories:
        raise CorpusError(f"{root}: no dialogue subdirectories")
    return [load_dialogue(d) for d in directories]
