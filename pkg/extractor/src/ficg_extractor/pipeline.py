"""Corpus-to-dataset extraction pipeline.

Per utterance: decode the audio, compute frame speech features, pool them
into per-word vectors via the alignment, embed the words and the transcript
with the dialogue history so far as context, average the frames into an
utterance speech feature, and measure raw prosody targets.

A fully unvoiced utterance has no pitch, and the output format has no way to
express a missing target, so its entire dialogue is dropped (with a logged
warning) rather than silently reindexing the remaining turns. Targets are
z-normalized across the kept corpus in a second pass.

Dialogues are processed in parallel; results merge in corpus order
(lexicographic dialogue id), so the output is independent of worker count.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .audio import read_wav
from .corpus import RawDialogue, RawUtterance
from .features import Backends, pool_word_frames
from .targets import prosody_raw, z_normalize
from .writer import DialogueOut, UtteranceOut

logger = logging.getLogger("ficg_extractor")


@dataclass(frozen=True)
class ExtractionResult:
    dialogues: tuple[DialogueOut, ...]  # normalized targets, corpus order
    dims: dict[str, int]
    n_speakers: int
    dropped: tuple[str, ...]  # dialogue ids removed for unvoiced utterances


def featurize_utterance(utt: RawUtterance, context: str,
                        backends: Backends) -> tuple[UtteranceOut, tuple[float, float] | None]:
    """Features plus raw (pitch, energy); targets are None when unvoiced.

    The returned record carries placeholder zero targets; the pipeline
    substitutes normalized values in its second pass.
    """
    signal, sr = read_wav(utt.audio_path)
    frames = backends.frame_speech.frames(signal, sr)
    centers = backends.frame_speech.centers(len(frames), sr)
    words = tuple(span.word for span in utt.words)
    record = UtteranceOut(
        speaker_id=utt.speaker_id,
        words=words,
        word_text_feats=backends.word_text.extract(words, context),
        word_speech_feats=pool_word_frames(frames, centers, utt.words),
        utt_text_feat=backends.utt_text.extract(utt.transcript, context),
        utt_speech_feat=frames.mean(axis=0),
        pitch_target=0.0,
        energy_target=0.0,
    )
    return record, prosody_raw(signal, sr)


def extract_dialogue(dialogue: RawDialogue,
                     backends: Backends) -> tuple[DialogueOut, list[tuple[float, float]]] | None:
    """All utterances of one dialogue, or None if any utterance is unvoiced."""
    utts: list[UtteranceOut] = []
    raws: list[tuple[float, float]] = []
    context = ""
    for idx, utt in enumerate(dialogue.utterances):
        record, raw = featurize_utterance(utt, context, backends)
        if raw is None:
            logger.warning("dialogue %s: utterance %d is fully unvoiced; "
                           "dropping the dialogue", dialogue.dialogue_id, idx)
            return None
        utts.append(record)
        raws.append(raw)
        context = f"{context} {utt.transcript}".strip()
    return DialogueOut(dialogue.dialogue_id, tuple(utts)), raws


def extract_corpus(dialogues: list[RawDialogue], backends: Backends,
                   jobs: int = 1) -> ExtractionResult:
    """Extract every dialogue, drop unvoiced ones, normalize targets."""
    if jobs < 1:
        raise ValueError(f"jobs must be positive, got {jobs}")
    ordered = sorted(dialogues, key=lambda d: d.dialogue_id)
    if jobs == 1:
        extracted = [extract_dialogue(d, backends) for d in ordered]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            extracted = list(pool.map(lambda d: extract_dialogue(d, backends),
                                      ordered))
    kept: list[tuple[DialogueOut, list[tuple[float, float]]]] = []
    dropped: list[str] = []
    for raw_dlg, result in zip(ordered, extracted):
        if result is None:
            dropped.append(raw_dlg.dialogue_id)
        else:
            kept.append(result)
    if not kept:
        raise ValueError("every dialogue was dropped; nothing to write")

    pitches = [p for _, raws in kept for (p, _) in raws]
    energies = [e for _, raws in kept for (_, e) in raws]
    pitch_norm = z_normalize(pitches)
    energy_norm = z_normalize(energies)

    out: list[DialogueOut] = []
    cursor = 0
    for dlg, raws in kept:
        utts = []
        for utt in dlg.utterances:
            utts.append(UtteranceOut(
                speaker_id=utt.speaker_id, words=utt.words,
                word_text_feats=utt.word_text_feats,
                word_speech_feats=utt.word_speech_feats,
                utt_text_feat=utt.utt_text_feat,
                utt_speech_feat=utt.utt_speech_feat,
                pitch_target=pitch_norm[cursor],
                energy_target=energy_norm[cursor]))
            cursor += 1
        out.append(DialogueOut(dlg.dialogue_id, tuple(utts)))

    n_speakers = 1 + max(u.speaker_id for d in out for u in d.utterances)
    return ExtractionResult(dialogues=tuple(out), dims=backends.dims(),
                            n_speakers=n_speakers, dropped=tuple(dropped))
