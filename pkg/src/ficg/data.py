"""Dialogue dataset types, on-disk format, windowing, and a synthetic generator.

On-disk format ("ficg-dialogue"): UTF-8 JSON lines. The first line is a header

    {"format":"ficg-dialogue","version":1,
     "dims":{"word_text":D1,"word_speech":D2,"utt_text":D3,"utt_speech":D4},
     "n_speakers":K}

followed by one dialogue object per line:

    {"dialogue_id":"...","utterances":[{"speaker_id":0,"words":[...],
      "word_text_feats":[[...]...],"word_speech_feats":[[...]...],
      "utt_text_feat":[...],"utt_speech_feat":[...],
      "pitch_target":0.5,"energy_target":0.5}, ...]}

Floats are stored with 9 significant decimal digits. Values already at that
precision round-trip exactly, so ``load_dataset(save_dataset(...))`` is the
identity on datasets produced by this module and saving a loaded file again
is byte-identical. ``dims`` is null and ``n_speakers`` 0 for an empty dataset.

Feature vectors are 1-D float64 numpy arrays; per-word features are stacked
row-major into (q, dim) arrays. All record types are immutable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FORMAT_TAG = "ficg-dialogue"
FORMAT_VERSION = 1

# vocabulary for synthetic transcripts; the strings carry no signal
_FILLERS = ("the", "a", "and", "to", "of", "in", "on", "it", "so", "well")
_KEYWORDS = ("budget", "deadline", "forecast", "invoice", "meeting", "offer",
             "project", "quota", "report", "schedule", "target", "venue")


class DatasetError(ValueError):
    """Raised when a dataset file or record violates the schema."""


def quantize(x: float) -> float:
    """Round to 9 significant decimal digits, the storage precision."""
    return float(f"{float(x):.9g}")


def quantize_array(a: np.ndarray) -> np.ndarray:
    out = np.array([quantize(v) for v in np.asarray(a, dtype=np.float64).ravel()],
                   dtype=np.float64)
    return out.reshape(np.asarray(a).shape)


@dataclass(frozen=True)
class FeatureDims:
    """Raw dimensionalities of the four feature sources."""
    word_text: int
    word_speech: int
    utt_text: int
    utt_speech: int

    def to_dict(self) -> dict:
        return {"word_text": self.word_text, "word_speech": self.word_speech,
                "utt_text": self.utt_text, "utt_speech": self.utt_speech}

    @staticmethod
    def from_dict(d: dict) -> "FeatureDims":
        return FeatureDims(int(d["word_text"]), int(d["word_speech"]),
                           int(d["utt_text"]), int(d["utt_speech"]))


@dataclass(frozen=True, eq=False)
class UtteranceRecord:
    speaker_id: int
    words: tuple[str, ...]
    word_text_feats: np.ndarray    # (q, word_text_dim)
    word_speech_feats: np.ndarray  # (q, word_speech_dim)
    utt_text_feat: np.ndarray      # (utt_text_dim,)
    utt_speech_feat: np.ndarray    # (utt_speech_dim,)
    pitch_target: float
    energy_target: float

    @property
    def n_words(self) -> int:
        return len(self.words)


@dataclass(frozen=True, eq=False)
class DialogueRecord:
    dialogue_id: str
    utterances: tuple[UtteranceRecord, ...]


@dataclass(frozen=True, eq=False)
class TrainingSample:
    """A prediction instance: utterances before `current`, in dialogue order."""
    history: tuple[UtteranceRecord, ...]
    current: UtteranceRecord


@dataclass(frozen=True)
class DatasetHeader:
    dims: FeatureDims | None
    n_speakers: int


@dataclass(frozen=True)
class SynthConfig:
    n_dialogues: int = 100
    turns_per_dialogue: int = 6
    words_per_utterance: int = 8
    keyword_coefficient: float = 1.0   # a: weight of the previous keyword intensity
    chain_coefficient: float = 0.5     # b: weight of the running prosody mean
    noise_stddev: float = 0.05
    feature_dims: FeatureDims = FeatureDims(16, 16, 16, 16)
    seed: int = 0

    def to_dict(self) -> dict:
        return {"n_dialogues": self.n_dialogues,
                "turns_per_dialogue": self.turns_per_dialogue,
                "words_per_utterance": self.words_per_utterance,
                "keyword_coefficient": self.keyword_coefficient,
                "chain_coefficient": self.chain_coefficient,
                "noise_stddev": self.noise_stddev,
                "feature_dims": self.feature_dims.to_dict(),
                "seed": self.seed}

    @staticmethod
    def from_dict(d: dict) -> "SynthConfig":
        d = dict(d)
        base = SynthConfig()
        if "feature_dims" in d:
            d["feature_dims"] = FeatureDims.from_dict(d["feature_dims"])
        unknown = set(d) - set(base.__dataclass_fields__)
        if unknown:
            raise DatasetError(f"unknown synthesis config fields: {sorted(unknown)}")
        return SynthConfig(**d)


# ---------------------------------------------------------------------------
# validation


def _check_vector(vec: np.ndarray, dim: int, what: str, where: str) -> None:
    if vec.ndim != 1 or vec.shape[0] != dim:
        raise DatasetError(f"{where}: {what} has shape {vec.shape}, expected ({dim},)")
    if not np.all(np.isfinite(vec)):
        raise DatasetError(f"{where}: {what} contains non-finite values")


def validate_record(record: DialogueRecord, dims: FeatureDims, n_speakers: int) -> None:
    """Check one dialogue against the schema; raise DatasetError on violation."""
    if not record.dialogue_id:
        raise DatasetError("dialogue with empty dialogue_id")
    if len(record.utterances) == 0:
        raise DatasetError(f"dialogue {record.dialogue_id!r}: no utterances")
    for u_idx, utt in enumerate(record.utterances):
        where = f"dialogue {record.dialogue_id!r}, utterance {u_idx}"
        q = len(utt.words)
        if q == 0:
            raise DatasetError(f"{where}: empty word list")
        if any(not w for w in utt.words):
            raise DatasetError(f"{where}: empty word string")
        for name, arr, dim in (("word_text_feats", utt.word_text_feats, dims.word_text),
                               ("word_speech_feats", utt.word_speech_feats, dims.word_speech)):
            if arr.ndim != 2 or arr.shape[0] != q:
                raise DatasetError(
                    f"{where}: {name} provides {arr.shape[0] if arr.ndim == 2 else '?'} "
                    f"vectors for {q} words")
            if arr.shape[1] != dim:
                raise DatasetError(f"{where}: {name} dim {arr.shape[1]} != declared {dim}")
            if not np.all(np.isfinite(arr)):
                raise DatasetError(f"{where}: {name} contains non-finite values")
        _check_vector(utt.utt_text_feat, dims.utt_text, "utt_text_feat", where)
        _check_vector(utt.utt_speech_feat, dims.utt_speech, "utt_speech_feat", where)
        if not (0 <= utt.speaker_id < n_speakers):
            raise DatasetError(
                f"{where}: speaker_id {utt.speaker_id} outside [0, {n_speakers})")
        for name, val in (("pitch_target", utt.pitch_target),
                          ("energy_target", utt.energy_target)):
            if not np.isfinite(val):
                raise DatasetError(f"{where}: {name} is non-finite")


def dataset_dims(records: list[DialogueRecord]) -> FeatureDims | None:
    """Dims declared by the first utterance, or None for an empty dataset."""
    for rec in records:
        for utt in rec.utterances:
            return FeatureDims(utt.word_text_feats.shape[1],
                               utt.word_speech_feats.shape[1],
                               utt.utt_text_feat.shape[0],
                               utt.utt_speech_feat.shape[0])
    return None


def count_speakers(records: list[DialogueRecord]) -> int:
    n = 0
    for rec in records:
        for utt in rec.utterances:
            n = max(n, utt.speaker_id + 1)
    return n


# ---------------------------------------------------------------------------
# serialization


def _utt_to_obj(utt: UtteranceRecord) -> dict:
    return {
        "speaker_id": int(utt.speaker_id),
        "words": list(utt.words),
        "word_text_feats": [[quantize(v) for v in row] for row in utt.word_text_feats],
        "word_speech_feats": [[quantize(v) for v in row] for row in utt.word_speech_feats],
        "utt_text_feat": [quantize(v) for v in utt.utt_text_feat],
        "utt_speech_feat": [quantize(v) for v in utt.utt_speech_feat],
        "pitch_target": quantize(utt.pitch_target),
        "energy_target": quantize(utt.energy_target),
    }


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise DatasetError(f"{where}: missing field {key!r}")
    return obj[key]


def _utt_from_obj(obj: dict, where: str) -> UtteranceRecord:
    if not isinstance(obj, dict):
        raise DatasetError(f"{where}: utterance is not an object")
    words = _require(obj, "words", where)
    if not isinstance(words, list) or not all(isinstance(w, str) for w in words):
        raise DatasetError(f"{where}: words must be a list of strings")
    try:
        wt = np.asarray(_require(obj, "word_text_feats", where), dtype=np.float64)
        ws = np.asarray(_require(obj, "word_speech_feats", where), dtype=np.float64)
        ut = np.asarray(_require(obj, "utt_text_feat", where), dtype=np.float64)
        us = np.asarray(_require(obj, "utt_speech_feat", where), dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise DatasetError(f"{where}: malformed feature array ({exc})") from exc
    if wt.ndim == 1 and wt.size == 0:
        wt = wt.reshape(0, 0)
    if ws.ndim == 1 and ws.size == 0:
        ws = ws.reshape(0, 0)
    if wt.ndim != 2 or ws.ndim != 2:
        raise DatasetError(f"{where}: word feature arrays must be rectangular "
                           "(one row per word)")
    spk = _require(obj, "speaker_id", where)
    if not isinstance(spk, int) or isinstance(spk, bool):
        raise DatasetError(f"{where}: speaker_id must be an integer")
    pitch = _require(obj, "pitch_target", where)
    energy = _require(obj, "energy_target", where)
    if not isinstance(pitch, (int, float)) or not isinstance(energy, (int, float)):
        raise DatasetError(f"{where}: targets must be numbers")
    return UtteranceRecord(speaker_id=spk, words=tuple(words),
                           word_text_feats=wt, word_speech_feats=ws,
                           utt_text_feat=ut, utt_speech_feat=us,
                           pitch_target=float(pitch), energy_target=float(energy))


def save_dataset(records: list[DialogueRecord], path: str | Path, *,
                 dims: FeatureDims | None = None, n_speakers: int | None = None) -> None:
    """Write records (header first) after validating them against the schema.

    dims/n_speakers default to values derived from the records themselves.
    """
    if dims is None:
        dims = dataset_dims(records)
    if n_speakers is None:
        n_speakers = count_speakers(records)
    if dims is not None:
        for rec in records:
            validate_record(rec, dims, n_speakers)
    seen: set[str] = set()
    for rec in records:
        if rec.dialogue_id in seen:
            raise DatasetError(f"duplicate dialogue_id {rec.dialogue_id!r}")
        seen.add(rec.dialogue_id)
    header = {"format": FORMAT_TAG, "version": FORMAT_VERSION,
              "dims": dims.to_dict() if dims is not None else None,
              "n_speakers": int(n_speakers)}
    lines = [json.dumps(header, separators=(",", ":"), allow_nan=False)]
    for rec in records:
        obj = {"dialogue_id": rec.dialogue_id,
               "utterances": [_utt_to_obj(u) for u in rec.utterances]}
        lines.append(json.dumps(obj, separators=(",", ":"), allow_nan=False))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_dataset_with_header(path: str | Path) -> tuple[DatasetHeader, list[DialogueRecord]]:
    """Parse and fully validate a dataset file."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise DatasetError(f"{path}: empty file (missing header line)")
    try:
        header_obj = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: line 1: malformed JSON ({exc})") from exc
    if not isinstance(header_obj, dict) or header_obj.get("format") != FORMAT_TAG:
        raise DatasetError(f"{path}: line 1: not a {FORMAT_TAG!r} header")
    if header_obj.get("version") != FORMAT_VERSION:
        raise DatasetError(f"{path}: unsupported format version "
                           f"{header_obj.get('version')!r} (expected {FORMAT_VERSION})")
    dims_obj = header_obj.get("dims")
    dims = FeatureDims.from_dict(dims_obj) if dims_obj is not None else None
    n_speakers = header_obj.get("n_speakers")
    if not isinstance(n_speakers, int) or n_speakers < 0:
        raise DatasetError(f"{path}: header n_speakers must be a non-negative integer")

    records: list[DialogueRecord] = []
    seen: set[str] = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            raise DatasetError(f"{path}: line {lineno}: blank line inside dataset")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}: line {lineno}: malformed JSON ({exc})") from exc
        if not isinstance(obj, dict):
            raise DatasetError(f"{path}: line {lineno}: dialogue is not an object")
        did = obj.get("dialogue_id")
        if not isinstance(did, str) or not did:
            raise DatasetError(f"{path}: line {lineno}: missing or empty dialogue_id")
        if did in seen:
            raise DatasetError(f"{path}: line {lineno}: duplicate dialogue_id {did!r}")
        seen.add(did)
        utts_obj = obj.get("utterances")
        if not isinstance(utts_obj, list):
            raise DatasetError(f"{path}: line {lineno}: utterances must be a list")
        utts = tuple(_utt_from_obj(u, f"dialogue {did!r}, utterance {i}")
                     for i, u in enumerate(utts_obj))
        rec = DialogueRecord(dialogue_id=did, utterances=utts)
        if dims is None:
            raise DatasetError(f"{path}: header declares no dims but line {lineno} "
                               "contains a dialogue")
        validate_record(rec, dims, n_speakers)
        records.append(rec)
    return DatasetHeader(dims=dims, n_speakers=n_speakers), records


def load_dataset(path: str | Path) -> list[DialogueRecord]:
    return load_dataset_with_header(path)[1]


# ---------------------------------------------------------------------------
# windowing


def make_training_samples(record: DialogueRecord,
                          max_history: int | None = None) -> list[TrainingSample]:
    """One sample per utterance with at least one predecessor.

    The history is the up-to-max_history utterances immediately before the
    current one, in dialogue order; max_history=None keeps the whole prefix.
    A one-utterance dialogue yields no samples.
    """
    if max_history is not None and max_history < 1:
        raise ValueError("max_history must be at least 1")
    samples = []
    utts = record.utterances
    for cur in range(1, len(utts)):
        lo = 0 if max_history is None else max(0, cur - max_history)
        samples.append(TrainingSample(history=utts[lo:cur], current=utts[cur]))
    return samples


def iter_training_samples(records: list[DialogueRecord],
                          max_history: int | None = None) -> list[TrainingSample]:
    out: list[TrainingSample] = []
    for rec in records:
        out.extend(make_training_samples(rec, max_history))
    return out


# ---------------------------------------------------------------------------
# synthetic generator


def _fit(vec: np.ndarray, dim: int) -> np.ndarray:
    """Truncate or zero-pad a vector to length dim."""
    if vec.shape[0] == dim:
        return vec
    if vec.shape[0] > dim:
        return vec[:dim]
    return np.concatenate([vec, np.zeros(dim - vec.shape[0])])


def generate_synthetic(config: SynthConfig) -> list[DialogueRecord]:
    """Deterministic keyword-driven dialogues.

    Causal structure, with a = keyword_coefficient and b = chain_coefficient:

    * every utterance has one keyword word; its word_speech_feats[0] holds an
      intensity kappa ~ U[0,1] and its word_text_feats[0] a keyword identity
      scalar; all other word-feature entries are N(0, 0.1*noise_stddev) noise;
    * utterance features are the word-feature mean (fitted to the utterance
      dim) plus N(0, noise_stddev) noise, so the keyword signal is diluted by
      1/words_per_utterance at the utterance level;
    * utt_text_feat[0] is overwritten with a semantic content scalar
      s = a*u, u ~ U[0,1] fresh, and utt_speech_feat[0] with a prosody
      scalar p = a*v, v ~ U[0,1] fresh. Each scalar lives nowhere else, so
      the s chain is observable only through utterance text features and the
      p chain only through utterance speech features, while kappa is
      observable only through word features (shared by both graph flavors);
    * targets of utterance i (i >= 1, 0-based):
      a*kappa[i-1] + b*mean(s[0..i-1]) + b*mean(p[0..i-1]) plus independent
      N(0, noise_stddev) draws for pitch and for energy; the first
      utterance, which is never a prediction target, gets p[0] + noise.

    With a=0 every history-dependent term vanishes and the targets are pure
    noise. Every stored float is quantized to the 9-digit storage precision,
    so saving and reloading the result reproduces it field for field. With
    noise_stddev=0 the targets equal the formula recomputed from the stored
    features up to that storage precision. Speakers alternate 0, 1.
    """
    if config.n_dialogues < 0:
        raise ValueError("n_dialogues must be non-negative")
    if config.turns_per_dialogue < 1 or config.words_per_utterance < 1:
        raise ValueError("turns_per_dialogue and words_per_utterance must be >= 1")
    if config.noise_stddev < 0:
        raise ValueError("noise_stddev must be non-negative")
    rng = np.random.default_rng(config.seed)
    dims = config.feature_dims
    a = config.keyword_coefficient
    b = config.chain_coefficient
    sigma = config.noise_stddev
    records = []
    for d in range(config.n_dialogues):
        utterances = []
        s_scalars: list[float] = []
        p_scalars: list[float] = []
        prev_kappa = 0.0
        for t in range(config.turns_per_dialogue):
            q = config.words_per_utterance
            kw_pos = int(rng.integers(0, q))
            kw_id = int(rng.integers(0, len(_KEYWORDS)))
            kappa = quantize(rng.uniform(0.0, 1.0))
            identity = quantize((kw_id + 1) / len(_KEYWORDS))
            word_text = quantize_array(rng.normal(0.0, 0.1 * sigma, (q, dims.word_text)))
            word_speech = quantize_array(rng.normal(0.0, 0.1 * sigma, (q, dims.word_speech)))
            word_text[kw_pos, 0] = identity
            word_speech[kw_pos, 0] = kappa
            utt_text = quantize_array(
                _fit(word_text.mean(axis=0), dims.utt_text)
                + rng.normal(0.0, sigma, dims.utt_text))
            utt_speech = quantize_array(
                _fit(word_speech.mean(axis=0), dims.utt_speech)
                + rng.normal(0.0, sigma, dims.utt_speech))
            s = quantize(a * rng.uniform(0.0, 1.0))
            p = quantize(a * rng.uniform(0.0, 1.0))
            if t == 0:
                pitch = quantize(p + rng.normal(0.0, sigma))
                energy = quantize(p + rng.normal(0.0, sigma))
            else:
                s_acc = 0.0
                p_acc = 0.0
                for v in s_scalars:
                    s_acc += v
                for v in p_scalars:
                    p_acc += v
                base = (a * prev_kappa + b * (s_acc / len(s_scalars))
                        + b * (p_acc / len(p_scalars)))
                pitch = quantize(base + rng.normal(0.0, sigma))
                energy = quantize(base + rng.normal(0.0, sigma))
            utt_text[0] = s
            utt_speech[0] = p
            words = [_FILLERS[int(rng.integers(0, len(_FILLERS)))] for _ in range(q)]
            words[kw_pos] = _KEYWORDS[kw_id]
            utterances.append(UtteranceRecord(
                speaker_id=t % 2, words=tuple(words),
                word_text_feats=word_text, word_speech_feats=word_speech,
                utt_text_feat=utt_text, utt_speech_feat=utt_speech,
                pitch_target=pitch, energy_target=energy))
            s_scalars.append(s)
            p_scalars.append(p)
            prev_kappa = kappa
        records.append(DialogueRecord(dialogue_id=f"synth-{d:05d}",
                                      utterances=tuple(utterances)))
    return records
