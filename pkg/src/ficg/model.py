"""Prediction model: two graph encoders feeding a two-layer head.

forward() encodes the sample's history twice, once per graph flavor, then
applies

    out = relu(concat(pooled_semantic, pooled_prosody, projected_current) @ W1 + b1) @ W2 + b2

yielding (pitch, energy). Ablation modes replace either or both pooled
vectors with zeros while keeping the concatenation arity fixed; a zeroed
branch is not encoded at all, so no gradient flows through it. The current
utterance enters through the utterance-text projection only (no speaker
embedding: it is not a backbone node of any graph).

backward() is a hand-written reverse pass over the cached forward
intermediates. Gradients are exact for the per-sample loss
0.5*((pitch_hat-pitch)^2 + (energy_hat-energy)^2); mse_loss() is the mean of
that quantity over samples.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .data import FeatureDims, TrainingSample, quantize
from .encoder import (EncodeCache, EncoderSettings, ProjectionParams, SageParams,
                      encode_with_cache, init_projection, init_sage,
                      zero_projection_like, zero_sage_like, _NORM_EPS)
from .graphs import build_pig, build_sig


class AblationMode(Enum):
    FULL = "Full"
    NO_SIG = "NoSIG"
    NO_PIG = "NoPIG"
    NO_BOTH = "NoBoth"

    @property
    def use_semantic(self) -> bool:
        return self in (AblationMode.FULL, AblationMode.NO_PIG)

    @property
    def use_prosody(self) -> bool:
        return self in (AblationMode.FULL, AblationMode.NO_SIG)


@dataclass(eq=False)
class HeadParams:
    w1: np.ndarray  # (3*d_model, d_hidden)
    b1: np.ndarray  # (d_hidden,)
    w2: np.ndarray  # (d_hidden, 2)
    b2: np.ndarray  # (2,)


@dataclass(eq=False)
class ModelParams:
    projection: ProjectionParams
    sage_semantic: SageParams
    sage_prosody: SageParams
    head: HeadParams

    @property
    def d_model(self) -> int:
        return self.projection.d_model

    @property
    def d_hidden(self) -> int:
        return self.head.b1.shape[0]


def init_model(dims: FeatureDims, d_model: int, d_hidden: int, n_speakers: int,
               seed_or_rng) -> ModelParams:
    """Deterministic initialization; weight matrices uniform(+-1/sqrt(fan_in)),
    biases and speaker embeddings zero. Draw order: projection, semantic
    aggregator, prosody aggregator, head."""
    rng = (seed_or_rng if isinstance(seed_or_rng, np.random.Generator)
           else np.random.default_rng(seed_or_rng))
    proj = init_projection(dims, d_model, n_speakers, rng)
    sage_s = init_sage(d_model, rng)
    sage_p = init_sage(d_model, rng)
    bound1 = 1.0 / np.sqrt(3 * d_model)
    w1 = rng.uniform(-bound1, bound1, (3 * d_model, d_hidden))
    bound2 = 1.0 / np.sqrt(d_hidden)
    w2 = rng.uniform(-bound2, bound2, (d_hidden, 2))
    head = HeadParams(w1=w1, b1=np.zeros(d_hidden), w2=w2, b2=np.zeros(2))
    return ModelParams(projection=proj, sage_semantic=sage_s, sage_prosody=sage_p,
                       head=head)


def zero_grads_like(params: ModelParams) -> ModelParams:
    return ModelParams(
        projection=zero_projection_like(params.projection),
        sage_semantic=zero_sage_like(params.sage_semantic),
        sage_prosody=zero_sage_like(params.sage_prosody),
        head=HeadParams(np.zeros_like(params.head.w1), np.zeros_like(params.head.b1),
                        np.zeros_like(params.head.w2), np.zeros_like(params.head.b2)))


PARAM_FIELDS = (
    ("projection", "word_text_w"), ("projection", "word_text_b"),
    ("projection", "word_speech_w"), ("projection", "word_speech_b"),
    ("projection", "utt_text_w"), ("projection", "utt_text_b"),
    ("projection", "utt_speech_w"), ("projection", "utt_speech_b"),
    ("projection", "speaker_emb"),
    ("sage_semantic", "self_w"), ("sage_semantic", "backbone_w"),
    ("sage_semantic", "word_semantic_w"), ("sage_semantic", "word_prosody_w"),
    ("sage_semantic", "bias"),
    ("sage_prosody", "self_w"), ("sage_prosody", "backbone_w"),
    ("sage_prosody", "word_semantic_w"), ("sage_prosody", "word_prosody_w"),
    ("sage_prosody", "bias"),
    ("head", "w1"), ("head", "b1"), ("head", "w2"), ("head", "b2"),
)


def param_arrays(params: ModelParams) -> list[tuple[str, np.ndarray]]:
    """Canonical (name, array) sequence; arrays are the live objects."""
    return [(f"{group}.{field}", getattr(getattr(params, group), field))
            for group, field in PARAM_FIELDS]


def params_to_vector(params: ModelParams) -> np.ndarray:
    return np.concatenate([arr.ravel() for _, arr in param_arrays(params)])


def vector_to_params(vec: np.ndarray, template: ModelParams) -> ModelParams:
    out = zero_grads_like(template)
    arrs = param_arrays(out)
    total = sum(arr.size for _, arr in arrs)
    if vec.size != total:
        raise ValueError(f"vector length {vec.size} does not match parameter count {total}")
    offset = 0
    for _, arr in arrs:
        n = arr.size
        arr[...] = vec[offset:offset + n].reshape(arr.shape)
        offset += n
    return out


def copy_params(params: ModelParams) -> ModelParams:
    return vector_to_params(params_to_vector(params), params)


@dataclass(frozen=True, eq=False)
class ForwardCache:
    sample: TrainingSample
    mode: AblationMode
    settings: EncoderSettings
    semantic: EncodeCache | None
    prosody: EncodeCache | None
    raw_current: np.ndarray
    head_in: np.ndarray
    z1: np.ndarray
    hidden: np.ndarray
    prediction: np.ndarray


def forward(sample: TrainingSample, params: ModelParams, mode: AblationMode,
            settings: EncoderSettings = EncoderSettings()
            ) -> tuple[np.ndarray, ForwardCache]:
    """Predict (pitch, energy) for the sample's current utterance."""
    if len(sample.history) == 0:
        raise ValueError("sample has an empty history")
    d = params.d_model
    sem_cache = pro_cache = None
    pooled_s = np.zeros(d)
    pooled_p = np.zeros(d)
    if mode.use_semantic:
        _, sem_cache = encode_with_cache(build_sig(sample.history), params.projection,
                                         params.sage_semantic, settings)
        pooled_s = sem_cache.pooled
    if mode.use_prosody:
        _, pro_cache = encode_with_cache(build_pig(sample.history), params.projection,
                                         params.sage_prosody, settings)
        pooled_p = pro_cache.pooled
    raw_cur = sample.current.utt_text_feat
    if raw_cur.shape[0] != params.projection.utt_text_w.shape[0]:
        raise ValueError(f"current utterance text dim {raw_cur.shape[0]} does not "
                         f"match projection input dim {params.projection.utt_text_w.shape[0]}")
    cur = raw_cur @ params.projection.utt_text_w + params.projection.utt_text_b
    head_in = np.concatenate([pooled_s, pooled_p, cur])
    z1 = head_in @ params.head.w1 + params.head.b1
    hidden = np.maximum(z1, 0.0)
    prediction = hidden @ params.head.w2 + params.head.b2
    cache = ForwardCache(sample=sample, mode=mode, settings=settings,
                         semantic=sem_cache, prosody=pro_cache, raw_current=raw_cur,
                         head_in=head_in, z1=z1, hidden=hidden, prediction=prediction)
    return prediction, cache


def mse_loss(predictions, targets) -> float:
    """Mean over samples of ((pitch_err^2 + energy_err^2) / 2)."""
    preds = np.asarray(predictions, dtype=np.float64)
    tgts = np.asarray(targets, dtype=np.float64)
    if preds.shape != tgts.shape or preds.ndim != 2 or preds.shape[1] != 2:
        raise ValueError(f"predictions {preds.shape} and targets {tgts.shape} "
                         "must both be (n, 2)")
    if preds.shape[0] == 0:
        raise ValueError("mse_loss needs at least one sample")
    diff = preds - tgts
    return float(np.mean(0.5 * (diff[:, 0] ** 2 + diff[:, 1] ** 2)))


def sample_targets(sample: TrainingSample) -> np.ndarray:
    return np.array([sample.current.pitch_target, sample.current.energy_target])


def _backward_graph(cache: EncodeCache, sage: SageParams, proj_grads: ProjectionParams,
                    sage_grads: SageParams, d_pooled: np.ndarray,
                    settings: EncoderSettings) -> None:
    """Reverse the encode sweep, accumulating into the grad structures."""
    j = cache.raw_backbone.shape[0]
    dx = [d_pooled / (j + 1) for _ in range(j + 1)]
    d_wt_means = np.zeros_like(cache.proj_wt_means)
    d_ws_means = np.zeros_like(cache.proj_ws_means)
    for pos, self_vec, bb_vec, z in reversed(cache.events):
        df = dx[pos]
        r = np.maximum(z, 0.0)
        if settings.normalize:
            n = float(np.linalg.norm(r))
            if n > 0.0:
                dr = df / (n + _NORM_EPS) - r * (float(r @ df) / (n * (n + _NORM_EPS) ** 2))
            else:
                dr = df / _NORM_EPS
        else:
            dr = df
        dz = np.where(z > 0.0, dr, 0.0)
        sage_grads.bias += dz
        sage_grads.self_w += np.outer(self_vec, dz)
        dx[pos] = sage.self_w @ dz
        sage_grads.backbone_w += np.outer(bb_vec, dz)
        dx[pos - 1] = dx[pos - 1] + sage.backbone_w @ dz
        sage_grads.word_semantic_w += np.outer(cache.proj_wt_means[pos - 1], dz)
        d_wt_means[pos - 1] += sage.word_semantic_w @ dz
        sage_grads.word_prosody_w += np.outer(cache.proj_ws_means[pos - 1], dz)
        d_ws_means[pos - 1] += sage.word_prosody_w @ dz
    # dx[0..j-1] now hold gradients of the projected backbone inputs;
    # dx[j] is the gradient of the interaction node's zero self input (dropped)
    d_backbone = np.stack(dx[:j])
    if cache.modality.value == "semantic":
        proj_grads.utt_text_w += cache.raw_backbone.T @ d_backbone
        proj_grads.utt_text_b += d_backbone.sum(axis=0)
    else:
        proj_grads.utt_speech_w += cache.raw_backbone.T @ d_backbone
        proj_grads.utt_speech_b += d_backbone.sum(axis=0)
    if cache.spk_applied:
        for i, spk in enumerate(cache.speakers):
            proj_grads.speaker_emb[spk] += d_backbone[i]
    # word-branch means: mean of projections equals projection of the raw mean
    proj_grads.word_text_w += cache.raw_wt_means.T @ d_wt_means
    proj_grads.word_text_b += d_wt_means.sum(axis=0)
    proj_grads.word_speech_w += cache.raw_ws_means.T @ d_ws_means
    proj_grads.word_speech_b += d_ws_means.sum(axis=0)


def backward(sample: TrainingSample, params: ModelParams, mode: AblationMode,
             cache: ForwardCache) -> ModelParams:
    """Gradients of 0.5*((pitch_hat-pitch)^2 + (energy_hat-energy)^2)."""
    grads = zero_grads_like(params)
    d = params.d_model
    d_out = cache.prediction - sample_targets(sample)
    grads.head.b2 += d_out
    grads.head.w2 += np.outer(cache.hidden, d_out)
    d_hidden = params.head.w2 @ d_out
    dz1 = np.where(cache.z1 > 0.0, d_hidden, 0.0)
    grads.head.b1 += dz1
    grads.head.w1 += np.outer(cache.head_in, dz1)
    d_head_in = params.head.w1 @ dz1
    d_pooled_s, d_pooled_p, d_cur = d_head_in[:d], d_head_in[d:2 * d], d_head_in[2 * d:]
    grads.projection.utt_text_w += np.outer(cache.raw_current, d_cur)
    grads.projection.utt_text_b += d_cur
    if mode.use_semantic:
        _backward_graph(cache.semantic, params.sage_semantic, grads.projection,
                        grads.sage_semantic, d_pooled_s, cache.settings)
    if mode.use_prosody:
        _backward_graph(cache.prosody, params.sage_prosody, grads.projection,
                        grads.sage_prosody, d_pooled_p, cache.settings)
    return grads


# ---------------------------------------------------------------------------
# checkpoint serialization

CHECKPOINT_TAG = "ficg-model"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True, eq=False)
class Checkpoint:
    params: ModelParams
    dims: FeatureDims
    n_speakers: int
    settings: EncoderSettings
    max_history: int | None


def _array_to_obj(arr: np.ndarray):
    if arr.ndim == 1:
        return [quantize(v) for v in arr]
    return [[quantize(v) for v in row] for row in arr]


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    """Structured text mirroring the parameter fields; floats at storage
    precision (9 significant digits), so reloading reproduces the file."""
    params_obj = {}
    for group, field in PARAM_FIELDS:
        params_obj.setdefault(group, {})[field] = _array_to_obj(
            getattr(getattr(ckpt.params, group), field))
    obj = {
        "format": CHECKPOINT_TAG,
        "version": CHECKPOINT_VERSION,
        "config": {
            "dims": ckpt.dims.to_dict(),
            "d_model": ckpt.params.d_model,
            "d_hidden": ckpt.params.d_hidden,
            "n_speakers": ckpt.n_speakers,
            "passes": ckpt.settings.passes,
            "normalize": ckpt.settings.normalize,
            "speaker_to_prosody": ckpt.settings.speaker_to_prosody,
            "max_history": ckpt.max_history,
        },
        "params": params_obj,
    }
    Path(path).write_text(json.dumps(obj, separators=(",", ":"), allow_nan=False) + "\n",
                          encoding="utf-8")


def load_checkpoint(path: str | Path) -> Checkpoint:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: malformed checkpoint JSON ({exc})") from exc
    if not isinstance(obj, dict) or obj.get("format") != CHECKPOINT_TAG:
        raise ValueError(f"{path}: not a {CHECKPOINT_TAG!r} checkpoint")
    if obj.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {obj.get('version')!r}")
    cfg = obj["config"]
    dims = FeatureDims.from_dict(cfg["dims"])
    settings = EncoderSettings(passes=int(cfg["passes"]), normalize=bool(cfg["normalize"]),
                               speaker_to_prosody=bool(cfg["speaker_to_prosody"]))
    template = init_model(dims, int(cfg["d_model"]), int(cfg["d_hidden"]),
                          int(cfg["n_speakers"]), 0)
    params = zero_grads_like(template)
    for group, field in PARAM_FIELDS:
        try:
            raw = obj["params"][group][field]
        except KeyError as exc:
            raise ValueError(f"{path}: checkpoint missing parameter "
                             f"{group}.{field}") from exc
        arr = np.asarray(raw, dtype=np.float64)
        target = getattr(getattr(params, group), field)
        if arr.shape != target.shape:
            raise ValueError(f"{path}: parameter {group}.{field} has shape "
                             f"{arr.shape}, expected {target.shape}")
        target[...] = arr
    max_history = cfg.get("max_history")
    return Checkpoint(params=params, dims=dims, n_speakers=int(cfg["n_speakers"]),
                      settings=settings,
                      max_history=None if max_history is None else int(max_history))
