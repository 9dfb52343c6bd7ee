"""Batched forward/backward over shape-homogeneous sample groups.

Samples sharing a history length and words-per-utterance profile can be
encoded together with (batch, dim) matmuls. The math is identical to the
per-sample path in model.py; the only representational shortcut is that the
word branches project the raw per-utterance word mean, which equals the mean
of per-word projections because the projection is affine. Equivalence with
the per-sample path is asserted in tests at 1e-12 relative (summation orders
differ, so bitwise equality is not expected).

Raw word means, being parameter-independent, are precomputed once per group.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import TrainingSample
from .encoder import EncoderSettings, SageParams, _NORM_EPS
from .model import AblationMode, ModelParams, zero_grads_like


@dataclass(frozen=True, eq=False)
class SampleGroup:
    key: tuple  # (history length, words-per-utterance tuple)
    indices: np.ndarray       # positions in the original sample sequence
    raw_wt_means: np.ndarray  # (B, J, word_text_dim)
    raw_ws_means: np.ndarray  # (B, J, word_speech_dim)
    raw_ut: np.ndarray        # (B, J, utt_text_dim)
    raw_us: np.ndarray        # (B, J, utt_speech_dim)
    speakers: np.ndarray      # (B, J) int64
    raw_cur: np.ndarray       # (B, utt_text_dim)
    targets: np.ndarray       # (B, 2)

    @property
    def size(self) -> int:
        return self.indices.shape[0]

    @property
    def n_history(self) -> int:
        return self.raw_ut.shape[1]

    def take(self, rows: np.ndarray) -> "SampleGroup":
        return SampleGroup(key=self.key, indices=self.indices[rows],
                           raw_wt_means=self.raw_wt_means[rows],
                           raw_ws_means=self.raw_ws_means[rows],
                           raw_ut=self.raw_ut[rows], raw_us=self.raw_us[rows],
                           speakers=self.speakers[rows], raw_cur=self.raw_cur[rows],
                           targets=self.targets[rows])


def build_groups(samples: list[TrainingSample]) -> list[SampleGroup]:
    """Bucket samples by shape signature; groups are sorted by key."""
    buckets: dict[tuple, list[int]] = {}
    for idx, s in enumerate(samples):
        key = (len(s.history), tuple(len(u.words) for u in s.history))
        buckets.setdefault(key, []).append(idx)
    groups = []
    for key in sorted(buckets):
        idxs = buckets[key]
        hist_len = key[0]
        wt = np.stack([np.stack([samples[i].history[j].word_text_feats.mean(axis=0)
                                 for j in range(hist_len)]) for i in idxs])
        ws = np.stack([np.stack([samples[i].history[j].word_speech_feats.mean(axis=0)
                                 for j in range(hist_len)]) for i in idxs])
        ut = np.stack([np.stack([samples[i].history[j].utt_text_feat
                                 for j in range(hist_len)]) for i in idxs])
        us = np.stack([np.stack([samples[i].history[j].utt_speech_feat
                                 for j in range(hist_len)]) for i in idxs])
        spk = np.array([[samples[i].history[j].speaker_id for j in range(hist_len)]
                        for i in idxs], dtype=np.int64)
        cur = np.stack([samples[i].current.utt_text_feat for i in idxs])
        tgt = np.array([[samples[i].current.pitch_target,
                         samples[i].current.energy_target] for i in idxs])
        groups.append(SampleGroup(key=key, indices=np.array(idxs, dtype=np.int64),
                                  raw_wt_means=wt, raw_ws_means=ws, raw_ut=ut,
                                  raw_us=us, speakers=spk, raw_cur=cur, targets=tgt))
    return groups


@dataclass(frozen=True, eq=False)
class _GraphBatchCache:
    proj_wt: np.ndarray   # (B, J, d)
    proj_ws: np.ndarray
    proj_bb: np.ndarray
    events: tuple         # (pos, self (B,d), bb (B,d), z (B,d))
    states: tuple
    pooled: np.ndarray
    semantic: bool
    spk_applied: bool


@dataclass(frozen=True, eq=False)
class BatchCache:
    semantic: _GraphBatchCache | None
    prosody: _GraphBatchCache | None
    head_in: np.ndarray
    z1: np.ndarray
    hidden: np.ndarray
    predictions: np.ndarray


def _activate_batch(z: np.ndarray, normalize: bool) -> np.ndarray:
    r = np.maximum(z, 0.0)
    if not normalize:
        return r
    n = np.linalg.norm(r, axis=1, keepdims=True)
    return r / (n + _NORM_EPS)


def _graph_forward(group: SampleGroup, params: ModelParams, semantic: bool,
                   settings: EncoderSettings) -> _GraphBatchCache:
    proj = params.projection
    sage = params.sage_semantic if semantic else params.sage_prosody
    b = group.size
    j = group.n_history
    p_wt = group.raw_wt_means @ proj.word_text_w + proj.word_text_b
    p_ws = group.raw_ws_means @ proj.word_speech_w + proj.word_speech_b
    if semantic:
        p_bb = group.raw_ut @ proj.utt_text_w + proj.utt_text_b
    else:
        p_bb = group.raw_us @ proj.utt_speech_w + proj.utt_speech_b
    spk_applied = semantic or settings.speaker_to_prosody
    if spk_applied:
        if group.speakers.max(initial=-1) >= proj.n_speakers or \
           group.speakers.min(initial=0) < 0:
            raise ValueError("speaker id outside the embedding table")
        p_bb = p_bb + proj.speaker_emb[group.speakers]
    x = [p_bb[:, i] for i in range(j)] + [np.zeros((b, proj.d_model))]
    events = []
    for _ in range(settings.passes):
        for pos in range(1, j + 1):
            z = (x[pos] @ sage.self_w + x[pos - 1] @ sage.backbone_w
                 + p_wt[:, pos - 1] @ sage.word_semantic_w
                 + p_ws[:, pos - 1] @ sage.word_prosody_w + sage.bias)
            events.append((pos, x[pos], x[pos - 1], z))
            x[pos] = _activate_batch(z, settings.normalize)
    acc = x[0].copy()
    for state in x[1:]:
        acc += state
    pooled = acc / (j + 1)
    return _GraphBatchCache(proj_wt=p_wt, proj_ws=p_ws, proj_bb=p_bb,
                            events=tuple(events), states=tuple(x), pooled=pooled,
                            semantic=semantic, spk_applied=spk_applied)


def batch_forward(group: SampleGroup, params: ModelParams, mode: AblationMode,
                  settings: EncoderSettings = EncoderSettings()
                  ) -> tuple[np.ndarray, BatchCache]:
    b = group.size
    d = params.d_model
    sem = _graph_forward(group, params, True, settings) if mode.use_semantic else None
    pro = _graph_forward(group, params, False, settings) if mode.use_prosody else None
    pooled_s = sem.pooled if sem is not None else np.zeros((b, d))
    pooled_p = pro.pooled if pro is not None else np.zeros((b, d))
    cur = group.raw_cur @ params.projection.utt_text_w + params.projection.utt_text_b
    head_in = np.concatenate([pooled_s, pooled_p, cur], axis=1)
    z1 = head_in @ params.head.w1 + params.head.b1
    hidden = np.maximum(z1, 0.0)
    preds = hidden @ params.head.w2 + params.head.b2
    return preds, BatchCache(semantic=sem, prosody=pro, head_in=head_in, z1=z1,
                             hidden=hidden, predictions=preds)


def _graph_backward(group: SampleGroup, cache: _GraphBatchCache, sage: SageParams,
                    grads: ModelParams, d_pooled: np.ndarray,
                    settings: EncoderSettings) -> None:
    j = group.n_history
    proj_g = grads.projection
    sage_g = grads.sage_semantic if cache.semantic else grads.sage_prosody
    share = d_pooled / (j + 1)
    dx = [share.copy() for _ in range(j + 1)]
    d_wt = np.zeros_like(cache.proj_wt)
    d_ws = np.zeros_like(cache.proj_ws)
    for pos, self_mat, bb_mat, z in reversed(cache.events):
        df = dx[pos]
        if settings.normalize:
            r = np.maximum(z, 0.0)
            n = np.linalg.norm(r, axis=1, keepdims=True)
            denom = n + _NORM_EPS
            inner = (r * df).sum(axis=1, keepdims=True)
            safe = n > 0.0
            dr = df / denom - np.where(safe, r * (inner / np.where(safe, n * denom ** 2, 1.0)), 0.0)
        else:
            dr = df
        dz = np.where(z > 0.0, dr, 0.0)
        sage_g.bias += dz.sum(axis=0)
        sage_g.self_w += self_mat.T @ dz
        dx[pos] = dz @ sage.self_w.T
        sage_g.backbone_w += bb_mat.T @ dz
        dx[pos - 1] = dx[pos - 1] + dz @ sage.backbone_w.T
        sage_g.word_semantic_w += cache.proj_wt[:, pos - 1].T @ dz
        d_wt[:, pos - 1] += dz @ sage.word_semantic_w.T
        sage_g.word_prosody_w += cache.proj_ws[:, pos - 1].T @ dz
        d_ws[:, pos - 1] += dz @ sage.word_prosody_w.T
    d_bb = np.stack(dx[:j], axis=1)  # (B, J, d)
    d_model = d_bb.shape[2]
    if cache.semantic:
        proj_g.utt_text_w += group.raw_ut.reshape(-1, group.raw_ut.shape[2]).T \
            @ d_bb.reshape(-1, d_model)
        proj_g.utt_text_b += d_bb.sum(axis=(0, 1))
    else:
        proj_g.utt_speech_w += group.raw_us.reshape(-1, group.raw_us.shape[2]).T \
            @ d_bb.reshape(-1, d_model)
        proj_g.utt_speech_b += d_bb.sum(axis=(0, 1))
    if cache.spk_applied:
        np.add.at(proj_g.speaker_emb, group.speakers.ravel(),
                  d_bb.reshape(-1, d_model))
    proj_g.word_text_w += group.raw_wt_means.reshape(-1, group.raw_wt_means.shape[2]).T \
        @ d_wt.reshape(-1, d_model)
    proj_g.word_text_b += d_wt.sum(axis=(0, 1))
    proj_g.word_speech_w += group.raw_ws_means.reshape(-1, group.raw_ws_means.shape[2]).T \
        @ d_ws.reshape(-1, d_model)
    proj_g.word_speech_b += d_ws.sum(axis=(0, 1))


def batch_backward(group: SampleGroup, params: ModelParams, mode: AblationMode,
                   cache: BatchCache, d_out: np.ndarray,
                   settings: EncoderSettings = EncoderSettings(),
                   grads: ModelParams | None = None) -> ModelParams:
    """Accumulate parameter gradients for the given output gradients (B, 2)."""
    if grads is None:
        grads = zero_grads_like(params)
    d = params.d_model
    grads.head.b2 += d_out.sum(axis=0)
    grads.head.w2 += cache.hidden.T @ d_out
    d_hidden = d_out @ params.head.w2.T
    dz1 = np.where(cache.z1 > 0.0, d_hidden, 0.0)
    grads.head.b1 += dz1.sum(axis=0)
    grads.head.w1 += cache.head_in.T @ dz1
    d_head_in = dz1 @ params.head.w1.T
    d_pooled_s = d_head_in[:, :d]
    d_pooled_p = d_head_in[:, d:2 * d]
    d_cur = d_head_in[:, 2 * d:]
    grads.projection.utt_text_w += group.raw_cur.T @ d_cur
    grads.projection.utt_text_b += d_cur.sum(axis=0)
    if mode.use_semantic:
        _graph_backward(group, cache.semantic, params.sage_semantic, grads,
                        d_pooled_s, settings)
    if mode.use_prosody:
        _graph_backward(group, cache.prosody, params.sage_prosody, grads,
                        d_pooled_p, settings)
    return grads


def predict_samples(samples: list[TrainingSample], params: ModelParams,
                    mode: AblationMode,
                    settings: EncoderSettings = EncoderSettings(),
                    groups: list[SampleGroup] | None = None) -> np.ndarray:
    """Predictions for every sample, returned in sample order."""
    if groups is None:
        groups = build_groups(samples)
    n = sum(g.size for g in groups)
    out = np.zeros((n, 2))
    for g in groups:
        preds, _ = batch_forward(g, params, mode, settings)
        out[g.indices] = preds
    return out
