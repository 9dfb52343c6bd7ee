"""Graph encoder: input projections and mean-aggregating ReLU updates.

All features are projected into a shared model space first. A single sweep
then walks the backbone left to right; each position is replaced by

    relu(self @ W_self + sum_over_present_kinds(mean(neighbors) @ W_kind) + bias)

where the neighbor kinds are the backbone predecessor and the two word
branches, and absent kinds contribute nothing. The first backbone state is
never updated; the interaction node enters its update with a zero self
feature. The encoder output pools all backbone states plus the interaction
state with a left-to-right arithmetic mean.

Weight convention: row vectors, `out = x @ W`, so a weight has shape
(in_dim, out_dim). A `passes` setting repeats the sweep on the evolving
states; optional l2 normalization rescales each updated state to unit norm
(with a 1e-12 guard). Speaker embeddings are added to backbone projections
of the semantic flavor, and to the prosody flavor only when requested.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import FeatureDims
from .graphs import EdgeKind, InteractionGraph, Modality, NodeKind

_NORM_EPS = 1e-12


@dataclass(frozen=True)
class EncoderSettings:
    passes: int = 1
    normalize: bool = False
    speaker_to_prosody: bool = False


@dataclass(eq=False)
class ProjectionParams:
    """Mutable: gradient accumulation and optimizer steps write the fields."""
    word_text_w: np.ndarray    # (word_text_dim, d_model)
    word_text_b: np.ndarray    # (d_model,)
    word_speech_w: np.ndarray
    word_speech_b: np.ndarray
    utt_text_w: np.ndarray
    utt_text_b: np.ndarray
    utt_speech_w: np.ndarray
    utt_speech_b: np.ndarray
    speaker_emb: np.ndarray    # (n_speakers, d_model)

    @property
    def d_model(self) -> int:
        return self.word_text_w.shape[1]

    @property
    def n_speakers(self) -> int:
        return self.speaker_emb.shape[0]


@dataclass(eq=False)
class SageParams:
    self_w: np.ndarray           # (d_model, d_model)
    backbone_w: np.ndarray
    word_semantic_w: np.ndarray
    word_prosody_w: np.ndarray
    bias: np.ndarray             # (d_model,)


@dataclass(frozen=True, eq=False)
class EncoderOutput:
    pooled: np.ndarray
    backbone_states: tuple[np.ndarray, ...]  # J backbone states then interaction


def _uniform_fan_in(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    bound = 1.0 / np.sqrt(shape[0])
    return rng.uniform(-bound, bound, shape)


def init_projection(dims: FeatureDims, d_model: int, n_speakers: int,
                    rng: np.random.Generator) -> ProjectionParams:
    """Weights uniform in (-1/sqrt(fan_in), +1/sqrt(fan_in)); biases and the
    speaker table start at zero. Draw order matches field order."""
    return ProjectionParams(
        word_text_w=_uniform_fan_in(rng, (dims.word_text, d_model)),
        word_text_b=np.zeros(d_model),
        word_speech_w=_uniform_fan_in(rng, (dims.word_speech, d_model)),
        word_speech_b=np.zeros(d_model),
        utt_text_w=_uniform_fan_in(rng, (dims.utt_text, d_model)),
        utt_text_b=np.zeros(d_model),
        utt_speech_w=_uniform_fan_in(rng, (dims.utt_speech, d_model)),
        utt_speech_b=np.zeros(d_model),
        speaker_emb=np.zeros((n_speakers, d_model)),
    )


def init_sage(d_model: int, rng: np.random.Generator) -> SageParams:
    return SageParams(
        self_w=_uniform_fan_in(rng, (d_model, d_model)),
        backbone_w=_uniform_fan_in(rng, (d_model, d_model)),
        word_semantic_w=_uniform_fan_in(rng, (d_model, d_model)),
        word_prosody_w=_uniform_fan_in(rng, (d_model, d_model)),
        bias=np.zeros(d_model),
    )


def zero_projection_like(p: ProjectionParams) -> ProjectionParams:
    return ProjectionParams(*(np.zeros_like(getattr(p, f))
                              for f in ("word_text_w", "word_text_b", "word_speech_w",
                                        "word_speech_b", "utt_text_w", "utt_text_b",
                                        "utt_speech_w", "utt_speech_b", "speaker_emb")))


def zero_sage_like(s: SageParams) -> SageParams:
    return SageParams(np.zeros_like(s.self_w), np.zeros_like(s.backbone_w),
                      np.zeros_like(s.word_semantic_w), np.zeros_like(s.word_prosody_w),
                      np.zeros_like(s.bias))


def _project_one(x: np.ndarray, w: np.ndarray, b: np.ndarray, what: str) -> np.ndarray:
    if x.shape[0] != w.shape[0]:
        raise ValueError(f"{what}: feature dim {x.shape[0]} does not match "
                         f"projection input dim {w.shape[0]}")
    return x @ w + b


def project_inputs(graph: InteractionGraph, proj: ProjectionParams,
                   *, speaker_to_prosody: bool = False) -> dict[int, np.ndarray]:
    """Project every node feature into model space.

    Word nodes use their source-specific projection in both graph flavors.
    Backbone nodes use the utterance text (semantic) or speech (prosody)
    projection; the recorded speaker's embedding row is added to semantic
    backbone projections (prosody only with speaker_to_prosody). The
    interaction node maps to the zero vector untouched.
    """
    add_spk = graph.modality is Modality.SEMANTIC or speaker_to_prosody
    out: dict[int, np.ndarray] = {}
    for node in graph.nodes:
        if node.kind is NodeKind.INTERACTION:
            out[node.node_id] = np.zeros(proj.d_model)
        elif node.kind is NodeKind.WORD_SEMANTIC:
            out[node.node_id] = _project_one(node.feat, proj.word_text_w,
                                             proj.word_text_b, "word text feature")
        elif node.kind is NodeKind.WORD_PROSODY:
            out[node.node_id] = _project_one(node.feat, proj.word_speech_w,
                                             proj.word_speech_b, "word speech feature")
        else:
            if graph.modality is Modality.SEMANTIC:
                vec = _project_one(node.feat, proj.utt_text_w, proj.utt_text_b,
                                   "utterance text feature")
            else:
                vec = _project_one(node.feat, proj.utt_speech_w, proj.utt_speech_b,
                                   "utterance speech feature")
            if add_spk:
                spk = node.speaker_id
                if spk is None or not (0 <= spk < proj.n_speakers):
                    raise ValueError(f"backbone node {node.node_id}: speaker id {spk} "
                                     f"outside the embedding table of size {proj.n_speakers}")
                vec = vec + proj.speaker_emb[spk]
            out[node.node_id] = vec
    return out


def average_pool(vectors) -> np.ndarray:
    """Arithmetic mean with left-to-right summation order."""
    vectors = list(vectors)
    if not vectors:
        raise ValueError("average_pool needs at least one vector")
    acc = np.array(vectors[0], dtype=np.float64, copy=True)
    for v in vectors[1:]:
        acc += v
    return acc / len(vectors)


def _sage_pre(self_feat: np.ndarray, means: dict[EdgeKind, np.ndarray],
              sage: SageParams) -> np.ndarray:
    z = self_feat @ sage.self_w + sage.bias
    if EdgeKind.BACKBONE in means:
        z = z + means[EdgeKind.BACKBONE] @ sage.backbone_w
    if EdgeKind.WORD_SEMANTIC in means:
        z = z + means[EdgeKind.WORD_SEMANTIC] @ sage.word_semantic_w
    if EdgeKind.WORD_PROSODY in means:
        z = z + means[EdgeKind.WORD_PROSODY] @ sage.word_prosody_w
    return z


def _activate(z: np.ndarray, normalize: bool) -> np.ndarray:
    r = np.maximum(z, 0.0)
    if not normalize:
        return r
    return r / (np.linalg.norm(r) + _NORM_EPS)


def sage_update(self_feat: np.ndarray, neighbors: dict[EdgeKind, list[np.ndarray]],
                sage: SageParams, *, normalize: bool = False) -> np.ndarray:
    """One update: kinds with no neighbors contribute nothing."""
    means = {kind: average_pool(vecs) for kind, vecs in neighbors.items() if len(vecs)}
    return _activate(_sage_pre(self_feat, means, sage), normalize)


@dataclass(frozen=True, eq=False)
class EncodeCache:
    """Everything the reverse pass needs, in forward order."""
    raw_backbone: np.ndarray       # (J, backbone_raw_dim)
    speakers: tuple[int, ...]
    raw_wt_means: np.ndarray       # (J, word_text_dim) raw word-text means
    raw_ws_means: np.ndarray
    proj_wt_means: np.ndarray      # (J, d_model) projected word-branch means
    proj_ws_means: np.ndarray
    proj_backbone: np.ndarray      # (J, d_model) including speaker embedding
    events: tuple                  # (pos, self_vec, bb_vec, z) per update
    states: tuple[np.ndarray, ...] # final states, interaction last
    pooled: np.ndarray
    modality: Modality
    spk_applied: bool


def encode_with_cache(graph: InteractionGraph, proj: ProjectionParams,
                      sage: SageParams,
                      settings: EncoderSettings = EncoderSettings()
                      ) -> tuple[EncoderOutput, EncodeCache]:
    if settings.passes < 1:
        raise ValueError("passes must be >= 1")
    projected = project_inputs(graph, proj,
                               speaker_to_prosody=settings.speaker_to_prosody)
    j = graph.n_history
    pos_of = {nid: k for k, nid in enumerate(graph.backbone_order)}

    # word neighbors arrive at backbone position utt_index + 1
    wt_lists: list[list[np.ndarray]] = [[] for _ in range(j + 1)]
    ws_lists: list[list[np.ndarray]] = [[] for _ in range(j + 1)]
    raw_wt: list[list[np.ndarray]] = [[] for _ in range(j + 1)]
    raw_ws: list[list[np.ndarray]] = [[] for _ in range(j + 1)]
    node_by_id = {n.node_id: n for n in graph.nodes}
    for e in graph.edges:
        if e.kind is EdgeKind.BACKBONE:
            continue
        pos = pos_of[e.dst]
        node = node_by_id[e.src]
        if e.kind is EdgeKind.WORD_SEMANTIC:
            wt_lists[pos].append(projected[e.src])
            raw_wt[pos].append(node.feat)
        else:
            ws_lists[pos].append(projected[e.src])
            raw_ws[pos].append(node.feat)

    proj_wt_means = np.stack([average_pool(wt_lists[pos]) for pos in range(1, j + 1)])
    proj_ws_means = np.stack([average_pool(ws_lists[pos]) for pos in range(1, j + 1)])
    raw_wt_means = np.stack([average_pool(raw_wt[pos]) for pos in range(1, j + 1)])
    raw_ws_means = np.stack([average_pool(raw_ws[pos]) for pos in range(1, j + 1)])

    x = [projected[nid] for nid in graph.backbone_order]
    proj_backbone = np.stack(x[:j])
    events = []
    for _ in range(settings.passes):
        for pos in range(1, j + 1):
            means = {EdgeKind.BACKBONE: x[pos - 1],
                     EdgeKind.WORD_SEMANTIC: proj_wt_means[pos - 1],
                     EdgeKind.WORD_PROSODY: proj_ws_means[pos - 1]}
            z = _sage_pre(x[pos], means, sage)
            events.append((pos, x[pos], x[pos - 1], z))
            x[pos] = _activate(z, settings.normalize)
    pooled = average_pool(x)

    backbone_nodes = [node_by_id[nid] for nid in graph.backbone_order[:j]]
    raw_backbone = np.stack([n.feat for n in backbone_nodes])
    speakers = tuple(n.speaker_id for n in backbone_nodes)
    spk_applied = graph.modality is Modality.SEMANTIC or settings.speaker_to_prosody
    output = EncoderOutput(pooled=pooled, backbone_states=tuple(x))
    cache = EncodeCache(raw_backbone=raw_backbone, speakers=speakers,
                        raw_wt_means=raw_wt_means, raw_ws_means=raw_ws_means,
                        proj_wt_means=proj_wt_means, proj_ws_means=proj_ws_means,
                        proj_backbone=proj_backbone, events=tuple(events),
                        states=tuple(x), pooled=pooled, modality=graph.modality,
                        spk_applied=spk_applied)
    return output, cache


def encode(graph: InteractionGraph, proj: ProjectionParams, sage: SageParams,
           settings: EncoderSettings = EncoderSettings()) -> EncoderOutput:
    return encode_with_cache(graph, proj, sage, settings)[0]
