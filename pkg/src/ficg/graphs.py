"""Heterogeneous interaction graphs over a dialogue history.

Both graph flavors share one topology. For a history of J utterances there
are J backbone nodes chained left to right, one terminal interaction node,
and per utterance i (0-based) its word-text and word-speech nodes, all of
which point at backbone position i+1 (the interaction node when i is last).
The semantic flavor carries utterance text features on the backbone, the
prosody flavor utterance speech features; word nodes are identical in both.

The interaction node starts from a zero feature and is the unique sink.
Edges are directed; graphs are immutable once built.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .data import UtteranceRecord


class Modality(Enum):
    SEMANTIC = "semantic"
    PROSODY = "prosody"


class NodeKind(Enum):
    BACKBONE = "backbone"
    WORD_SEMANTIC = "word_semantic"
    WORD_PROSODY = "word_prosody"
    INTERACTION = "interaction"


class EdgeKind(Enum):
    BACKBONE = "backbone"
    WORD_SEMANTIC = "word_semantic"
    WORD_PROSODY = "word_prosody"


@dataclass(frozen=True, eq=False)
class GraphNode:
    node_id: int
    kind: NodeKind
    utt_index: int | None   # history position, None for the interaction node
    word_index: int | None  # position within the utterance, word nodes only
    feat: np.ndarray
    speaker_id: int | None  # recorded on backbone nodes


@dataclass(frozen=True)
class GraphEdge:
    src: int
    dst: int
    kind: EdgeKind


@dataclass(frozen=True, eq=False)
class InteractionGraph:
    modality: Modality
    nodes: tuple[GraphNode, ...]
    edges: tuple[GraphEdge, ...]
    backbone_order: tuple[int, ...]  # backbone node ids in order, interaction last

    @property
    def n_history(self) -> int:
        return len(self.backbone_order) - 1

    @property
    def interaction_id(self) -> int:
        return self.backbone_order[-1]


@dataclass(frozen=True)
class TopologyCounts:
    n_nodes: int
    n_edges: int
    nodes_by_kind: dict[NodeKind, int]
    edges_by_kind: dict[EdgeKind, int]
    in_degree_hist: dict[int, int]


def _build(history, modality: Modality) -> InteractionGraph:
    history = tuple(history)
    if len(history) == 0:
        raise ValueError("history must contain at least one utterance")
    j = len(history)
    nodes: list[GraphNode] = []
    edges: list[GraphEdge] = []
    for i, utt in enumerate(history):
        bb_feat = utt.utt_text_feat if modality is Modality.SEMANTIC else utt.utt_speech_feat
        nodes.append(GraphNode(node_id=i, kind=NodeKind.BACKBONE, utt_index=i,
                               word_index=None, feat=bb_feat, speaker_id=utt.speaker_id))
    backbone_dim = nodes[0].feat.shape[0]
    nodes.append(GraphNode(node_id=j, kind=NodeKind.INTERACTION, utt_index=None,
                           word_index=None, feat=np.zeros(backbone_dim),
                           speaker_id=None))
    # backbone chain; word nodes of utterance i feed position i+1, so the
    # last utterance's words feed the interaction node (id j)
    for i in range(j):
        edges.append(GraphEdge(src=i, dst=i + 1, kind=EdgeKind.BACKBONE))
    next_id = j + 1
    for i, utt in enumerate(history):
        for w in range(len(utt.words)):
            nodes.append(GraphNode(node_id=next_id, kind=NodeKind.WORD_SEMANTIC,
                                   utt_index=i, word_index=w,
                                   feat=utt.word_text_feats[w], speaker_id=None))
            edges.append(GraphEdge(src=next_id, dst=i + 1, kind=EdgeKind.WORD_SEMANTIC))
            next_id += 1
        for w in range(len(utt.words)):
            nodes.append(GraphNode(node_id=next_id, kind=NodeKind.WORD_PROSODY,
                                   utt_index=i, word_index=w,
                                   feat=utt.word_speech_feats[w], speaker_id=None))
            edges.append(GraphEdge(src=next_id, dst=i + 1, kind=EdgeKind.WORD_PROSODY))
            next_id += 1
    return InteractionGraph(modality=modality, nodes=tuple(nodes), edges=tuple(edges),
                            backbone_order=tuple(range(j + 1)))


def build_sig(history) -> InteractionGraph:
    """Semantic interaction graph: backbone carries utterance text features."""
    return _build(history, Modality.SEMANTIC)


def build_pig(history) -> InteractionGraph:
    """Prosody interaction graph: backbone carries utterance speech features."""
    return _build(history, Modality.PROSODY)


def topology_counts(graph: InteractionGraph) -> TopologyCounts:
    """Counts computed by exhaustive traversal of the stored nodes and edges."""
    nodes_by_kind = Counter(n.kind for n in graph.nodes)
    edges_by_kind = Counter(e.kind for e in graph.edges)
    in_deg = Counter()
    for node in graph.nodes:
        in_deg[node.node_id] = 0
    for e in graph.edges:
        in_deg[e.dst] += 1
    hist = Counter(in_deg.values())
    return TopologyCounts(n_nodes=len(graph.nodes), n_edges=len(graph.edges),
                          nodes_by_kind=dict(nodes_by_kind),
                          edges_by_kind=dict(edges_by_kind),
                          in_degree_hist=dict(sorted(hist.items())))


def check_graph(graph: InteractionGraph) -> None:
    """Verify structural invariants; raise ValueError on violation.

    Checked by traversal: ids are unique and edge endpoints exist, the graph
    is acyclic, the interaction node is the unique sink, word nodes have
    out-degree exactly one, and the first backbone node has in-degree zero.
    """
    ids = [n.node_id for n in graph.nodes]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate node ids")
    id_set = set(ids)
    out_deg = {i: 0 for i in ids}
    in_deg = {i: 0 for i in ids}
    adj: dict[int, list[int]] = {i: [] for i in ids}
    for e in graph.edges:
        if e.src not in id_set or e.dst not in id_set:
            raise ValueError(f"edge {e.src}->{e.dst} references a missing node")
        out_deg[e.src] += 1
        in_deg[e.dst] += 1
        adj[e.src].append(e.dst)
    kind_of = {n.node_id: n.kind for n in graph.nodes}
    sinks = [i for i in ids if out_deg[i] == 0]
    if len(sinks) != 1 or kind_of[sinks[0]] is not NodeKind.INTERACTION:
        raise ValueError(f"expected the interaction node as unique sink, got {sinks}")
    for n in graph.nodes:
        if n.kind in (NodeKind.WORD_SEMANTIC, NodeKind.WORD_PROSODY):
            if out_deg[n.node_id] != 1:
                raise ValueError(f"word node {n.node_id} has out-degree {out_deg[n.node_id]}")
    first = graph.backbone_order[0]
    if in_deg[first] != 0:
        raise ValueError("first backbone node must have in-degree zero")
    # Kahn topological sort; leftovers mean a cycle
    pending = dict(in_deg)
    frontier = [i for i in ids if pending[i] == 0]
    visited = 0
    while frontier:
        cur = frontier.pop()
        visited += 1
        for nxt in adj[cur]:
            pending[nxt] -= 1
            if pending[nxt] == 0:
                frontier.append(nxt)
    if visited != len(ids):
        raise ValueError("graph contains a cycle")


_DOT_STYLE = {EdgeKind.BACKBONE: "solid",
              EdgeKind.WORD_SEMANTIC: "dashed",
              EdgeKind.WORD_PROSODY: "dotted"}


def _node_label(node: GraphNode) -> str:
    if node.kind is NodeKind.BACKBONE:
        return f"utt{node.utt_index}"
    if node.kind is NodeKind.INTERACTION:
        return "interaction"
    tag = "wt" if node.kind is NodeKind.WORD_SEMANTIC else "ws"
    return f"{tag}{node.utt_index}.{node.word_index}"


def export_dot(graph: InteractionGraph) -> str:
    """Deterministic DOT rendering: nodes in id order, edges in stored order."""
    lines = [f"digraph {graph.modality.value}_interaction_graph {{", "  rankdir=LR;"]
    for node in graph.nodes:
        shape = "box" if node.kind in (NodeKind.BACKBONE, NodeKind.INTERACTION) else "ellipse"
        lines.append(f'  n{node.node_id} [label="{_node_label(node)}" '
                     f'kind="{node.kind.value}" shape={shape}];')
    for e in graph.edges:
        lines.append(f'  n{e.src} -> n{e.dst} [style={_DOT_STYLE[e.kind]} '
                     f'kind="{e.kind.value}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
