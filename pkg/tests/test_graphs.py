import numpy as np
import pytest

from ficg.data import FeatureDims, UtteranceRecord
from ficg.graphs import (EdgeKind, GraphEdge, GraphNode, InteractionGraph,
                         Modality, NodeKind, build_pig, build_sig, check_graph,
                         export_dot, topology_counts)

DIMS = FeatureDims(3, 3, 4, 4)


def make_history(word_counts, dims=DIMS, rng=None):
    rng = rng or np.random.default_rng(0)
    utts = []
    for i, q in enumerate(word_counts):
        utts.append(UtteranceRecord(
            speaker_id=i % 2,
            words=tuple(f"w{k}" for k in range(q)),
            word_text_feats=rng.normal(size=(q, dims.word_text)),
            word_speech_feats=rng.normal(size=(q, dims.word_speech)),
            utt_text_feat=rng.normal(size=dims.utt_text),
            utt_speech_feat=rng.normal(size=dims.utt_speech),
            pitch_target=0.0, energy_target=0.0))
    return tuple(utts)


# ---------------------------------------------------------------------------
# enumeration oracle: J=3, q=[2,3,1], counted by hand
#   backbone utt0, utt1, utt2           -> 3 nodes
#   interaction                          -> 1 node
#   word nodes: (2+3+1) text + speech    -> 12 nodes,  total 16
#   backbone edges 0->1->2->interaction  -> 3 edges
#   word edges: one per word node        -> 12 edges,  total 15


def test_enumeration_oracle_j3():
    graph = build_sig(make_history([2, 3, 1]))
    counts = topology_counts(graph)
    assert counts.n_nodes == 16
    assert counts.n_edges == 15
    assert counts.nodes_by_kind == {NodeKind.BACKBONE: 3, NodeKind.INTERACTION: 1,
                                    NodeKind.WORD_SEMANTIC: 6, NodeKind.WORD_PROSODY: 6}
    assert counts.edges_by_kind == {EdgeKind.BACKBONE: 3, EdgeKind.WORD_SEMANTIC: 6,
                                    EdgeKind.WORD_PROSODY: 6}


def test_enumeration_oracle_in_degrees():
    # position i+1 receives 1 backbone edge + 2*q_i word edges
    graph = build_pig(make_history([2, 3, 1]))
    in_deg = {n.node_id: 0 for n in graph.nodes}
    for e in graph.edges:
        in_deg[e.dst] += 1
    assert in_deg[0] == 0
    assert in_deg[1] == 1 + 2 * 2
    assert in_deg[2] == 1 + 2 * 3
    assert in_deg[graph.interaction_id] == 1 + 2 * 1
    word_ids = [n.node_id for n in graph.nodes
                if n.kind in (NodeKind.WORD_SEMANTIC, NodeKind.WORD_PROSODY)]
    assert all(in_deg[i] == 0 for i in word_ids)


def test_word_nodes_feed_the_next_backbone_position():
    graph = build_sig(make_history([1, 2]))
    dst_of = {e.src: e.dst for e in graph.edges
              if e.kind is not EdgeKind.BACKBONE}
    for node in graph.nodes:
        if node.kind in (NodeKind.WORD_SEMANTIC, NodeKind.WORD_PROSODY):
            assert dst_of[node.node_id] == node.utt_index + 1


def test_counts_match_closed_form_on_random_shapes():
    rng = np.random.default_rng(42)
    for _ in range(50):
        j = int(rng.integers(1, 9))
        qs = [int(rng.integers(1, 7)) for _ in range(j)]
        graph = build_sig(make_history(qs, rng=rng))
        counts = topology_counts(graph)
        assert counts.n_nodes == j + 1 + 2 * sum(qs)
        assert counts.n_edges == j + 2 * sum(qs)
        check_graph(graph)


def test_sig_and_pig_share_one_topology():
    rng = np.random.default_rng(7)
    for _ in range(20):
        j = int(rng.integers(1, 6))
        history = make_history([int(rng.integers(1, 5)) for _ in range(j)], rng=rng)
        sig, pig = build_sig(history), build_pig(history)
        assert [(n.node_id, n.kind) for n in sig.nodes] == \
               [(n.node_id, n.kind) for n in pig.nodes]
        assert sig.edges == pig.edges
        assert sig.backbone_order == pig.backbone_order


def test_backbone_features_differ_by_modality():
    history = make_history([2, 1])
    sig, pig = build_sig(history), build_pig(history)
    for i, utt in enumerate(history):
        assert np.array_equal(sig.nodes[i].feat, utt.utt_text_feat)
        assert np.array_equal(pig.nodes[i].feat, utt.utt_speech_feat)
        assert sig.nodes[i].speaker_id == utt.speaker_id
    # word nodes carry the same features in both flavors
    for ns, npi in zip(sig.nodes, pig.nodes):
        if ns.kind in (NodeKind.WORD_SEMANTIC, NodeKind.WORD_PROSODY):
            assert np.array_equal(ns.feat, npi.feat)


def test_interaction_node_starts_from_zero():
    graph = build_pig(make_history([2]))
    inter = graph.nodes[graph.interaction_id]
    assert inter.kind is NodeKind.INTERACTION
    assert np.array_equal(inter.feat, np.zeros(DIMS.utt_speech))
    assert inter.utt_index is None


def test_empty_history_rejected():
    with pytest.raises(ValueError, match="at least one utterance"):
        build_sig(())


# ---------------------------------------------------------------------------
# structural checker


def _tiny_graph(edges):
    feat = np.zeros(2)
    nodes = (GraphNode(0, NodeKind.BACKBONE, 0, None, feat, 0),
             GraphNode(1, NodeKind.INTERACTION, None, None, feat, None),
             GraphNode(2, NodeKind.WORD_SEMANTIC, 0, 0, feat, None))
    return InteractionGraph(modality=Modality.SEMANTIC, nodes=nodes,
                            edges=tuple(edges), backbone_order=(0, 1))


def test_check_graph_accepts_built_graphs():
    check_graph(build_sig(make_history([3, 1, 2])))
    check_graph(build_pig(make_history([1])))


def test_check_graph_rejects_duplicate_ids():
    feat = np.zeros(2)
    nodes = (GraphNode(0, NodeKind.BACKBONE, 0, None, feat, 0),
             GraphNode(0, NodeKind.INTERACTION, None, None, feat, None))
    graph = InteractionGraph(Modality.SEMANTIC, nodes, (), (0, 0))
    with pytest.raises(ValueError, match="duplicate node ids"):
        check_graph(graph)


def test_check_graph_rejects_dangling_edge():
    graph = _tiny_graph([GraphEdge(0, 9, EdgeKind.BACKBONE)])
    with pytest.raises(ValueError, match="missing node"):
        check_graph(graph)


def test_check_graph_rejects_word_fanout():
    graph = _tiny_graph([GraphEdge(0, 1, EdgeKind.BACKBONE),
                         GraphEdge(2, 1, EdgeKind.WORD_SEMANTIC),
                         GraphEdge(2, 0, EdgeKind.WORD_SEMANTIC)])
    with pytest.raises(ValueError, match="out-degree"):
        check_graph(graph)


def test_check_graph_rejects_cycle():
    feat = np.zeros(2)
    nodes = (GraphNode(0, NodeKind.BACKBONE, 0, None, feat, 0),
             GraphNode(1, NodeKind.BACKBONE, 1, None, feat, 1),
             GraphNode(2, NodeKind.INTERACTION, None, None, feat, None))
    edges = (GraphEdge(0, 1, EdgeKind.BACKBONE), GraphEdge(1, 0, EdgeKind.BACKBONE),
             GraphEdge(0, 2, EdgeKind.BACKBONE))
    graph = InteractionGraph(Modality.SEMANTIC, nodes, edges, (0, 1, 2))
    with pytest.raises(ValueError):
        check_graph(graph)


def test_check_graph_rejects_second_sink():
    # interaction present but a backbone node also has no outgoing edge
    graph = _tiny_graph([GraphEdge(2, 1, EdgeKind.WORD_SEMANTIC)])
    with pytest.raises(ValueError, match="unique sink"):
        check_graph(graph)


# ---------------------------------------------------------------------------
# DOT export


def test_dot_j1_q1_has_three_edges():
    graph = build_sig(make_history([1]))
    dot = export_dot(graph)
    assert dot.startswith("digraph semantic_interaction_graph {")
    assert dot.count("->") == 3
    assert 'label="utt0"' in dot
    assert 'label="interaction"' in dot
    assert 'label="wt0.0"' in dot and 'label="ws0.0"' in dot


def test_dot_is_deterministic():
    history = make_history([2, 1])
    assert export_dot(build_pig(history)) == export_dot(build_pig(history))
    assert export_dot(build_pig(history)).startswith("digraph prosody_")


def test_dot_styles_distinguish_edge_kinds():
    dot = export_dot(build_sig(make_history([1, 1])))
    assert "style=solid" in dot and "style=dashed" in dot and "style=dotted" in dot
