import pytest
from hypothesis import given, settings, strategies as st

from heterfc.corpus import Kind
from heterfc.errors import EmptyGraph
from heterfc.graph import (
    EvidenceGraph,
    Granularity,
    GraphConfig,
    RelId,
    build_graph,
    default_stopwords,
    export_graph,
    import_graph,
    inter_edges,
    intra_edges,
    parse_stopwords,
)
from heterfc.linearize import tokenize

from helpers import cell, instance, sentence

STOP = default_stopwords()


def undirected(pairs):
    return {(min(u, v), max(u, v)) for u, v in pairs}


# --- intra_edges ----------------------------------------------------------------

def test_intra_window_radius_two():
    pairs = intra_edges(5, 2)
    assert undirected(pairs) == {(0, 1), (0, 2), (1, 2), (1, 3), (2, 3), (2, 4), (3, 4)}
    assert len(pairs) == 14  # both directions


def test_intra_singleton():
    assert intra_edges(1, 2) == []


def test_intra_fully_connected():
    assert len(intra_edges(3, 1, fully_connected=True)) == 6


def test_intra_symmetric_and_no_self():
    pairs = intra_edges(7, 3)
    s = set(pairs)
    for u, v in pairs:
        assert u != v
        assert (v, u) in s


@given(st.integers(0, 12), st.integers(1, 12))
def test_intra_matches_enumeration(n, w):
    expect = {(i, j) for i in range(n) for j in range(n)
              if i != j and abs(i - j) <= w}
    assert set(intra_edges(n, w)) == expect
    assert len(intra_edges(n, w)) == len(expect)


@given(st.integers(0, 8), st.integers(8, 12))
def test_intra_wide_window_equals_fully_connected(n, w):
    assert set(intra_edges(n, w)) == set(intra_edges(n, w, fully_connected=True))


# --- inter_edges ---------------------------------------------------------------

def _spans(*texts):
    return [tokenize(t) for t in texts]


def test_inter_single_shared_word():
    stop = parse_stopwords("is\na\nin\nthe\nof")
    spans = _spans("Einstein born in Ulm", "Ulm is a city")
    pairs = inter_edges(spans, stop)
    # global indices: Ulm(ev0)=3, Ulm(ev1)=4
    assert undirected(pairs) == {(3, 4)}
    assert set(pairs) == {(3, 4), (4, 3)}


def test_inter_stopword_only_shared():
    stop = parse_stopwords("is")
    pairs = inter_edges(_spans("this is x", "that is y"), stop)
    assert pairs == []


def test_inter_same_span_repeats_not_linked():
    pairs = inter_edges(_spans("Ulm and Ulm", "other words"), frozenset())
    assert pairs == []


def test_inter_all_occurrence_pairs():
    pairs = inter_edges(_spans("x x", "x", "y x"), frozenset())
    # occurrences of 'x': (span0,0),(span0,1),(span1,2),(span2,4)
    assert undirected(pairs) == {(0, 2), (1, 2), (0, 4), (1, 4), (2, 4)}


# --- build_graph ------------------------------------------------------------------

def test_single_sentence_graph():
    g = build_graph(instance([sentence("s", "A B")]), GraphConfig(window=2))
    assert g.num_nodes == 2
    assert set(g.edges[RelId.R_S]) == {(0, 1), (1, 0)}
    assert g.edges[RelId.R_T] == ()
    assert g.edges[RelId.R_E] == ()


def test_mixed_graph_golden():
    stop = parse_stopwords("for\nis")
    inst = instance([sentence("s", "Ulm grew"), cell("c", "5000", "Ulm", "Pop")])
    g = build_graph(inst, GraphConfig(window=2, stopwords=stop))
    # span 0: [Ulm, grew]; span 1: [Pop, for, Ulm, is, 5000]
    assert g.spans == ((0, 1), (2, 6))
    assert undirected(g.edges[RelId.R_E]) == {(0, 4)}
    for u, v in g.edges[RelId.R_S]:
        assert 0 <= u <= 1 and 0 <= v <= 1
    for u, v in g.edges[RelId.R_T]:
        assert 2 <= u <= 6 and 2 <= v <= 6


def test_homogeneous_relabeling_preserves_adjacency():
    stop = parse_stopwords("for\nis")
    inst = instance([sentence("s", "Ulm grew"), cell("c", "5000", "Ulm", "Pop")])
    het = build_graph(inst, GraphConfig(window=2, stopwords=stop))
    hom = build_graph(inst, GraphConfig(window=2, stopwords=stop, heterogeneous=False))
    all_het = set(het.edges[RelId.R_S]) | set(het.edges[RelId.R_T]) | set(het.edges[RelId.R_E])
    assert set(hom.edges[RelId.R_S]) == all_het
    assert hom.edges[RelId.R_T] == ()
    assert hom.edges[RelId.R_E] == ()


def test_fully_connected_graph():
    inst = instance([sentence("s", "a b"), sentence("t", "c d")])
    g = build_graph(inst, GraphConfig(window=1, fully_connected=True))
    assert undirected(g.edges[RelId.R_S]) == {(0, 1), (2, 3)}
    assert undirected(g.edges[RelId.R_E]) == {(0, 2), (0, 3), (1, 2), (1, 3)}


def test_empty_graph_raises():
    inst = instance([sentence("s", "...")])
    with pytest.raises(EmptyGraph):
        build_graph(inst, GraphConfig())


def test_empty_evidence_dropped_m_adjusted():
    inst = instance([sentence("s", "..."), sentence("t", "real words")])
    g = build_graph(inst, GraphConfig())
    assert g.num_evidence == 1
    assert g.source_indices == (1,)


def test_build_graph_deterministic():
    inst = instance([sentence("s", "Ulm grew fast"), cell("c", "5000", "Ulm", "Pop")])
    cfg = GraphConfig()
    assert build_graph(inst, cfg) == build_graph(inst, cfg)


# --- export -----------------------------------------------------------------------

def test_json_export_lists_nodes():
    import json
    g = build_graph(instance([sentence("s", "A B")]), GraphConfig())
    doc = json.loads(export_graph(g, "json"))
    assert len(doc["nodes"]) == 2
    assert doc["nodes"][0] == {"surface": "A", "norm": "a", "evidence_index": 0}


def test_dot_export_one_edge_statement():
    g = build_graph(instance([sentence("s", "A B")]), GraphConfig())
    dot = export_graph(g, "dot").decode()
    assert dot.count(" -- ") == 1
    assert dot.startswith("graph")


def test_json_round_trip():
    stop = parse_stopwords("for\nis")
    inst = instance([sentence("s", "Ulm grew"), cell("c", "5000", "Ulm", "Pop")])
    g = build_graph(inst, GraphConfig(window=2, stopwords=stop))
    assert import_graph(export_graph(g, "json")) == g


# --- properties over random instances ------------------------------------------

_word = st.text(alphabet="abcdefgh", min_size=1, max_size=3)
_sentence_text = st.lists(_word, min_size=1, max_size=6).map(" ".join)


@st.composite
def instances(draw):
    n_ev = draw(st.integers(1, 4))
    items = []
    for i in range(n_ev):
        if draw(st.booleans()):
            items.append(sentence(f"s{i}", draw(_sentence_text)))
        else:
            items.append(cell(f"c{i}", draw(_word), draw(_word), draw(_word)))
    return instance(items)


@settings(max_examples=300, deadline=None)
@given(instances(), st.integers(1, 3), st.booleans())
def test_graph_invariants(inst, w, fully_connected):
    g = build_graph(inst, GraphConfig(window=w, stopwords=STOP,
                                      fully_connected=fully_connected))
    span_of = {}
    for span_idx, (i, j) in enumerate(g.spans):
        for n in range(i, j + 1):
            span_of[n] = span_idx
    # spans partition 0..N-1
    assert sorted(span_of) == list(range(g.num_nodes))
    for rel in RelId:
        edges = set(g.edges[rel])
        for u, v in edges:
            assert u != v
            assert 0 <= u < g.num_nodes and 0 <= v < g.num_nodes
            assert (v, u) in edges  # symmetry
            if rel is RelId.R_E:
                assert span_of[u] != span_of[v]
                if not fully_connected:
                    assert g.nodes[u][0].norm not in STOP
                    assert g.nodes[v][0].norm not in STOP
                    assert g.nodes[u][0].norm == g.nodes[v][0].norm
            else:
                assert span_of[u] == span_of[v]
                if not fully_connected:
                    assert abs(u - v) <= w


@settings(max_examples=100, deadline=None)
@given(instances())
def test_wide_window_equals_fully_connected_within_span(inst):
    g_wide = build_graph(inst, GraphConfig(window=64, stopwords=STOP))
    g_fc = build_graph(inst, GraphConfig(window=1, stopwords=STOP, fully_connected=True))
    for rel in (RelId.R_S, RelId.R_T):
        assert set(g_wide.edges[rel]) == set(g_fc.edges[rel])
