import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pnormflow.errors import (
    ConnectivityError,
    GraphValidationError,
    ParseError,
    UndefinedConductanceError,
)
from pnormflow.graph import (
    Graph,
    NodeSet,
    conductance,
    cut_size,
    load_edge_list,
    read_node_set,
    volume,
    write_edge_list,
    write_node_set,
)
from pnormflow.synth import gen_dumbbell

from conftest import connected_graphs


def test_load_path():
    g = load_edge_list("0 1\n1 2")
    assert (g.n, g.m) == (3, 2)
    assert g.degrees.tolist() == [1, 2, 1]


def test_reversed_duplicate_is_merged():
    g = load_edge_list("0 1\n1 0\n0 1\n")
    assert g.m == 1 and g.total_volume == 2


def test_self_loop_rejected():
    with pytest.raises(GraphValidationError, match="self-loop"):
        load_edge_list("0 0")


def test_comments_and_blank_lines(tmp_path):
    f = tmp_path / "g.txt"
    f.write_text("# header\n\n0 1\n  # indented comment\n1 2\n")
    assert load_edge_list(f).m == 2
    with open(f) as fh:
        assert load_edge_list(fh).m == 2


@pytest.mark.parametrize("text, line", [("0 1\n1 x\n", 2), ("0 1\n\n1 2 3\n", 3),
                                        ("# c\n-1 2\n", 2)])
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ParseError) as info:
        load_edge_list(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_empty_input():
    with pytest.raises(ParseError):
        load_edge_list("# nothing here\n")


def test_disconnected_rejected_unless_component_selected():
    text = "0 1\n1 2\n5 6\n"
    with pytest.raises(ConnectivityError):
        load_edge_list(text)
    g = load_edge_list(text, seed_component=[6])
    assert g.n == 2 and g.to_labels(range(g.n)) == [5, 6]
    with pytest.raises(ConnectivityError):
        load_edge_list(text, seed_component=[0, 5])


def test_sparse_ids_are_compacted():
    g = load_edge_list("10 20\n20 40\n")
    assert g.n == 3
    assert g.to_dense([40]) == [2]
    assert g.to_labels([0, 1, 2]) == [10, 20, 40]
    with pytest.raises(GraphValidationError):
        g.to_dense([30])


def test_one_based_ids():
    g = load_edge_list("1 2\n2 3\n", one_based=True)
    assert g.n == 3 and g.labels is None
    assert write_edge_list(g, one_based=True) == "1 2\n2 3\n"


def test_csr_invariants(small_dumbbell):
    g = small_dumbbell
    for v in range(g.n):
        nb = g.neighbors(v)
        assert np.all(np.diff(nb) > 0)
        assert v not in nb
        for u in nb:
            assert v in g.neighbors(u)
    assert g.degrees.sum() == g.total_volume == 2 * g.m


def test_graph_is_read_only(path4):
    with pytest.raises(ValueError):
        path4.indices[0] = 3


def test_path_set_queries(path4):
    assert volume(path4, {0, 1}) == 3
    assert volume(path4, set()) == 0
    assert volume(path4, range(4)) == 6
    assert cut_size(path4, {0, 1}) == 1
    assert cut_size(path4, range(4)) == 0
    assert conductance(path4, {0, 1}) == pytest.approx(1 / 3)


def test_four_cycle_cut():
    g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    assert cut_size(g, {0, 1}) == 2


def test_single_edge_conductance(single_edge):
    assert conductance(single_edge, {0}) == 1.0


def test_dumbbell_side_conductance():
    g = gen_dumbbell(7, 7)
    left = range(49)
    assert cut_size(g, left) == 1
    assert conductance(g, left) == pytest.approx(1 / volume(g, left))


@pytest.mark.parametrize("s", [set(), {0, 1, 2, 3}])
def test_conductance_undefined(path4, s):
    with pytest.raises(UndefinedConductanceError):
        conductance(path4, s)


def test_nodeset_volume_cached(path4):
    s = NodeSet.of(path4, [2, 1])
    assert s.volume == 4 and list(s) == [1, 2] and 2 in s
    with pytest.raises(GraphValidationError):
        NodeSet.of(path4, [7])


@settings(max_examples=60, deadline=None)
@given(connected_graphs(min_n=3), st.data())
def test_conductance_properties(g, data):
    members = data.draw(st.sets(st.integers(0, g.n - 1), min_size=1, max_size=g.n - 1))
    rest = set(range(g.n)) - members
    cut = cut_size(g, members)
    assert cut == cut_size(g, rest)
    assert cut <= min(volume(g, members), volume(g, rest))
    phi = conductance(g, members)
    assert 0.0 <= phi <= 1.0
    assert phi == conductance(g, rest)


@settings(max_examples=60, deadline=None)
@given(connected_graphs(), st.booleans())
def test_edge_list_round_trip(g, one_based):
    text = write_edge_list(g, one_based=one_based)
    assert load_edge_list(text, one_based=one_based) == g
    assert load_edge_list(io.StringIO(text), one_based=one_based) == g


def test_round_trip_keeps_sparse_labels(tmp_path):
    g = load_edge_list("3 9\n9 12\n12 3\n")
    path = tmp_path / "g.txt"
    write_edge_list(g, path)
    h = load_edge_list(path)
    assert h == g and h.to_labels(range(3)) == [3, 9, 12]


def test_node_set_round_trip():
    g = load_edge_list("3 9\n9 12\n")
    text = write_node_set(g, [0, 2])
    assert text == "3\n12\n"
    assert read_node_set(text, g) == [0, 2]
    assert read_node_set("4\n13\n", g, one_based=True) == [0, 2]
    with pytest.raises(ParseError):
        read_node_set("3\nabc\n", g)
