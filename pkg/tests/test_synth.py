import math

import numpy as np
import pytest

from pnormflow.errors import ConnectivityError, ParameterError, ParseError
from pnormflow.graph import conductance, cut_size
from pnormflow.synth import (
    GeneratorSpec,
    dumbbell_bridge,
    gen_dumbbell,
    gen_grid,
    gen_planted_partition,
    read_blocks,
    write_blocks,
)


def test_grid_counts():
    g = gen_grid(7, 7)
    assert (g.n, g.m) == (49, 84)
    assert gen_grid(1, 2).m == 1
    square = gen_grid(2, 2)
    assert square.m == 4 and set(square.degrees.tolist()) == {2}


def test_grid_rejects_zero_dimension():
    with pytest.raises(ParameterError):
        gen_grid(0, 3)


def test_dumbbell_3x3():
    g = gen_dumbbell(3, 3)
    assert (g.n, g.m) == (18, 25)
    side = range(9)
    assert cut_size(g, side) == 1
    assert conductance(g, side) == pytest.approx(1 / 25)


def test_dumbbell_1x1_is_an_edge():
    g = gen_dumbbell(1, 1)
    assert (g.n, g.m) == (2, 1)


def test_bridge_joins_middle_rows():
    u, v = dumbbell_bridge(7, 3)
    assert (u, v) == (11, 30)
    assert v in gen_dumbbell(7, 3).neighbors(u)


def test_planted_partition_edge_counts():
    g, blocks = gen_planted_partition([30, 30], 0.5, 0.02, seed=1)
    assert [len(b) for b in blocks] == [30, 30]
    e = g.edges()
    same = (e[:, 0] < 30) == (e[:, 1] < 30)
    pairs = math.comb(30, 2)
    for b in (0, 1):
        inside = same & ((e[:, 0] < 30) == (b == 0))
        sd = math.sqrt(pairs * 0.5 * 0.5)
        assert abs(inside.sum() - pairs * 0.5) <= 4 * sd
    sd = math.sqrt(900 * 0.02 * 0.98)
    assert abs((~same).sum() - 18) <= 4 * sd


def test_planted_partition_is_deterministic():
    a, ba = gen_planted_partition([10, 12, 8], 0.6, 0.05, seed=42)
    b, bb = gen_planted_partition([10, 12, 8], 0.6, 0.05, seed=42)
    assert a == b and ba == bb
    c, _ = gen_planted_partition([10, 12, 8], 0.6, 0.05, seed=43)
    assert c != a


def test_planted_partition_disconnected_after_retries():
    with pytest.raises(ConnectivityError):
        gen_planted_partition([5, 5], 0.9, 0.0, seed=0, max_retries=3)


@pytest.mark.parametrize("kwargs", [dict(p_in=0.1, p_out=0.2), dict(p_in=1.5, p_out=0.1),
                                    dict(p_in=0.5, p_out=-0.1)])
def test_planted_partition_bad_probabilities(kwargs):
    with pytest.raises(ParameterError):
        gen_planted_partition([5, 5], seed=0, **kwargs)


def test_spec_validation_and_build():
    with pytest.raises(ParameterError):
        GeneratorSpec("lfr")
    with pytest.raises(ParameterError):
        GeneratorSpec("grid", (0, 2))
    g, blocks = GeneratorSpec("dumbbell", (3, 3)).build()
    assert blocks == [list(range(9)), list(range(9, 18))]
    g1, b1 = GeneratorSpec("planted-partition", (8, 8), 0.7, 0.1, seed=5).build()
    g2, b2 = GeneratorSpec("planted-partition", (8, 8), 0.7, 0.1, seed=5).build()
    assert g1 == g2 and b1 == b2


@pytest.mark.parametrize("one_based", [False, True])
def test_blocks_round_trip(one_based):
    g, blocks = gen_planted_partition([6, 7], 0.8, 0.1, seed=3)
    text = write_blocks(g, blocks, one_based=one_based)
    assert len(text.splitlines()) == 2
    back = read_blocks(text, g, one_based=one_based)
    assert [set(b) for b in back] == [set(b.members) for b in blocks]


def test_blocks_parse_error():
    with pytest.raises(ParseError) as info:
        read_blocks("0 1\n2 z\n")
    assert info.value.line == 2
