#!/usr/bin/env python3
"""
Tests for hallways: group-form words, markings, cut / sawtooth and carving
"""

import pytest

from config import ResourceLimits
from errors import ConfigError, HallwayError, NotCuttable, WrongStratumClass
from fixtures import automorphism, graph_map, hallway_word, word_family
from hallway import (
    build_hallway,
    carve_subhallways,
    cut,
    cut_and_sawtooth,
    has_property_b,
    hallway_from_word,
    is_admissible,
    is_indecomposable,
    nonlin_count,
    nonlin_edges,
    nonlin_ratio,
    parse_hallway,
    propagate_markings,
    sawtooth,
    significant_hosts,
    smooth_hallway,
    trajectory,
)


@pytest.fixture
def f6():
    return graph_map("f6")


@pytest.fixture
def bulge(f6):
    return hallway_from_word(f6, hallway_word("bulgeex", 5))


def test_bulge_word(bulge):
    assert bulge.duration == 10
    assert str(bulge.rho0) == "b'"
    assert str(bulge.mu[5]) == "c"
    assert bulge.max_slice() == (5, 7)
    assert str(bulge.slices[-1]) == "c b'"
    assert bulge.visible_edges == 4
    assert bulge.closed
    assert not bulge.smooth
    assert bulge.check()


def test_word_round_trip(bulge):
    again = hallway_from_word(automorphism("f6"), bulge.word())
    assert again.slices == bulge.slices


def test_inverse_and_window(bulge):
    flipped = bulge.inverse()
    assert all(a == b.inverse() for a, b in zip(flipped.slices, bulge.slices))
    assert bulge.window(2, 6).slices == bulge.slices[2:7]


def test_bad_words(f6):
    with pytest.raises(HallwayError):
        hallway_from_word(f6, "t^-1 b t b")
    with pytest.raises(HallwayError):
        hallway_from_word(f6, "t b t'")
    with pytest.raises(HallwayError):
        hallway_from_word(f6, "b a")


def test_build_needs_trivial_top_notches(f6):
    with pytest.raises(HallwayError):
        build_hallway(f6, "b", 2, nu={2: "a"})
    with pytest.raises(HallwayError):
        build_hallway(f6, "b", 2, mu={3: "a"})


def test_parse_hallway(f6):
    h = parse_hallway("[hallway]\nrho0 = d\nduration = 3\n", f6)
    assert h.smooth
    assert str(h.slices[3]) == "d c c a a c a a a a"
    with pytest.raises(ConfigError):
        parse_hallway("[hallway]\nrho0 = d\nduration = x\n", f6)
    with pytest.raises(ConfigError):
        parse_hallway("[hallway]\nrho0 = d\n", f6)


def test_markings_on_quadratic_edge(f6):
    h = smooth_hallway(f6, "d", 3)
    marking = propagate_markings(f6, h)
    assert marking.counts(3) == {"superlinear": 4, "linear": 6}
    assert nonlin_count(marking, 3) == 4
    assert nonlin_ratio(marking, h) == pytest.approx(4 / 11)


def test_cut_along_final_trajectory(f6):
    h = build_hallway(f6, "a b", 3)
    assert trajectory(h, 1).end == "final"
    right, left, k = cut(h, 1)
    assert k == 3
    assert str(right.rho0) == "b"
    assert str(left.rho0) == "a"
    assert right.visible_length + left.visible_length == pytest.approx(h.visible_length)
    assert h.visible_length == pytest.approx(7)


def test_cut_at_a_notch(f6):
    h = build_hallway(f6, "b", 2, nu={1: "a' b'"})
    traj = trajectory(h, 0)
    assert traj.end == "nu"
    assert traj.end_slice == 1
    assert traj.notch_position == 1
    right, left, k = cut(h, 0)
    assert k == 1
    assert right.visible_length + left.visible_length == pytest.approx(h.visible_length)
    assert h.visible_length == pytest.approx(3)


def test_trajectory_dying_in_mu(f6):
    h = build_hallway(f6, "b", 2, mu={1: "b'"})
    assert trajectory(h, 0).end == "mu"
    with pytest.raises(NotCuttable):
        cut(h, 0)


def test_trajectory_needs_polynomial_edge(f6):
    with pytest.raises(WrongStratumClass):
        trajectory(build_hallway(f6, "x", 1), 0)


def test_sawtooth(f6):
    h = smooth_hallway(f6, "d b", 3)
    s = sawtooth(h, "d")
    assert str(s.rho0) == "b"
    assert all(str(s.mu[i]) == "c" for i in range(1, 4))
    assert all(h.slices[i].edges[1:] == s.slices[i].edges for i in range(4))
    with pytest.raises(HallwayError):
        sawtooth(h, "c")
    with pytest.raises(HallwayError):
        sawtooth(smooth_hallway(f6, "b d", 3), "d")


def test_cut_and_sawtooth(f6):
    m1, m2 = cut_and_sawtooth(smooth_hallway(f6, "d b", 3), 2)
    assert m1 == []
    assert [str(h.rho0) for h in m2] == ["b"]


def test_decomposable_and_admissible(f6):
    h = smooth_hallway(f6, "a b", 2)
    assert not is_indecomposable(h)
    assert is_admissible(h, 5)


def test_carving(f6):
    h = smooth_hallway(f6, "x c a a y", 2)
    carving = carve_subhallways(f6, h, 5, 1.0, 10.0)
    assert len(carving.smooth) == 1
    element = carving.smooth[0]
    assert element.origin == "slice"
    assert element.host_offset == 0
    assert element.hallway.duration == 2
    assert element.interval_at(0) == (1, 4)
    assert element.interval_at(1) == (1, 6)
    assert element.hallway.slices[-1].edges == f6.path("c a^6").edges
    assert carving.cut == ()
    assert carving.image_born > 0
    assert significant_hosts(carving, 1, 10.0) == []
    with pytest.raises(WrongStratumClass):
        carve_subhallways(f6, h, 4, 1.0, 10.0)


def test_property_b(f6):
    from legality import NielsenCatalog

    h = smooth_hallway(f6, "x", 3)
    empty = NielsenCatalog((), 4, 1, complete=True)
    assert has_property_b(h, 5, 100.0, 5, empty)
    assert not has_property_b(h, 5, 0.5, 1, empty)


def test_second_bulge_word(f6):
    h = hallway_from_word(f6, hallway_word("bulgeex2", 5))
    assert h.duration == 10
    assert str(h.rho0) == "b"
    assert str(h.slices[5]) == "a a a a a b'"
    assert h.max_slice() == (5, 6)
    assert str(h.slices[-1]) == "b'"
    assert h.visible_edges == 4
    assert h.check()


def test_polynomial_bulge_is_marked_by_c(f6):
    w0 = word_family("polyex", 5)[-1]
    assert w0.compact() == "d a^2 c' a^4 c' a^6 c' a^8 c' b'"
    h = smooth_hallway(f6, str(w0), 10)
    index, longest = h.max_slice()
    assert (index, longest) == (10, 28)
    marked = nonlin_edges(propagate_markings(f6, h), h, index)
    assert marked == {"d": 1, "c": 6}
    assert sum(marked.values()) == nonlin_count(propagate_markings(f6, h), index)
    visible_c = sum(1 for p in (h.rho0, h.slices[-1]) for e in p.edges if abs(e) == f6.graph.edge("c"))
    assert visible_c == 10


def test_limits_survive_inverse_and_window(f6):
    tight = ResourceLimits(max_word_length=12)
    h = smooth_hallway(f6, "a b", 3, limits=tight)
    assert h.inverse().limits == tight
    assert h.window(1, 3).limits == tight
    assert all(part.limits == tight for part in cut(h, 1)[:2])
