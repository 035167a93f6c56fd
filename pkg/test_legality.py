#!/usr/bin/env python3
"""
Tests for turns, legality, Nielsen paths and the exponential-stratum statistics
"""

import math

import numpy as np
import pytest

from cancellation import critical_length, random_paths, select_bcc
from config import SearchBounds
from errors import NotApplicable, PathError
from fixtures import graph_map
from legality import (
    DECAY_CONSTANTS,
    N_count,
    NielsenCatalog,
    Turn,
    build_legality,
    expdecay_check,
    fastpoly_exponent,
    find_nielsen,
    longest_legal_segment,
    nielsen_split,
    r_stats,
    trichotomy,
    trichotomy_exponent,
)

GOLDEN = (1 + math.sqrt(5)) / 2
NIELSEN = SearchBounds(nielsen_edges=6, nielsen_period=1)


def test_turn_is_unordered():
    assert Turn.of(3, -2) == Turn.of(-2, 3)
    assert Turn.of(4, 4).degenerate


def test_illegal_turns_f6():
    f = graph_map("f6")
    table = build_legality(f)
    assert not table.is_legal(Turn.of(-5, -6))
    assert not table.is_legal(Turn.of(-1, -2))
    assert not table.is_legal(Turn.of(-4, -3))
    assert table.is_legal(Turn.of(5, 6))
    assert table.is_legal(Turn.of(-6, -2))
    assert any(t.degenerate for t in table.illegal_turns())
    assert table.df_stable()


def test_df_orbit_ends_in_cycle():
    table = build_legality(graph_map("f6"))
    orbit = table.orbit(Turn.of(-4, -3))
    assert orbit[0] == Turn.of(-4, -3)
    assert orbit[-1] == Turn.of(-1, -1)


def test_r_stats_counts_legal_segments():
    f = graph_map("f6")
    rho = f.path("y x'")
    stats = r_stats(f, rho, 5)
    assert stats.illegal_positions == (1,)
    assert stats.legal_segments == 2
    assert stats.segments == ((0, 1), (1, 2))
    assert stats.r_length == pytest.approx(1 + GOLDEN)
    assert not stats.r_legal
    length, piece = longest_legal_segment(f, rho, 5, build_legality(f))
    assert str(piece) == "y"
    assert length == pytest.approx(GOLDEN)


def test_lower_turns_do_not_count():
    f = graph_map("f6")
    stats = r_stats(f, f.path("b' a' x"), 5)
    assert stats.r_legal
    assert stats.r_length == pytest.approx(1.0)


def test_find_nielsen_commutator():
    f = graph_map("eglinear")
    catalog = find_nielsen(f, NIELSEN)
    found = {str(n) for n in catalog.of_height(1)}
    assert found & {"x y x' y'", "y x y' x'"}
    assert catalog.verify(f)
    assert all(n.period == 1 for n in catalog.entries)
    assert catalog.has_closed(1)


def test_nielsen_split():
    f = graph_map("eglinear")
    assert [str(p) for p in nielsen_split(f, f.path("x y x' y' x y x' y'"), 1)] == ["x y x' y' x y x' y'"]
    assert nielsen_split(f, f.path("x"), 1) is None
    assert nielsen_split(f, f.path("a"), 1) is None


def test_N_count():
    f = graph_map("eglinear")
    catalog = find_nielsen(f, NIELSEN)
    assert N_count(f, f.path("x y x' y'"), 1, catalog) == 0
    with pytest.raises(NotApplicable):
        N_count(f, f.path("a"), 2, catalog)


def test_N_count_without_closed_paths():
    f = graph_map("f6")
    empty = NielsenCatalog((), 4, 1, complete=True)
    rho = f.path("y x'")
    assert N_count(f, rho, 5, empty) == 2


def test_decay_constants():
    assert DECAY_CONSTANTS[False] == (11 / 10, 5)
    assert DECAY_CONSTANTS[True] == (14 / 13, 11)


def test_trichotomy_long_legal_segment():
    f = graph_map("f6")
    result = trichotomy(f, f.path("x"), 5, 1.0, 3)
    assert result.case == 1
    assert str(result.image) == "y c a a x c y"
    assert result.segment_length == pytest.approx(2 * GOLDEN + 1)
    with pytest.raises(PathError):
        trichotomy(f, f.path("a b"), 5, 1.0, 3)


def test_fastpoly_exponent():
    assert fastpoly_exponent(graph_map("fastpoly"), critical={1: 1.0}) == 2
    with pytest.raises(NotApplicable):
        fastpoly_exponent(graph_map("f6"), critical={5: 1.0})


def test_trichotomy_exponent():
    f = graph_map("f6")
    assert trichotomy_exponent(f, 5, 1.0, [f.path("x"), f.path("a b")], 4) == 1


def test_expdecay_check():
    f = graph_map("f6")
    empty = NielsenCatalog((), 4, 1, complete=True)
    check = expdecay_check(f, f.path("y x'"), 5, 1, empty, 100.0)
    assert check.applicable
    assert (check.N_before, check.N_after) == (2, 1)
    assert check.lam == pytest.approx(11 / 10)
    assert check.bound_holds
    assert check.strict_holds is None


def test_decay_over_random_height_five_paths():
    f = graph_map("f6")
    table = build_legality(f)
    empty = NielsenCatalog((), 4, 1, complete=True)
    bcc, _ = select_bcc(f, SearchBounds(bcc_edges=2))
    L = critical_length(f, 5, bcc) + 1
    rng = np.random.default_rng(5)
    paths = [p for p in random_paths(f, SearchBounds().samples // 10, 12, rng) if f.height(p) == 5]
    assert paths
    checks = [expdecay_check(f, rho, 5, 1, empty, L, table) for rho in paths]
    applicable = [c for c in checks if c.applicable]
    assert len(applicable) > len(checks) // 2
    assert all(c.bound_holds for c in applicable)
    assert all(c.N_after <= c.N_before for c in applicable)
