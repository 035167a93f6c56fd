#!/usr/bin/env python3
"""
Tests for marked graphs, graph maps, filtrations and validation
"""

import math

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from config import SearchBounds
from errors import ConfigError, EmptyRay, FiltrationError, PathError, WrongStratumClass
from fgword import reduce
from fixtures import automorphism, fixture_text, graph_map
from graphmap import (
    Circuit,
    describe,
    eigenray,
    enumerate_paths,
    format_graph_map,
    growth_degree,
    map_circuit,
    map_path,
    parse_graph_map,
    reorder_strata,
    rose,
    split_poly_path,
    suggest_filtration,
    tighten,
    validate_improved,
)

GOLDEN = (1 + math.sqrt(5)) / 2
SMALL = SearchBounds(path_length=3, nielsen_edges=6, nielsen_period=1, nielsen_budget=20_000)


@pytest.fixture
def f6():
    return graph_map("f6")


def test_rose_layout(f6):
    assert f6.graph.vertices == ("v",)
    assert f6.graph.edge_names == ("a", "b", "c", "d", "x", "y")
    assert f6.fixed_vertices == frozenset({0})
    assert f6.image(f6.graph.edge("c")) == (3, 1, 1)
    assert f6.image(-4) == (-3, -4)


def test_f6_strata(f6):
    kinds = [s.kind for s in f6.filtration.strata]
    assert kinds == ["polynomial"] * 4 + ["exponential"]
    assert f6.filtration[2].u == (1,)
    assert f6.filtration[4].u == (3,)
    assert abs(f6.filtration[5].growth_rate - GOLDEN) < 1e-9
    assert f6.edge_length(5) == pytest.approx(1.0)
    assert f6.edge_length(6) == pytest.approx(GOLDEN)


def test_h_values_and_leagues(f6):
    h = [s.h_value for s in f6.filtration.strata]
    assert h == [0.0, 1.0, 1.0, 3.0, 3.0]
    assert f6.filtration.leagues == {1: (2, 3), 3: (4, 5)}
    order, reordered = reorder_strata(f6)
    assert order == [1, 2, 3, 4, 5]
    assert reordered is f6


def test_growth_degrees(f6):
    assert [growth_degree(f6, name) for name in "abcd"] == [0, 1, 1, 2]
    assert growth_degree(f6, "x") == "exponential"
    assert growth_degree(graph_map("eglinear"), "a") == 1
    assert growth_degree(graph_map("psi_f4"), "d") == 1
    assert growth_degree(graph_map("fastpoly"), "E") == "fast"


def test_map_and_tighten(f6):
    rho = f6.path("b a")
    assert str(map_path(f6, rho)) == "b a a"
    assert str(map_path(f6, f6.path("d"), 3)) == "d c c a a c a a a a"
    assert tighten(f6.graph, [2, 1, -1]).edges == (2,)
    with pytest.raises(PathError):
        tighten(f6.graph, [])


@given(st.lists(st.sampled_from([1, -1, 2, -2, 3, -3, 4, -4, 5, -5, 6, -6]), max_size=10))
def test_inverse_map_undoes_map(letters):
    f = graph_map("f6")
    w = reduce(automorphism("f6").alphabet, letters)
    assume(w)
    rho = f.path(str(w))
    assert map_path(f.inverse, map_path(f, rho)) == rho


def test_circuits_are_rotation_invariant(f6):
    assert Circuit(f6.graph, [2, 1]) == Circuit(f6.graph, [1, 2])
    assert len(Circuit(f6.graph, [2, 1, -2])) == 1
    assert len(map_circuit(f6, Circuit(f6.graph, [2, 1]))) == 3


def test_enumerate_paths_counts():
    f = graph_map("identity")
    assert len(list(enumerate_paths(f.graph, 1))) == 4
    assert len(list(enumerate_paths(f.graph, 2))) == 16


def test_suggest_filtration():
    assert suggest_filtration(graph_map("f6")) == [(0,), (1,), (2,), (3,), (4, 5)]
    assert suggest_filtration(graph_map("bad_rtt")) == [(0,), (1, 2)]


def test_eigenray(f6):
    ray = eigenray(f6, "d", 3)
    assert str(ray.path) == "c c a a c a a a a"
    assert ray.boundaries == [1, 4, 9]
    with pytest.raises(EmptyRay):
        eigenray(f6, "a", 2)
    with pytest.raises(WrongStratumClass):
        eigenray(f6, "x", 2)


def test_split_poly_path(f6):
    pieces = split_poly_path(f6, f6.path("a d c d'"), 4)
    assert [(tag, str(p)) for tag, p in pieces] == [("lower", "a"), ("basic", "d c d'")]
    with pytest.raises(PathError):
        split_poly_path(f6, f6.path("x d"), 4)
    with pytest.raises(WrongStratumClass):
        split_poly_path(f6, f6.path("x"), 5)


def test_validate_f6(f6):
    report = validate_improved(f6, SMALL)
    results = {p.name: p for p in report.properties}
    assert results["rtt(1)"].status == "pass"
    assert results["rtt(2)"].status == "pass"
    assert results["rtt(2)"].bounded
    assert results["ttimproved(2)"].status == "pass"
    assert results["ttimproved(4)"].status == "pass"


def test_validate_reports_rtt1_failure():
    report = validate_improved(graph_map("bad_rtt"), SMALL)
    assert not report.ok
    assert "rtt(1)" in report.failures()


def test_validate_reports_filtration_failures():
    text = fixture_text("bad_rtt").replace("stratum 1 = a\nstratum 2 = x y", "stratum 1 = x y\nstratum 2 = a")
    f = parse_graph_map(text, name="swapped")
    with pytest.raises(FiltrationError):
        f.filtration
    assert validate_improved(f, SMALL).failures() == ["filtration.invariant"]
    text = fixture_text("bad_rtt").replace("stratum 1 = a\nstratum 2 = x y", "stratum 1 = a x y")
    assert validate_improved(parse_graph_map(text), SMALL).failures() == ["filtration.irreducible"]


def test_parse_graph_map_errors():
    with pytest.raises(ConfigError):
        parse_graph_map("[graph]\nvertex v\nedge x = v v\n[map]\nx -> x x'\n")
    with pytest.raises(ConfigError):
        parse_graph_map("[graph]\nvertex v\nedge x = v w\n[map]\nx -> x\n")
    with pytest.raises(ConfigError):
        parse_graph_map("[graph]\nvertex v\nedge x = v v\n[map]\n")


def test_format_round_trip():
    f = graph_map("fastpoly")
    again = parse_graph_map(format_graph_map(f), name=f.name)
    assert again.images == f.images
    assert again.declared_strata == f.declared_strata
    assert again.inverse.images == f.inverse.images


def test_rose_keeps_declared_strata():
    f = rose(automorphism("psi_f4"))
    assert f.declared_strata == ((0,), (1,), (2,), (3,))


def test_describe(f6):
    rows = describe(f6)
    assert [row["class"] for row in rows] == ["polynomial"] * 4 + ["exponential"]
    assert rows[3]["degree"] == 2
    assert rows[3]["u"] == "c"
    assert rows[4]["metric"] == pytest.approx([1.0, GOLDEN])


@settings(max_examples=100)
@given(st.lists(st.sampled_from([1, -1, 2, -2, 3, -3, 4, -4, 5, -5, 6, -6]), max_size=8), st.integers(1, 3), st.integers(1, 3))
def test_map_path_composes(letters, j, k):
    f = graph_map("f6")
    w = reduce(automorphism("f6").alphabet, letters)
    assume(w)
    rho = f.path(str(w))
    assert map_path(f, map_path(f, rho, j), k) == map_path(f, rho, j + k)


@pytest.mark.parametrize("r", [2, 3, 4])
@settings(max_examples=150)
@given(data=st.data())
def test_poly_pieces_map_independently(r, data):
    f = graph_map("f6")
    letters = data.draw(st.lists(st.sampled_from([s * i for i in range(1, r + 1) for s in (1, -1)]), max_size=12))
    w = reduce(automorphism("f6").alphabet, letters)
    assume(w)
    rho = f.path(str(w))
    pieces = split_poly_path(f, rho, r)
    assert tuple(e for _, p in pieces for e in p.edges) == rho.edges
    for k in range(1, 5):
        joined = tuple(e for _, p in pieces for e in map_path(f, p, k).edges)
        assert joined == map_path(f, rho, k).edges
