#!/usr/bin/env python3
"""
Tests for empirical convexity, lower-bound fits, corpora and the constant ledger
"""

import pytest

from config import ResourceLimits
from convexity import (
    LedgerInputs,
    corpus,
    empirical_K,
    ledger,
    lowerbound_fit,
    polynomial_degree,
    power_inputs,
    stabilization,
    stabilization_check,
)
from errors import ConfigError, EmptyAfterExclusion, MissingInput, NotApplicable, ResourceLimit
from fixtures import automorphism, graph_map, word_family


@pytest.fixture
def f6():
    return automorphism("f6")


def test_identity_ratio_is_one_half():
    phi = automorphism("identity")
    report = empirical_K(phi, corpus("ball(2)", phi), 4)
    assert report.empirical_K == pytest.approx(0.5)
    assert report.corpus_size == 17
    assert report.flags == []


def test_quadratic_orbit(f6):
    report = empirical_K(f6, ["d"], 4)
    assert report.empirical_K == pytest.approx(17 / 18)
    assert (report.witness.i, report.witness.N) == (4, 4)
    assert report.series == pytest.approx([1 / 2, 2 / 3, 5 / 6, 10 / 11, 17 / 18])
    assert stabilization(report, 2) == pytest.approx(5 / 6)
    with pytest.raises(ConfigError):
        stabilization(report, 5)
    assert empirical_K(f6, ["d"], 4, mode="path").empirical_K == pytest.approx(17 / 18)


def test_threads_keep_order(f6):
    words = ["d", "c", "b", "a"]
    single = empirical_K(f6, words, 5, threads=1)
    pooled = empirical_K(f6, words, 5, threads=4)
    assert single.series == pooled.series
    assert single.witness == pooled.witness


def test_csv_rows(f6):
    lines = empirical_K(f6, ["d"], 1).to_csv().splitlines()
    assert lines[0] == "word,i,N,ratio"
    assert lines[1] == "d,0,0,0.5"
    assert len(lines) == 4


def test_bad_requests(f6):
    with pytest.raises(ConfigError):
        empirical_K(f6, [], 4)
    with pytest.raises(ConfigError):
        empirical_K(graph_map("f6"), ["d"], 4, mode="word")
    with pytest.raises(ResourceLimit):
        empirical_K(f6, ["d"], 10, limits=ResourceLimits(max_iterations=5))


def test_resource_limited_entries_are_skipped(f6):
    report = empirical_K(f6, ["a", "x"], 6, limits=ResourceLimits(max_word_length=20))
    assert len(report.skipped) == 1
    assert report.flags == ["resource-limit"]
    assert report.empirical_K == pytest.approx(0.5)


def test_corpora(f6):
    identity = automorphism("identity")
    assert len(corpus("ball(2)", identity)) == 17
    assert len(corpus("sphere(1)", f6)) == 12
    words = corpus("random(5, 7, 3)", f6)
    assert len(words) == 5
    assert all(len(w) == 7 for w in words)
    assert words == corpus("random(5, 7, 3)", f6)
    assert len(corpus("paths(2)", identity)) == 16
    assert len(corpus("circuits(1)", identity)) == 4
    assert corpus("fixture(bulgeex, k=3)", f6) == ["t^-3 c t^-3 b' t^6 b c'"]
    with pytest.raises(ConfigError):
        corpus("nope(1)", f6)
    with pytest.raises(ConfigError):
        corpus("ball(x)", f6)
    with pytest.raises(ConfigError):
        corpus("ball(2)", graph_map("fastpoly"))


def test_lowerbound_fit_polynomial(f6):
    fit = lowerbound_fit(f6, ["d", "d c"], 3)
    assert fit.kind == "polynomial"
    assert fit.degree == 2
    assert fit.constant == pytest.approx(11 / 9)
    assert (fit.witness, fit.witness_k) == ("d", 3)
    assert fit.used == 2


def test_lowerbound_fit_exclusions():
    with pytest.raises(NotApplicable):
        lowerbound_fit(automorphism("identity"), ["a"], 3)
    with pytest.raises(EmptyAfterExclusion):
        lowerbound_fit(automorphism("eglinear"), ["x y x' y'"], 3)


def test_ledger_recurrences():
    result = ledger(LedgerInputs(q=2, K_nonlin=2, M=3, C=2))
    assert result.K_poly == [1.0, 6.0]
    assert result.K_prime_poly == [16.0, 272.0]
    assert result.K_prime == 6.0
    assert result.K_word == 12.0
    assert result.K_cyclic is None
    assert result.value("K_2") == 6.0
    assert result.flags == []


def test_ledger_cyclic_constant():
    result = ledger(LedgerInputs(q=1, L=3, k=2, K_prime=6))
    assert result.K_cyclic == pytest.approx(486)
    assert result.K_word == 12.0


def test_ledger_missing_inputs():
    with pytest.raises(MissingInput):
        ledger(LedgerInputs())
    with pytest.raises(MissingInput) as info:
        ledger(LedgerInputs(q=2))
    assert len(info.value.missing) == 3


def test_ledger_flags():
    result = ledger(LedgerInputs(q=2, K_nonlin=2, M=3, C=2, provenance={"M": "heuristic"}))
    assert "heuristic-input" in result.flags
    assert dict((e.name, e.provenance) for e in result.entries)["K_2"] == "heuristic"
    result = ledger(LedgerInputs(q=1, exponential=True, empirical_K=0.9))
    assert result.flags == ["empirical-only"]
    assert result.value("empirical_K") == pytest.approx(0.9)


def test_power_inputs_and_degree(f6):
    assert power_inputs(f6, 3).L == 3.0
    assert polynomial_degree(graph_map("psi_f4")) == (1, False)
    assert polynomial_degree(graph_map("f6")) == (2, True)


def test_ties_go_to_the_smallest_word():
    identity = automorphism("identity")
    assert empirical_K(identity, ["b", "a"], 2).witness.word == "a"
    assert empirical_K(identity, ["b", "a"], 2, threads=4).witness.word == "a"


def test_inverse_words_share_an_orbit(f6):
    forward = empirical_K(f6, ["d"], 4)
    both = empirical_K(f6, ["d'", "d"], 4)
    assert both.series == forward.series
    assert both.witness.word == "d"
    assert empirical_K(f6, ["d'"], 4).empirical_K == forward.empirical_K
    cyclic = empirical_K(f6, ["c d", "d c", "c' d'"], 4, mode="cyclic")
    assert cyclic.series == empirical_K(f6, ["c d"], 4, mode="cyclic").series


def test_abc_cyclic_ratio_stays_below_one(f6):
    report = empirical_K(f6, word_family("abc", 4), 10, mode="cyclic", corpus_name="abc")
    assert 0.9 < report.empirical_K <= 1.0
    assert report.flags == []


@pytest.mark.parametrize("name", ["f6", "psi_f4", "eglinear"])
def test_ratio_stabilizes_between_12_and_16(name):
    phi = automorphism(name)
    words = corpus("ball(2)", phi)
    result = stabilization_check(phi, words, corpus_name="ball(2)")
    assert (result.n_small, result.n_large) == (12, 16)
    assert result.stable
    assert result.K_large == empirical_K(phi, words, 16).empirical_K
    assert result.K_small == pytest.approx(stabilization(empirical_K(phi, words, 16), 12))
    assert result.K_small <= result.K_large


def test_stabilization_check_order(f6):
    with pytest.raises(ConfigError):
        stabilization_check(f6, ["d"], n_small=16, n_large=12)
