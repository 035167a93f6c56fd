#!/usr/bin/env python3
"""
Tests for free group words, cyclic words and automorphisms
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from config import ResourceLimits
from errors import AlphabetError, ConfigError, InverseMismatch, MissingInverse, ResourceLimit
from fgword import (
    POWER_CACHE_LIMIT,
    Alphabet,
    Automorphism,
    apply,
    ball,
    compose,
    format_automorphism,
    cyclic_reduce,
    iterate,
    orbit_lengths,
    parse_automorphism,
    power,
    random_word,
    reduce,
    sphere,
    stabilize,
)
from fixtures import automorphism

AB = Alphabet(("a", "b"))
F6_LETTERS = st.lists(st.sampled_from([1, -1, 2, -2, 3, -3, 4, -4, 5, -5, 6, -6]), max_size=12)


def test_parse_and_reduce():
    w = AB.parse_word("a b b' a^3 b'")
    assert w.compact() == "a^4 b'"
    assert len(w) == 5
    assert str(AB.parse_word("a^-2")) == "a' a'"
    assert not AB.parse_word("a a'")


def test_unknown_symbol():
    with pytest.raises(AlphabetError):
        AB.parse_word("a c")
    with pytest.raises(AlphabetError):
        Alphabet(("a", "a"))


def test_power_and_inverse():
    w = AB.parse_word("b a b'")
    assert (w**3).compact() == "b a^3 b'"
    assert (w**-2).compact() == "b a'^2 b'"
    assert not (w * w.inverse())


@given(F6_LETTERS)
def test_reduce_is_idempotent(letters):
    alphabet = automorphism("f6").alphabet
    w = reduce(alphabet, letters)
    assert reduce(alphabet, w.letters) == w
    assert all(x != -y for x, y in zip(w.letters, w.letters[1:]))


@settings(max_examples=50)
@given(F6_LETTERS)
def test_inverse_undoes_automorphism(letters):
    phi = automorphism("f6")
    w = reduce(phi.alphabet, letters)
    assert phi.inverse()(phi(w)) == w


@given(F6_LETTERS, F6_LETTERS)
def test_cyclic_word_is_conjugation_invariant(letters, conjugator):
    alphabet = automorphism("f6").alphabet
    w = reduce(alphabet, letters)
    g = reduce(alphabet, conjugator)
    assert cyclic_reduce(g * w * g.inverse())[0] == cyclic_reduce(w)[0]


def test_cyclic_reduce_splits_conjugator():
    w = AB.parse_word("b a a b'")
    core, conj = cyclic_reduce(w)
    assert str(core) == "a a"
    assert conj.compact() == "b"


def test_orbit_of_d_is_quadratic():
    phi = automorphism("f6")
    lengths = orbit_lengths(phi, phi.alphabet.parse_word("d"), 10)
    assert lengths == [k * k + 1 for k in range(11)]


def test_cyclic_orbit():
    phi = automorphism("eglinear")
    commutator = phi.alphabet.parse_word("x y x' y'")
    assert orbit_lengths(phi, commutator, 5, "cyclic") == [4] * 6


def test_iterate_negative_uses_inverse():
    phi = automorphism("f6")
    w = phi.alphabet.parse_word("d c")
    assert iterate(phi, iterate(phi, w, -3), 3) == w


def test_iterate_respects_limits():
    phi = automorphism("f6")
    with pytest.raises(ResourceLimit):
        iterate(phi, phi.alphabet.parse_word("x"), 40, ResourceLimits(max_word_length=100, max_iterations=64))
    with pytest.raises(ResourceLimit):
        orbit_lengths(phi, phi.alphabet.parse_word("a"), 10, limits=ResourceLimits(max_iterations=5))


def test_missing_inverse():
    phi = Automorphism(AB, {"a": "a", "b": "b a"})
    with pytest.raises(MissingInverse):
        phi.inverse()


def test_wrong_inverse_is_rejected():
    with pytest.raises(InverseMismatch):
        Automorphism(AB, {"a": "a", "b": "b a"}, {"a": "a", "b": "b a"})


def test_compose_and_power_agree():
    phi = automorphism("psi_f4")
    squared = power(phi, 2)
    composed = compose(phi, phi)
    for g in phi.alphabet.generators:
        assert squared.image_of(g) == composed.image_of(g)
    assert str(squared.image_of("d")) == "d c b' c b'"


def test_stabilize_renames_fresh_generator():
    phi = automorphism("f6")
    psi = stabilize(phi)
    assert psi.rank == 7
    assert psi.alphabet.generators[-1] == "a1"
    assert psi.image_of("a1").compact() == "a1"
    with pytest.raises(AlphabetError):
        stabilize(phi, rename=False)


def test_sphere_and_ball_sizes():
    assert len(sphere(AB, 1)) == 4
    assert len(sphere(AB, 2)) == 12
    assert len(ball(AB, 2)) == 17
    assert all(len(w) == 3 for w in sphere(AB, 3))


def test_random_word_is_reduced():
    rng = np.random.default_rng(7)
    for _ in range(20):
        assert len(random_word(AB, 9, rng)) == 9


def test_parse_automorphism_errors():
    with pytest.raises(ConfigError):
        parse_automorphism("[automorphism]\na -> a\n")
    with pytest.raises(ConfigError):
        parse_automorphism("[automorphism]\ngenerators = a\na = a\n")
    with pytest.raises(ConfigError):
        parse_automorphism("[automorphism]\ngenerators = a b\na -> a\nb -> c\n")


def test_format_round_trip():
    phi = automorphism("f6")
    again = parse_automorphism(format_automorphism(phi), name="again")
    assert [str(w) for w in again.images] == [str(w) for w in phi.images]
    assert [str(w) for w in again.inverse_images] == [str(w) for w in phi.inverse_images]
    assert again.strata == phi.strata


@settings(max_examples=100)
@given(F6_LETTERS, F6_LETTERS)
def test_apply_is_a_homomorphism(u_letters, v_letters):
    phi = automorphism("f6")
    u, v = reduce(phi.alphabet, u_letters), reduce(phi.alphabet, v_letters)
    assert apply(phi, u * v) == apply(phi, u) * apply(phi, v)


@settings(max_examples=50)
@given(F6_LETTERS)
def test_stabilized_cyclic_lengths_add_one(letters):
    phi = automorphism("f6")
    psi = stabilize(phi)
    w = reduce(phi.alphabet, letters)
    aw = psi.alphabet.parse_word("a1") * w.over(psi.alphabet)
    assert orbit_lengths(psi, aw, 4, "cyclic") == [n + 1 for n in orbit_lengths(phi, w, 4)]


def test_letter_powers_are_cached():
    phi = automorphism("f6")
    d = phi.alphabet.parse_word("d")
    assert phi.image_runs(-4, 3) == (phi.image(-4) ** 3).runs
    assert phi.image_runs(-4, 3) is phi.image_runs(-4, 3)
    assert apply(phi, d**3) == apply(phi, d) ** 3
    big = POWER_CACHE_LIMIT + 1
    assert phi.image_runs(2, big) == (phi.image(2) ** big).runs
    assert (2, big) not in phi._powers
