#!/usr/bin/env python3
"""
Worked example maps and word families.
Data files live in fixtures/; the families are built from them on demand.
"""

from functools import lru_cache
from pathlib import Path

from config import DEFAULT_LIMITS
from errors import ConfigError
from fgword import Automorphism, ReducedWord, iterate, parse_automorphism
from graphmap import GraphMap, parse_graph_map, rose

FIXTURE_DIR = Path(__file__).parent / "fixtures"

AUTOMORPHISMS = ("f6", "psi_f4", "eglinear", "identity")
GRAPH_MAPS = ("fastpoly", "bad_rtt")
WORD_FAMILIES = ("smoothex", "expex", "polyex", "eglinear", "linearsubtlety", "abc")
HALLWAY_WORDS = ("bulgeex", "bulgeex2")


@lru_cache(maxsize=None)
def automorphism(name: str) -> Automorphism:
    if name not in AUTOMORPHISMS:
        raise ConfigError(f"unknown automorphism fixture {name!r} (known: {', '.join(AUTOMORPHISMS)})")
    return parse_automorphism((FIXTURE_DIR / f"{name}.aut").read_text(), name=name)


@lru_cache(maxsize=None)
def graph_map(name: str) -> GraphMap:
    """Graph-map fixtures, including the rose of every automorphism fixture."""
    if name in AUTOMORPHISMS:
        return rose(automorphism(name))
    if name not in GRAPH_MAPS:
        raise ConfigError(f"unknown graph map fixture {name!r} (known: {', '.join(AUTOMORPHISMS + GRAPH_MAPS)})")
    return parse_graph_map((FIXTURE_DIR / f"{name}.gm").read_text(), name=name)


def fixture_text(name: str) -> str:
    for suffix in (".aut", ".gm"):
        path = FIXTURE_DIR / f"{name}{suffix}"
        if path.exists():
            return path.read_text()
    raise ConfigError(f"unknown fixture {name!r}")


def word_family(name: str, k: int = 5) -> list[ReducedWord]:
    """Example word families with parameter up to k."""
    if name == "smoothex":
        phi = automorphism("f6")
        words = []
        for m in range(-k, k + 1):
            for template in ("a^{m}", "b a^{m} b'", "c a^{m} c'", "b a^{m}", "c a^{m}", "c a^{m} b'"):
                words.append(phi.alphabet.parse_word(template.format(m=m)))
        return [w for w in dict.fromkeys(words) if w]
    if name == "expex":
        phi = automorphism("f6")
        return [iterate(phi, phi.alphabet.parse_word("x c"), -j, DEFAULT_LIMITS) * phi.alphabet.parse_word("b'") for j in range(1, k + 1)]
    if name == "polyex":
        phi = automorphism("f6")
        return [iterate(phi, phi.alphabet.parse_word("d c"), -j, DEFAULT_LIMITS) * phi.alphabet.parse_word("b'") for j in range(1, k + 1)]
    if name == "eglinear":
        phi = automorphism("eglinear")
        commutator = phi.alphabet.parse_word("x y x' y'")
        return [phi.alphabet.parse_word("a") * commutator**j for j in range(k + 1)] + [commutator]
    if name == "linearsubtlety":
        phi = automorphism("psi_f4")
        return [phi.alphabet.parse_word(w) for w in ("d", "d c b'", "b a^2 b'", "c b'", f"d b a^{k}")]
    if name == "abc":
        from fgword import Alphabet, ball

        phi = automorphism("f6")
        sub = Alphabet(("a", "b", "c"))
        return [w.over(phi.alphabet) for w in ball(sub, min(k, 4)) if w]
    raise ConfigError(f"unknown word family {name!r} (known: {', '.join(WORD_FAMILIES)})")


def hallway_word(name: str, k: int = 5) -> str:
    """Group-form hallway words over f6 with stable letter t."""
    if name == "bulgeex":
        return f"t^-{k} c t^-{k} b' t^{2 * k} b c'"
    if name == "bulgeex2":
        return f"t^-{k} b' t^-{k} b t^{k} b' t^{k} b"
    raise ConfigError(f"unknown hallway fixture {name!r} (known: {', '.join(HALLWAY_WORDS)})")
