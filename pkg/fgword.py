#!/usr/bin/env python3
"""
Free group words, cyclic words and automorphisms.
Words are stored as run-length blocks (letter, exponent); letters are signed generator indices.
"""

import logging
from typing import Iterable, Iterator, Literal, Mapping, Optional, Sequence, Union

from config import DEFAULT_LIMITS, ResourceLimits
from errors import AlphabetError, ConfigError, InverseMismatch, MissingInverse, ResourceLimit

logger = logging.getLogger(__name__)

Run = tuple[int, int]
WordLike = Union["ReducedWord", str, Sequence[int]]

POWER_CACHE_LIMIT = 64


class Alphabet:
    """Ordered generator names; letter +i is generator i (1-based), -i its inverse."""

    __slots__ = ("generators", "_index")

    def __init__(self, generators: Sequence[str]):
        generators = tuple(generators)
        if not generators:
            raise AlphabetError("alphabet needs at least one generator")
        for name in generators:
            if not name or any(ch in name for ch in " \t'^#[]="):
                raise AlphabetError(f"invalid generator name {name!r}")
        if len(set(generators)) != len(generators):
            raise AlphabetError(f"duplicate generator names in {generators}")
        self.generators = generators
        self._index = {name: i + 1 for i, name in enumerate(generators)}

    @property
    def rank(self) -> int:
        return len(self.generators)

    def __eq__(self, other):
        return isinstance(other, Alphabet) and self.generators == other.generators

    def __hash__(self):
        return hash(self.generators)

    def __repr__(self):
        return f"Alphabet({' '.join(self.generators)})"

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise AlphabetError(f"unknown symbol {name!r} (generators: {' '.join(self.generators)})") from None

    def token(self, letter: int) -> str:
        name = self.generators[abs(letter) - 1]
        return name if letter > 0 else name + "'"

    def letters(self) -> list[int]:
        """All letters in shortlex order: a, a', b, b', ..."""
        out = []
        for i in range(1, self.rank + 1):
            out.extend((i, -i))
        return out

    def check_letter(self, letter: int) -> int:
        if letter == 0 or abs(letter) > self.rank:
            raise AlphabetError(f"letter {letter} outside rank {self.rank}")
        return letter

    def parse_token(self, token: str) -> Run:
        """`x`, `x'`, `x^n`, `x'^n` -> (letter, signed exponent)"""
        exponent = 1
        if "^" in token:
            token, _, power = token.partition("^")
            try:
                exponent = int(power)
            except ValueError:
                raise AlphabetError(f"bad exponent in {token}^{power}") from None
        if token.endswith("'"):
            return -self.index(token[:-1]), exponent
        return self.index(token), exponent

    def parse_word(self, text: str) -> "ReducedWord":
        stack = RunStack()
        for token in text.split():
            letter, exponent = self.parse_token(token)
            if exponent < 0:
                letter, exponent = -letter, -exponent
            stack.push(letter, exponent)
        return ReducedWord(self, stack.runs)

    def extended(self, name: str) -> "Alphabet":
        return Alphabet(self.generators + (name,))


class RunStack:
    """Leftmost-first free reduction over run-length blocks."""

    __slots__ = ("runs", "length")

    def __init__(self, runs: Iterable[Run] = ()):
        self.runs: list[Run] = []
        self.length = 0
        for letter, count in runs:
            self.push(letter, count)

    def push(self, letter: int, count: int = 1) -> None:
        runs = self.runs
        while count and runs:
            top, top_count = runs[-1]
            if top == letter:
                runs[-1] = (letter, top_count + count)
                self.length += count
                return
            if top != -letter:
                break
            if top_count > count:
                runs[-1] = (top, top_count - count)
                self.length -= count
                return
            runs.pop()
            self.length -= top_count
            count -= top_count
        if count:
            runs.append((letter, count))
            self.length += count

    def extend(self, runs: Iterable[Run]) -> None:
        for letter, count in runs:
            self.push(letter, count)


def _expand(runs: Iterable[Run]) -> Iterator[int]:
    for letter, count in runs:
        for _ in range(count):
            yield letter


def _invert_runs(runs: Sequence[Run]) -> tuple[Run, ...]:
    return tuple((-letter, count) for letter, count in reversed(runs))


class ReducedWord:
    """A freely reduced word. Build with `reduce` or `Alphabet.parse_word`."""

    __slots__ = ("alphabet", "runs", "length")

    def __init__(self, alphabet: Alphabet, runs: Iterable[Run]):
        self.alphabet = alphabet
        self.runs = tuple(runs)
        self.length = sum(count for _, count in self.runs)

    @property
    def letters(self) -> tuple[int, ...]:
        return tuple(_expand(self.runs))

    def __len__(self):
        return self.length

    def __iter__(self):
        return _expand(self.runs)

    def __bool__(self):
        return self.length > 0

    def __eq__(self, other):
        if not isinstance(other, ReducedWord):
            return NotImplemented
        return self.runs == other.runs and self.alphabet == other.alphabet

    def __hash__(self):
        return hash((self.alphabet.generators, self.runs))

    def __str__(self):
        return " ".join(self.alphabet.token(letter) for letter in self)

    def __repr__(self):
        return f"ReducedWord({self.compact()!r})"

    def compact(self) -> str:
        parts = []
        for letter, count in self.runs:
            token = self.alphabet.token(letter)
            parts.append(token if count == 1 else f"{token}^{count}")
        return " ".join(parts)

    def inverse(self) -> "ReducedWord":
        return ReducedWord(self.alphabet, _invert_runs(self.runs))

    def __mul__(self, other: "ReducedWord") -> "ReducedWord":
        stack = RunStack(self.runs)
        stack.extend(other.runs)
        return ReducedWord(self.alphabet, stack.runs)

    def __pow__(self, n: int) -> "ReducedWord":
        if n < 0:
            return self.inverse() ** -n
        if n == 0 or not self:
            return ReducedWord(self.alphabet, ())
        core, conj = cyclic_reduce(self)
        stack = RunStack(conj.runs)
        if len(core.runs) == 1:
            letter, count = core.runs[0]
            stack.push(letter, count * n)
        else:
            for _ in range(n):
                stack.extend(core.runs)
        stack.extend(_invert_runs(conj.runs))
        return ReducedWord(self.alphabet, stack.runs)

    def over(self, alphabet: Alphabet) -> "ReducedWord":
        """Same letters, read in a larger alphabet that keeps the old indices."""
        if alphabet.generators[: self.alphabet.rank] != self.alphabet.generators:
            raise AlphabetError(f"{alphabet!r} does not extend {self.alphabet!r}")
        return ReducedWord(alphabet, self.runs)


def least_rotation(seq: Sequence[int]) -> int:
    """Booth's algorithm: start index of the lexicographically least rotation."""
    n = len(seq)
    if n == 0:
        return 0
    doubled = list(seq) + list(seq)
    failure = [-1] * (2 * n)
    k = 0
    for j in range(1, 2 * n):
        sj = doubled[j]
        i = failure[j - k - 1]
        while i != -1 and sj != doubled[k + i + 1]:
            if sj < doubled[k + i + 1]:
                k = j - i - 1
            i = failure[i]
        if sj != doubled[k + i + 1]:
            if sj < doubled[k]:
                k = j
            failure[j - k] = -1
        else:
            failure[j - k] = i + 1
    return k


class CyclicWord:
    """Cyclically reduced representative of a conjugacy class."""

    __slots__ = ("alphabet", "runs", "length", "_canonical")

    def __init__(self, alphabet: Alphabet, runs: Iterable[Run]):
        self.alphabet = alphabet
        self.runs = tuple(runs)
        self.length = sum(count for _, count in self.runs)
        self._canonical = None

    @property
    def letters(self) -> tuple[int, ...]:
        return tuple(_expand(self.runs))

    def __len__(self):
        return self.length

    def canonical(self) -> tuple[int, ...]:
        if self._canonical is None:
            letters = self.letters
            k = least_rotation(letters)
            self._canonical = letters[k:] + letters[:k]
        return self._canonical

    def __eq__(self, other):
        if not isinstance(other, CyclicWord):
            return NotImplemented
        return (
            self.alphabet == other.alphabet
            and self.length == other.length
            and self.canonical() == other.canonical()
        )

    def __hash__(self):
        return hash((self.alphabet.generators, self.canonical()))

    def __str__(self):
        return " ".join(self.alphabet.token(letter) for letter in self.letters)

    def as_word(self) -> ReducedWord:
        return ReducedWord(self.alphabet, self.runs)


def reduce(alphabet: Alphabet, letters: Union[str, Iterable[int]]) -> ReducedWord:
    """Freely reduce a raw letter sequence, cancelling leftmost pairs first."""
    if isinstance(letters, str):
        return alphabet.parse_word(letters)
    stack = RunStack()
    for letter in letters:
        stack.push(alphabet.check_letter(letter))
    return ReducedWord(alphabet, stack.runs)


def as_word(alphabet: Alphabet, w: WordLike) -> ReducedWord:
    if isinstance(w, ReducedWord):
        return w
    return reduce(alphabet, w)


def cyclic_reduce(w: ReducedWord) -> tuple[CyclicWord, ReducedWord]:
    """w = conjugator · core · conjugator⁻¹ with core cyclically reduced."""
    runs = list(w.runs)
    conj = RunStack()
    while len(runs) >= 2 and runs[0][0] == -runs[-1][0]:
        (first, c0), (last, c1) = runs[0], runs[-1]
        m = min(c0, c1)
        conj.push(first, m)
        if c1 == m:
            runs.pop()
        else:
            runs[-1] = (last, c1 - m)
        if c0 == m:
            runs.pop(0)
        else:
            runs[0] = (first, c0 - m)
    return CyclicWord(w.alphabet, runs), ReducedWord(w.alphabet, conj.runs)


class Automorphism:
    """Generator -> word map, optionally with a verified inverse."""

    __slots__ = ("alphabet", "images", "inverse_images", "strata", "name", "_powers")

    def __init__(
        self,
        alphabet: Alphabet,
        images: Mapping[str, WordLike],
        inverse_images: Optional[Mapping[str, WordLike]] = None,
        strata: Optional[Sequence[Sequence[str]]] = None,
        name: str = "phi",
    ):
        self.alphabet = alphabet
        self.name = name
        self.images = self._collect(images, "images")
        self._powers: dict[Run, tuple[Run, ...]] = {}
        self.inverse_images = None
        self.strata = tuple(tuple(s) for s in strata) if strata else None
        if inverse_images is not None:
            self.inverse_images = self._collect(inverse_images, "inverse images")
            self._verify_inverse()

    def _collect(self, images: Mapping[str, WordLike], what: str) -> tuple[ReducedWord, ...]:
        missing = [g for g in self.alphabet.generators if g not in images]
        if missing:
            raise AlphabetError(f"{what} missing for generators: {' '.join(missing)}")
        extra = [g for g in images if g not in self.alphabet]
        if extra:
            raise AlphabetError(f"{what} given for unknown generators: {' '.join(extra)}")
        return tuple(as_word(self.alphabet, images[g]) for g in self.alphabet.generators)

    def _verify_inverse(self) -> None:
        inverse = Automorphism(self.alphabet, dict(zip(self.alphabet.generators, self.inverse_images)))
        unlimited = ResourceLimits(max_word_length=10**9, max_iterations=1)
        for g in self.alphabet.generators:
            x = self.alphabet.parse_word(g)
            if apply(inverse, apply(self, x, unlimited), unlimited) != x:
                raise InverseMismatch(f"inverse∘{self.name} does not fix {g}")
            if apply(self, apply(inverse, x, unlimited), unlimited) != x:
                raise InverseMismatch(f"{self.name}∘inverse does not fix {g}")

    @property
    def rank(self) -> int:
        return self.alphabet.rank

    @property
    def max_image_length(self) -> int:
        return max(len(w) for w in self.images)

    @property
    def has_inverse(self) -> bool:
        return self.inverse_images is not None

    def image(self, letter: int) -> ReducedWord:
        w = self.images[abs(letter) - 1]
        return w if letter > 0 else w.inverse()

    def image_runs(self, letter: int, count: int = 1) -> tuple[Run, ...]:
        """Runs of φ(letter^count); short powers are cached."""
        runs = self._powers.get((letter, count))
        if runs is None:
            image = self.image(letter)
            runs = image.runs if count == 1 else (image**count).runs
            if count <= POWER_CACHE_LIMIT:
                self._powers[(letter, count)] = runs
        return runs

    def image_of(self, generator: str) -> ReducedWord:
        return self.images[self.alphabet.index(generator) - 1]

    def inverse(self) -> "Automorphism":
        if self.inverse_images is None:
            raise MissingInverse(f"{self.name} was given without an [inverse] section")
        gens = self.alphabet.generators
        return Automorphism(
            self.alphabet,
            dict(zip(gens, self.inverse_images)),
            dict(zip(gens, self.images)),
            name=f"{self.name}^-1",
        )

    def __call__(self, w: WordLike, limits: ResourceLimits = DEFAULT_LIMITS) -> ReducedWord:
        return apply(self, as_word(self.alphabet, w), limits)

    def __repr__(self):
        body = ", ".join(f"{g}->{w.compact()}" for g, w in zip(self.alphabet.generators, self.images))
        return f"Automorphism({body})"


def apply(phi: Automorphism, w: ReducedWord, limits: ResourceLimits = DEFAULT_LIMITS) -> ReducedWord:
    """φ(w), freely reduced. Every reduced prefix image is held to max_word_length."""
    stack = RunStack()
    for letter, count in w.runs:
        stack.extend(phi.image_runs(letter, count))
        if stack.length > limits.max_word_length:
            logger.warning(f"⚠️ {phi.name}: image exceeds {limits.max_word_length} letters")
            raise ResourceLimit(
                f"image of a word of length {w.length} exceeds max_word_length={limits.max_word_length}",
                witness=w.compact(),
            )
    return ReducedWord(phi.alphabet, stack.runs)


def iterate(phi: Automorphism, w: ReducedWord, k: int, limits: ResourceLimits = DEFAULT_LIMITS) -> ReducedWord:
    if abs(k) > limits.max_iterations:
        raise ResourceLimit(f"|k|={abs(k)} exceeds max_iterations={limits.max_iterations}")
    if k < 0:
        phi, k = phi.inverse(), -k
    for _ in range(k):
        w = apply(phi, w, limits)
    return w


def orbit_lengths(
    phi: Automorphism,
    w: ReducedWord,
    N: int,
    mode: Literal["word", "cyclic"] = "word",
    limits: ResourceLimits = DEFAULT_LIMITS,
) -> list[int]:
    if N > limits.max_iterations:
        raise ResourceLimit(f"N={N} exceeds max_iterations={limits.max_iterations}")
    if mode == "cyclic":
        current = cyclic_reduce(w)[0].as_word()
    else:
        current = w
    lengths = [current.length]
    for _ in range(N):
        current = apply(phi, current, limits)
        if mode == "cyclic":
            current = cyclic_reduce(current)[0].as_word()
        lengths.append(current.length)
    return lengths


def compose(phi: Automorphism, psi: Automorphism, limits: ResourceLimits = DEFAULT_LIMITS) -> Automorphism:
    """(φ∘ψ)(x) = φ(ψ(x))"""
    gens = phi.alphabet.generators
    images = {g: apply(phi, psi.image_of(g), limits) for g in gens}
    inverse = None
    if phi.has_inverse and psi.has_inverse:
        inverse = {g: apply(psi.inverse(), phi.inverse().image_of(g), limits) for g in gens}
    return Automorphism(phi.alphabet, images, inverse, name=f"{phi.name}∘{psi.name}")


def power(phi: Automorphism, k: int, limits: ResourceLimits = DEFAULT_LIMITS) -> Automorphism:
    if k < 0:
        return power(phi.inverse(), -k, limits)
    gens = phi.alphabet.generators
    images = {g: iterate(phi, phi.alphabet.parse_word(g), k, limits) for g in gens}
    inverse = None
    if phi.has_inverse:
        inverse = {g: iterate(phi, phi.alphabet.parse_word(g), -k, limits) for g in gens}
    return Automorphism(phi.alphabet, images, inverse, name=f"{phi.name}^{k}")


def stabilize(phi: Automorphism, fresh: str = "a", rename: bool = True) -> Automorphism:
    """Add a generator fixed by the new automorphism: ψ(x_i) = φ(x_i), ψ(fresh) = fresh."""
    if fresh in phi.alphabet:
        if not rename:
            raise AlphabetError(f"fresh generator {fresh!r} already in {phi.alphabet!r}")
        n = 1
        while f"{fresh}{n}" in phi.alphabet:
            n += 1
        fresh = f"{fresh}{n}"
    alphabet = phi.alphabet.extended(fresh)
    images = {g: w.over(alphabet) for g, w in zip(phi.alphabet.generators, phi.images)}
    images[fresh] = alphabet.parse_word(fresh)
    inverse = None
    if phi.has_inverse:
        inverse = {g: w.over(alphabet) for g, w in zip(phi.alphabet.generators, phi.inverse_images)}
        inverse[fresh] = alphabet.parse_word(fresh)
    return Automorphism(alphabet, images, inverse, name=f"{phi.name}+{fresh}")


def sphere(alphabet: Alphabet, radius: int) -> list[ReducedWord]:
    """All reduced words of exactly `radius` letters, shortlex order."""
    words: list[tuple[int, ...]] = [()]
    for _ in range(radius):
        words = [w + (x,) for w in words for x in alphabet.letters() if not w or x != -w[-1]]
    return [reduce(alphabet, w) for w in words]


def ball(alphabet: Alphabet, radius: int) -> list[ReducedWord]:
    out = []
    for r in range(radius + 1):
        out.extend(sphere(alphabet, r))
    return out


def random_word(alphabet: Alphabet, length: int, rng) -> ReducedWord:
    """Uniform reduced word of the given length; rng is a numpy Generator."""
    letters: list[int] = []
    choices = alphabet.letters()
    while len(letters) < length:
        x = choices[int(rng.integers(len(choices)))]
        if letters and x == -letters[-1]:
            continue
        letters.append(x)
    return reduce(alphabet, letters)


# Text format

def _sections(text: str) -> Iterator[tuple[str, int, str]]:
    section = ""
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            continue
        yield section, number, line


def parse_automorphism(text: str, name: str = "phi") -> Automorphism:
    generators = None
    tables: dict[str, dict[str, str]] = {"automorphism": {}, "inverse": {}}
    strata: dict[int, list[str]] = {}
    for section, number, line in _sections(text):
        if section == "automorphism" and line.startswith("generators"):
            _, _, rest = line.partition("=")
            generators = rest.split()
        elif section in tables:
            source, arrow, target = line.partition("->")
            if not arrow:
                raise ConfigError(f"expected 'x -> word', got {line!r}", number, section)
            key = source.strip()
            if key in tables[section]:
                raise ConfigError(f"duplicate image for {key}", number, section)
            tables[section][key] = target
        elif section == "filtration":
            head, eq, body = line.partition("=")
            parts = head.split()
            if not eq or len(parts) != 2 or parts[0] != "stratum" or not parts[1].isdigit():
                raise ConfigError(f"expected 'stratum r = x y', got {line!r}", number, section)
            strata[int(parts[1])] = body.split()
        else:
            raise ConfigError(f"unexpected line {line!r}", number, section or "top")
    if generators is None:
        raise ConfigError("missing 'generators = ...'", section="automorphism")
    try:
        alphabet = Alphabet(generators)
        images = {g: alphabet.parse_word(w) for g, w in tables["automorphism"].items()}
        inverse = None
        if tables["inverse"]:
            inverse = {g: alphabet.parse_word(w) for g, w in tables["inverse"].items()}
        declared = [strata[r] for r in sorted(strata)] if strata else None
        return Automorphism(alphabet, images, inverse, strata=declared, name=name)
    except (AlphabetError, InverseMismatch) as e:
        raise ConfigError(str(e), section="automorphism") from e


def format_automorphism(phi: Automorphism) -> str:
    gens = phi.alphabet.generators
    lines = ["[automorphism]", "generators = " + " ".join(gens)]
    lines += [f"{g} -> {w}" for g, w in zip(gens, phi.images)]
    if phi.inverse_images is not None:
        lines.append("[inverse]")
        lines += [f"{g} -> {w}" for g, w in zip(gens, phi.inverse_images)]
    if phi.strata:
        lines.append("[filtration]")
        lines += [f"stratum {r} = {' '.join(s)}" for r, s in enumerate(phi.strata, start=1)]
    return "\n".join(lines) + "\n"
