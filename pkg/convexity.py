#!/usr/bin/env python3
"""
Coarse convexity measurements.

empirical_K maximises |φ^i(w)| / (|w| + |φ^N(w)|) over a corpus and the triangle
0 ≤ i ≤ N ≤ N_max. The ledger assembles the constants of the polynomial-growth
recurrences and the word/cyclic reductions.
"""

import csv
import io
import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from typing import Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field

from config import DEFAULT_BOUNDS, DEFAULT_LIMITS, TTCONVEX_THREADS, ResourceLimits, SearchBounds
from errors import (
    ConfigError,
    EmptyAfterExclusion,
    MissingInput,
    NotApplicable,
    ResourceLimit,
    Unknown,
)
from fgword import Automorphism, ReducedWord, apply, ball, cyclic_reduce, random_word, sphere
from graphmap import (
    Circuit,
    EdgePath,
    GraphMap,
    enumerate_paths,
    growth_degree,
    is_nielsen_path,
    map_circuit,
    map_path,
    rose,
)

logger = logging.getLogger(__name__)

Mode = Literal["word", "cyclic", "path", "circuit"]
Item = Union[ReducedWord, EdgePath, Circuit]


class Witness(BaseModel):
    word: str
    i: int
    N: int
    ratio: float


class ConvexityReport(BaseModel):
    mode: Mode
    corpus: str
    corpus_size: int
    N_max: int
    empirical_K: float
    witness: Optional[Witness] = None
    series: list[float] = []
    diagonal: list[float] = []
    skipped: list[str] = []
    flags: list[str] = []
    orbits: list[tuple[str, list[float]]] = Field(default=[], exclude=True)

    def to_csv(self) -> str:
        """One row per (word, i, N) with 0 ≤ i ≤ N; words with |w| + |φ^N(w)| = 0 are left out."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["word", "i", "N", "ratio"])
        for word, lengths in self.orbits:
            for N in range(len(lengths)):
                denominator = lengths[0] + lengths[N]
                if denominator == 0:
                    continue
                for i in range(N + 1):
                    writer.writerow([word, i, N, f"{lengths[i] / denominator:.10g}"])
        return buffer.getvalue()


def stabilization(report: ConvexityReport, n_small: int) -> float:
    """empirical_K the same corpus would give with N_max = n_small."""
    if not 0 <= n_small <= report.N_max:
        raise ConfigError(f"n_small={n_small} outside 0..{report.N_max}")
    return max(report.series[: n_small + 1], default=0.0)


class Stabilization(BaseModel):
    corpus: str
    n_small: int
    n_large: int
    K_small: float
    K_large: float
    relative_change: float
    tolerance: float

    @property
    def stable(self) -> bool:
        return self.relative_change <= self.tolerance


def stabilization_check(
    source: Union[Automorphism, GraphMap],
    corpus: Sequence[Union[Item, str]],
    n_small: int = 12,
    n_large: int = 16,
    tolerance: float = 0.05,
    **kwargs,
) -> Stabilization:
    """empirical_K at n_small against n_large, read off a single n_large run."""
    if n_small > n_large:
        raise ConfigError(f"n_small={n_small} exceeds n_large={n_large}")
    report = empirical_K(source, corpus, n_large, **kwargs)
    small = stabilization(report, n_small)
    change = (report.empirical_K - small) / small if small else 0.0
    return Stabilization(
        corpus=report.corpus,
        n_small=n_small,
        n_large=n_large,
        K_small=small,
        K_large=report.empirical_K,
        relative_change=change,
        tolerance=tolerance,
    )


def _orbit(source, item: Item, N: int, mode: Mode, limits: ResourceLimits) -> list[float]:
    if mode == "word":
        current = item
        lengths = [float(len(current))]
        for _ in range(N):
            current = apply(source, current, limits)
            lengths.append(float(len(current)))
        return lengths
    if mode == "cyclic":
        current = cyclic_reduce(item)[0].as_word()
        lengths = [float(len(current))]
        for _ in range(N):
            current = cyclic_reduce(apply(source, current, limits))[0].as_word()
            lengths.append(float(len(current)))
        return lengths
    if mode == "path":
        current = item
        lengths = [source.length(current)]
        for _ in range(N):
            current = map_path(source, current, 1, limits)
            lengths.append(source.length(current))
        return lengths
    current = item
    lengths = [source.length(current)]
    for _ in range(N):
        current = map_circuit(source, current, 1, limits)
        lengths.append(source.length(current))
    return lengths


def _coerce(source, item, mode: Mode) -> Item:
    if isinstance(item, str):
        if mode in ("word", "cyclic"):
            return source.alphabet.parse_word(item)
        edges = source.graph.parse_edges(item)
        return Circuit(source.graph, edges) if mode == "circuit" else source.graph.parse_path(item)
    if mode == "circuit" and isinstance(item, EdgePath):
        return Circuit(source.graph, item.edges)
    return item


def _orbit_key(item: Item, mode: Mode, index: int):
    """Entries with equal keys have equal length orbits: w and w⁻¹, and conjugates in cyclic mode."""
    if mode == "word":
        return min(item.runs, item.inverse().runs)
    if mode == "cyclic":
        return min(cyclic_reduce(item)[0].canonical(), cyclic_reduce(item.inverse())[0].canonical())
    return index


def empirical_K(
    source: Union[Automorphism, GraphMap],
    corpus: Sequence[Union[Item, str]],
    N_max: int,
    mode: Mode = "word",
    limits: ResourceLimits = DEFAULT_LIMITS,
    corpus_name: str = "custom",
    threads: int = TTCONVEX_THREADS,
) -> ConvexityReport:
    """Largest |φ^i(w)| / (|w| + |φ^N(w)|) over the corpus and 0 ≤ i ≤ N ≤ N_max.

    Ties between entries go to the lexicographically smallest label.
    """
    if not corpus:
        raise ConfigError("empty corpus")
    if N_max > limits.max_iterations:
        raise ResourceLimit(f"N_max={N_max} exceeds max_iterations={limits.max_iterations}")
    if mode in ("word", "cyclic") and not isinstance(source, Automorphism):
        raise ConfigError(f"{mode} mode needs an automorphism")
    if mode in ("path", "circuit") and isinstance(source, Automorphism):
        source = rose(source)
    items = [_coerce(source, item, mode) for item in corpus]
    keys = [_orbit_key(item, mode, n) for n, item in enumerate(items)]
    representatives: dict = {}
    for key, item in zip(keys, items):
        representatives.setdefault(key, item)

    def evaluate(key):
        try:
            return _orbit(source, representatives[key], N_max, mode, limits), None
        except ResourceLimit as e:
            return None, str(e)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        computed = dict(zip(representatives, pool.map(evaluate, representatives)))
    logger.debug(f"{len(representatives)} distinct orbits for {len(items)} corpus entries")

    series = [0.0] * (N_max + 1)
    diagonal = [0.0] * (N_max + 1)
    best: Optional[Witness] = None
    orbits, skipped = [], []
    for item, key in zip(items, keys):
        lengths, problem = computed[key]
        label = item.compact() if isinstance(item, ReducedWord) else str(item)
        if lengths is None:
            skipped.append(f"{item}: {problem}")
            continue
        orbits.append((label, lengths))
        peak, argpeak = -1.0, 0
        candidate: Optional[Witness] = None
        for N, length in enumerate(lengths):
            if length > peak:
                peak, argpeak = length, N
            denominator = lengths[0] + length
            if denominator == 0:
                continue
            ratio = peak / denominator
            series[N] = max(series[N], ratio)
            diagonal[N] = max(diagonal[N], length / denominator)
            if candidate is None or ratio > candidate.ratio:
                candidate = Witness(word=label, i=argpeak, N=N, ratio=ratio)
        if candidate is None:
            continue
        if best is None or candidate.ratio > best.ratio or (candidate.ratio == best.ratio and label < best.word):
            best = candidate
    flags = []
    if skipped:
        flags.append("resource-limit")
        logger.warning(f"⚠️ {len(skipped)} corpus entries hit resource limits and were skipped")
    report = ConvexityReport(
        mode=mode,
        corpus=corpus_name,
        corpus_size=len(items),
        N_max=N_max,
        empirical_K=best.ratio if best else 0.0,
        witness=best,
        series=series,
        diagonal=diagonal,
        skipped=skipped,
        flags=flags,
        orbits=orbits,
    )
    logger.info(f"📊 empirical K = {report.empirical_K:.10g} over {len(orbits)} entries, N_max = {N_max}")
    return report


# Lower-bound fits


class LowerBoundFit(BaseModel):
    r: int
    kind: Literal["polynomial", "exponential"]
    degree: Optional[int] = None
    constant: float
    witness: str
    witness_k: int
    k_max: int
    used: int
    excluded: int


def _splits_low_or_nielsen(f: GraphMap, rho: EdgePath, r: int, max_period: int) -> bool:
    """ρ is a concatenation of Nielsen paths and paths in G_(r−1)."""
    n = len(rho)
    ok = [False] * (n + 1)
    ok[n] = True
    for i in range(n - 1, -1, -1):
        for j in range(i + 1, n + 1):
            if not ok[j]:
                continue
            piece = rho.sub(i, j)
            if f.height(piece) < r or is_nielsen_path(f, piece, max_period):
                ok[i] = True
                break
    return ok[0]


def lowerbound_fit(
    f: Union[GraphMap, Automorphism],
    corpus: Sequence[Union[EdgePath, str]],
    k_max: int,
    r: Optional[int] = None,
    bounds: SearchBounds = DEFAULT_BOUNDS,
    limits: ResourceLimits = DEFAULT_LIMITS,
) -> LowerBoundFit:
    """Largest C with 𝓛(γ) + 𝓛(f^k_#γ) ≥ C·k^d, or largest λ with the λ^k bound, for 1 ≤ k ≤ k_max."""
    if isinstance(f, Automorphism):
        f = rose(f)
    paths = [f.path(p) if isinstance(p, str) else p for p in corpus]
    if r is None:
        r = max((f.height(p) for p in paths), default=0)
    stratum = f.filtration[r]
    paths = [p for p in paths if f.height(p) == r]
    if stratum.kind == "zero":
        raise NotApplicable(f"stratum {r} is a zero stratum")
    degree = None
    kind = "exponential"
    if stratum.kind == "polynomial":
        label = growth_degree(f, stratum.single_edge + 1, bounds)
        if isinstance(label, int):
            if label == 0:
                raise NotApplicable(f"stratum {r} has constant growth")
            degree, kind = label, "polynomial"
    used, excluded = [], 0
    for p in paths:
        if kind == "exponential" and _splits_low_or_nielsen(f, p, r, bounds.nielsen_period):
            excluded += 1
            continue
        used.append(p)
    if not used:
        raise EmptyAfterExclusion(f"all {len(paths)} height-{r} paths are Nielsen/low concatenations")
    best, witness, witness_k = math.inf, "", 0
    for p in used:
        base = f.length(p)
        current = p
        for k in range(1, k_max + 1):
            current = map_path(f, current, 1, limits)
            total = base + f.length(current)
            value = total / k**degree if kind == "polynomial" else total ** (1.0 / k)
            if value < best:
                best, witness, witness_k = value, str(p), k
    logger.debug(f"lower-bound fit on stratum {r}: {kind} constant {best:.6g}")
    return LowerBoundFit(
        r=r,
        kind=kind,
        degree=degree,
        constant=best,
        witness=witness,
        witness_k=witness_k,
        k_max=k_max,
        used=len(used),
        excluded=excluded,
    )


# Constant ledger

_STRENGTH = {"paper-recurrence": 2, "measured": 1, "heuristic": 0}


class LedgerInputs(BaseModel):
    q: Optional[int] = Field(default=None, ge=1)
    K_nonlin: Optional[float] = None
    M: Optional[float] = None
    C: Optional[float] = None
    L: Optional[float] = None
    k: int = Field(default=1, ge=1)
    K_prime: Optional[float] = None
    exponential: bool = False
    empirical_K: Optional[float] = None
    provenance: dict[str, Literal["measured", "paper-recurrence", "heuristic"]] = {}


class LedgerEntry(BaseModel):
    name: str
    value: float
    provenance: str


class ConstantLedger(BaseModel):
    inputs: LedgerInputs
    K_poly: list[float]
    K_prime_poly: list[float]
    K_prime: float
    K_cyclic: Optional[float] = None
    K_word: float
    entries: list[LedgerEntry]
    flags: list[str] = []

    def value(self, name: str) -> float:
        for entry in self.entries:
            if entry.name == name:
                return entry.value
        raise KeyError(name)


def K_prime_poly(d: int, C: float, K: Sequence[float]) -> float:
    """K'_1(C) = 4C², K'_(d+1)(C) = 4C²K_d + 2C·K'_d(2C); K[d-1] is K_d."""
    if d == 1:
        return 4 * C * C
    return 4 * C * C * K[d - 2] + 2 * C * K_prime_poly(d - 1, 2 * C, K)


def ledger(inputs: LedgerInputs) -> ConstantLedger:
    missing = []
    if inputs.q is None:
        missing.append("q (polynomial degree of the automorphism)")
    elif inputs.q >= 2:
        missing += [name for name in ("K_nonlin", "M", "C") if getattr(inputs, name) is None]
    if missing:
        raise MissingInput(missing)
    q = inputs.q

    def weakest(*names: str) -> str:
        sources = [inputs.provenance.get(n, "measured") for n in names]
        return min(sources + ["paper-recurrence"], key=_STRENGTH.__getitem__)

    entries = [LedgerEntry(name="K_1", value=1.0, provenance="paper-recurrence")]
    K = [1.0]
    for d in range(1, q):
        K.append(inputs.K_nonlin + K[-1] + inputs.M)
        entries.append(LedgerEntry(name=f"K_{d + 1}", value=K[-1], provenance=weakest("K_nonlin", "M")))
    K_primes = []
    if inputs.C is not None:
        for d in range(1, q + 1):
            K_primes.append(K_prime_poly(d, inputs.C, K))
            used = ("C",) if d == 1 else ("C", "K_nonlin", "M")
            entries.append(LedgerEntry(name=f"K'_{d}", value=K_primes[-1], provenance=weakest(*used)))
    if inputs.K_prime is not None:
        K_prime, prime_source = inputs.K_prime, weakest("K_prime")
    else:
        K_prime, prime_source = K[-1], entries[q - 1].provenance
    flags = []
    K_cyclic = None
    if inputs.L is not None:
        K_cyclic = inputs.L ** (2 * inputs.k) * K_prime
        entries.append(LedgerEntry(name="K_cyclic", value=K_cyclic, provenance=min(prime_source, weakest("L"), key=_STRENGTH.__getitem__)))
    K_word = 2 * K_prime
    entries.append(LedgerEntry(name="K_word", value=K_word, provenance=prime_source))
    if inputs.exponential:
        flags.append("empirical-only")
        if inputs.empirical_K is not None:
            entries.append(LedgerEntry(name="empirical_K", value=inputs.empirical_K, provenance="measured"))
    if any(entry.provenance == "heuristic" for entry in entries):
        flags.append("heuristic-input")
    return ConstantLedger(
        inputs=inputs,
        K_poly=K,
        K_prime_poly=K_primes,
        K_prime=K_prime,
        K_cyclic=K_cyclic,
        K_word=K_word,
        entries=entries,
        flags=flags,
    )


def power_inputs(phi: Automorphism, k: int, **values) -> LedgerInputs:
    """Inputs for a map representing φ^k: L is recomputed from φ's own images."""
    provenance = dict(values.pop("provenance", {}))
    provenance.setdefault("L", "measured")
    return LedgerInputs(L=float(phi.max_image_length), k=k, provenance=provenance, **values)


def polynomial_degree(f: GraphMap, bounds: SearchBounds = DEFAULT_BOUNDS) -> tuple[Optional[int], bool]:
    """(max polynomial degree, whether an exponential or fast stratum is present)."""
    q, exponential = None, False
    for s in f.filtration.strata:
        if s.kind == "exponential":
            exponential = True
        elif s.kind == "polynomial":
            try:
                label = growth_degree(f, s.single_edge + 1, bounds)
            except (Unknown, TypeError):
                exponential = True
                continue
            if label == "fast":
                exponential = True
            else:
                q = max(q or 1, label)
    return q, exponential


# Corpora

_CORPUS = re.compile(r"^\s*(\w+)\s*\((.*)\)\s*$")


def _arguments(text: str) -> tuple[list[str], dict[str, str]]:
    positional, keywords = [], {}
    for part in (p.strip() for p in text.split(",") if p.strip()):
        key, eq, value = part.partition("=")
        if eq:
            keywords[key.strip()] = value.strip()
        else:
            positional.append(part)
    return positional, keywords


def corpus(spec: str, source: Union[Automorphism, GraphMap], seed: int = 0) -> list:
    """ball(r), sphere(r), random(count, length[, seed]), paths(n), circuits(n), fixture(name[, k=…]).

    Word corpora return ReducedWords; paths/circuits return EdgePaths/Circuits; hallway
    fixtures return their group word as a string.
    """
    from fixtures import HALLWAY_WORDS, hallway_word, word_family

    match = _CORPUS.match(spec)
    if not match:
        raise ConfigError(f"bad corpus spec {spec!r}")
    name, args = match.group(1), match.group(2)
    positional, keywords = _arguments(args)
    try:
        numbers = [int(x) for x in positional] if name not in ("fixture",) else []
    except ValueError:
        raise ConfigError(f"bad corpus arguments in {spec!r}") from None
    if name in ("ball", "sphere", "random"):
        if not isinstance(source, Automorphism):
            raise ConfigError(f"{name}(...) needs an automorphism")
        alphabet = source.alphabet
        if name == "ball" and len(numbers) == 1:
            return ball(alphabet, numbers[0])
        if name == "sphere" and len(numbers) == 1:
            return sphere(alphabet, numbers[0])
        if name == "random" and len(numbers) in (2, 3):
            rng = np.random.default_rng(numbers[2] if len(numbers) == 3 else seed)
            return [random_word(alphabet, numbers[1], rng) for _ in range(numbers[0])]
    elif name in ("paths", "circuits") and len(numbers) == 1:
        f = rose(source) if isinstance(source, Automorphism) else source
        paths = [EdgePath(f.graph, e, f.graph.origin(e[0])) for e in enumerate_paths(f.graph, numbers[0])]
        if name == "paths":
            return paths
        circuits = {}
        for p in paths:
            if p.end == p.start and p.edges[0] != -p.edges[-1]:
                circuits.setdefault(Circuit(f.graph, p.edges), None)
        return list(circuits)
    elif name == "fixture" and positional:
        family = positional[0]
        try:
            k = int(keywords.get("k", 5))
        except ValueError:
            raise ConfigError(f"bad k in {spec!r}") from None
        if family in HALLWAY_WORDS:
            return [hallway_word(family, k)]
        return word_family(family, k)
    raise ConfigError(f"unknown corpus spec {spec!r}")
