#!/usr/bin/env python3
"""
Turns, legality and Nielsen paths.
Statistics here feed the decay and trichotomy checks for exponential strata.
"""

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from config import DEFAULT_BOUNDS, DEFAULT_LIMITS, ResourceLimits, SearchBounds
from errors import NotApplicable, PathError, ResourceLimit, Unknown
from graphmap import Circuit, Edge, EdgePath, GraphMap, growth_degree, is_nielsen_path, map_path

logger = logging.getLogger(__name__)

DECAY_CONSTANTS = {False: (11 / 10, 5), True: (14 / 13, 11)}


@dataclass(frozen=True, order=True)
class Turn:
    """Unordered pair of oriented edges leaving one vertex."""

    first: Edge
    second: Edge

    @classmethod
    def of(cls, e1: Edge, e2: Edge) -> "Turn":
        return cls(e1, e2) if e1 <= e2 else cls(e2, e1)

    @property
    def degenerate(self) -> bool:
        return self.first == self.second

    def edges(self) -> tuple[Edge, Edge]:
        return self.first, self.second


@dataclass(frozen=True)
class LegalityTable:
    legal: dict
    df: dict

    def is_legal(self, turn: Turn) -> bool:
        return self.legal[turn]

    def illegal_turns(self) -> list[Turn]:
        return sorted(t for t, ok in self.legal.items() if not ok)

    def orbit(self, turn: Turn) -> list[Turn]:
        """Df-iterates of a turn until the first repeat."""
        seen, out = set(), []
        while turn not in seen:
            seen.add(turn)
            out.append(turn)
            turn = self.df[turn]
        return out

    def df_stable(self) -> bool:
        return all(self.legal[self.df[t]] for t, ok in self.legal.items() if ok)


def build_legality(f: GraphMap) -> LegalityTable:
    """Exact legal/illegal split of every turn via the Df orbit."""
    g = f.graph
    first = {e: f.image(e)[0] for e in g.oriented_edges()}
    turns = []
    for v in range(len(g.vertices)):
        out = g.outgoing(v)
        for i, e1 in enumerate(out):
            for e2 in out[i:]:
                turns.append(Turn.of(e1, e2))
    df = {t: Turn.of(first[t.first], first[t.second]) for t in turns}
    legal: dict[Turn, bool] = {}
    for t in turns:
        path, seen = [], set()
        current = t
        verdict = None
        while verdict is None:
            if current in legal:
                verdict = legal[current]
            elif current.degenerate:
                verdict = False
            elif current in seen:
                verdict = True
            else:
                seen.add(current)
                path.append(current)
                current = df[current]
        for visited in path:
            legal[visited] = verdict
        legal.setdefault(t, verdict)
    logger.debug(f"{f.name}: {sum(not ok for ok in legal.values())} illegal turns of {len(legal)}")
    return LegalityTable(legal, df)


@dataclass(frozen=True)
class RStats:
    r_length: float
    legal_segments: int
    segments: tuple[tuple[int, int], ...]
    illegal_positions: tuple[int, ...]

    @property
    def r_legal(self) -> bool:
        return not self.illegal_positions


def _is_r_illegal(f: GraphMap, table: LegalityTable, turn: tuple[Edge, Edge], r: int) -> bool:
    e1, e2 = turn
    if f.stratum_of(e1) != r and f.stratum_of(e2) != r:
        return False
    return not table.is_legal(Turn.of(e1, e2))


def r_stats(f: GraphMap, rho: Union[EdgePath, Circuit], r: int, table: Optional[LegalityTable] = None) -> RStats:
    """r-length, the number n(ρ) of r-legal segments, and where the r-illegal turns are."""
    table = table or build_legality(f)
    if isinstance(rho, Circuit):
        turns = rho.turns()
        bad = tuple(i for i, t in enumerate(turns) if _is_r_illegal(f, table, t, r))
        n = max(len(bad), 1)
        return RStats(f.r_length(rho, r), n, (), bad)
    bad = tuple(i for i, t in enumerate(rho.turns(), start=1) if _is_r_illegal(f, table, t, r))
    cuts = (0,) + bad + (len(rho),)
    segments = tuple((i, j) for i, j in zip(cuts, cuts[1:]))
    return RStats(f.r_length(rho, r), len(bad) + 1, segments, bad)


def longest_legal_segment(f: GraphMap, rho: EdgePath, r: int, table: LegalityTable) -> tuple[float, EdgePath]:
    stats = r_stats(f, rho, r, table)
    best = max(stats.segments, key=lambda s: (f.r_length(rho.edges[s[0] : s[1]], r), -s[0]))
    piece = rho.sub(*best)
    return f.r_length(piece, r), piece


def height_legal_segments(f: GraphMap, rho: EdgePath, s: int, table: LegalityTable) -> list[EdgePath]:
    """Maximal s-legal subpaths of height s: runs inside G_s cut at s-illegal turns."""
    out = []
    start = None
    for i, e in enumerate(list(rho.edges) + [None]):
        inside = e is not None and f.stratum_of(e) <= s
        if inside and start is None:
            start = i
        elif not inside and start is not None:
            run = rho.sub(start, i)
            for a, b in r_stats(f, run, s, table).segments:
                piece = run.sub(a, b)
                if f.height(piece) == s:
                    out.append(piece)
            start = None
    return out


# Nielsen paths


@dataclass(frozen=True)
class NielsenPath:
    path: EdgePath
    period: int
    height: int

    @property
    def closed(self) -> bool:
        return self.path.start == self.path.end

    def __str__(self):
        return str(self.path)


@dataclass(frozen=True)
class NielsenCatalog:
    entries: tuple[NielsenPath, ...]
    max_edges: int
    max_period: int
    complete: bool
    nodes: int = 0
    saturated: bool = False

    def of_height(self, r: int) -> list[NielsenPath]:
        return [n for n in self.entries if n.height == r]

    def indivisible(self, r: int, period: int = 1) -> list[NielsenPath]:
        """Indivisible Nielsen paths of height r with the given period (up to reversal)."""
        return [n for n in self.of_height(r) if n.period == period]

    def closed(self, r: int) -> list[NielsenPath]:
        return [n for n in self.of_height(r) if n.closed]

    def has_closed(self, r: int) -> bool:
        return bool(self.closed(r))

    def verify(self, f: GraphMap, limits: ResourceLimits = DEFAULT_LIMITS) -> bool:
        """Every entry is fixed by f^period_#."""
        return all(map_path(f, n.path, n.period, limits) == n.path for n in self.entries)


def _vertex_power(f: GraphMap, p: int) -> tuple[int, ...]:
    out = list(range(len(f.graph.vertices)))
    for _ in range(p):
        out = [f.vertex_map[v] for v in out]
    return tuple(out)


def _glue(left: tuple[Edge, ...], right: tuple[Edge, ...]) -> tuple[Edge, ...]:
    k = 0
    while k < len(left) and k < len(right) and left[-1 - k] == -right[k]:
        k += 1
    return left[: len(left) - k] + right[k:]


def _common_prefix(a: Sequence[Edge], b: Sequence[Edge]) -> int:
    k = 0
    while k < len(a) and k < len(b) and a[k] == b[k]:
        k += 1
    return k


def _turn_cancellation(f: GraphMap, images: dict) -> int:
    g = f.graph
    worst = 0
    for v in range(len(g.vertices)):
        out = g.outgoing(v)
        for i, e1 in enumerate(out):
            for e2 in out[i + 1 :]:
                worst = max(worst, _common_prefix(images[e1], images[e2]))
    return worst


def _canonical(edges: tuple[Edge, ...]) -> tuple[Edge, ...]:
    return min(edges, tuple(-e for e in reversed(edges)))


def find_nielsen(f: GraphMap, bounds: SearchBounds = DEFAULT_BOUNDS, limits: ResourceLimits = DEFAULT_LIMITS) -> NielsenCatalog:
    """Depth-first search for indivisible periodic Nielsen paths between periodic vertices.

    One pass per period p. A prefix π survives while f^p_#(π), minus a cancellation slack,
    agrees with π; extension stops at the first prefix that is itself Nielsen.
    """
    g = f.graph
    found: dict[tuple[Edge, ...], NielsenPath] = {}
    nodes = 0
    complete = True
    for p in range(1, bounds.nielsen_period + 1):
        try:
            images = {e: map_path(f, EdgePath(g, (e,), g.origin(e)), p, limits).edges for e in g.oriented_edges()}
        except ResourceLimit:
            logger.debug(f"{f.name}: period {p} images exceed limits, stopping the search")
            complete = False
            break
        slack = max(2, 2 * _turn_cancellation(f, images))
        vmap = _vertex_power(f, p)
        starts = [v for v in range(len(g.vertices)) if vmap[v] == v]
        for v in starts:
            stack: list[tuple[tuple[Edge, ...], tuple[Edge, ...]]] = [((), ())]
            while stack:
                edges, image = stack.pop()
                nodes += 1
                if nodes > bounds.nielsen_budget:
                    complete = False
                    break
                if len(edges) >= bounds.nielsen_edges:
                    continue
                end = g.terminus(edges[-1]) if edges else v
                children = []
                for e in g.outgoing(end):
                    if edges and e == -edges[-1]:
                        continue
                    new_edges = edges + (e,)
                    new_image = _glue(image, images[e])
                    if len(new_image) > limits.max_word_length:
                        continue
                    known = new_image[: max(0, len(new_image) - slack)]
                    n = min(len(known), len(new_edges))
                    if known[:n] != new_edges[:n]:
                        continue
                    w = g.terminus(e)
                    if vmap[w] == w and new_image == new_edges:
                        key = _canonical(new_edges)
                        if key not in found:
                            path = EdgePath(g, new_edges, v)
                            period = is_nielsen_path(f, path, p, limits) or p
                            found[key] = NielsenPath(path, period, f.height(new_edges))
                        continue
                    children.append((new_edges, new_image))
                stack.extend(reversed(children))
            if not complete:
                break
        if not complete:
            break
    entries = tuple(sorted(found.values(), key=lambda n: (n.height, len(n.path), n.period, n.path.edges)))
    saturated = all(_canonical((e,)) in found for e in g.oriented_edges())
    if not complete:
        logger.warning(f"⚠️ {f.name}: Nielsen search stopped after {nodes} nodes")
    logger.info(f"🔎 {f.name}: {len(entries)} indivisible Nielsen paths (≤ {bounds.nielsen_edges} edges, period ≤ {bounds.nielsen_period})")
    return NielsenCatalog(entries, bounds.nielsen_edges, bounds.nielsen_period, complete, nodes, saturated)


def nielsen_split(f: GraphMap, rho: EdgePath, max_period: int) -> Optional[list[EdgePath]]:
    """Fewest Nielsen pieces whose concatenation is ρ, or None."""
    n = len(rho)
    if n == 0:
        return []
    best: list[Optional[list[int]]] = [None] * (n + 1)
    best[n] = []
    for i in range(n - 1, -1, -1):
        for j in range(i + 1, n + 1):
            if best[j] is None:
                continue
            if best[i] is not None and len(best[i]) <= len(best[j]) + 1:
                continue
            if is_nielsen_path(f, rho.sub(i, j), max_period):
                best[i] = [j] + best[j]
    if best[0] is None:
        return None
    cuts = [0] + best[0]
    return [rho.sub(i, j) for i, j in zip(cuts, cuts[1:])]


def _nielsen_cover(rho: EdgePath, entries: Iterable[NielsenPath]) -> set[int]:
    covered: set[int] = set()
    edges = rho.edges
    for entry in entries:
        for word in (entry.path.edges, entry.path.inverse().edges):
            m = len(word)
            for i in range(len(edges) - m + 1):
                if edges[i : i + m] == word:
                    covered.update(range(i, i + m))
    return covered


def N_count(f: GraphMap, rho: EdgePath, r: int, catalog: NielsenCatalog, table: Optional[LegalityTable] = None) -> int:
    """Number of r-legal segments of ρ that do not overlap a Nielsen subpath of height r."""
    stratum = f.filtration[r]
    if stratum.kind != "exponential":
        raise NotApplicable(f"stratum {r} is {stratum.kind}")
    table = table or build_legality(f)
    stats = r_stats(f, rho, r, table)
    closed = catalog.closed(r)
    if not closed:
        if not catalog.complete:
            raise Unknown(f"Nielsen search incomplete and no closed Nielsen path of height {r} found")
        return stats.legal_segments
    covered = _nielsen_cover(rho, closed)
    return sum(1 for i, j in stats.segments if not covered.intersection(range(i, j)))


# Trichotomy


@dataclass(frozen=True)
class Trichotomy:
    case: int
    M: int
    image: EdgePath
    segment: Optional[EdgePath] = None
    segment_length: float = 0.0
    n_before: int = 0
    n_after: int = 0
    tau1: Optional[EdgePath] = None
    rho_prime: Optional[EdgePath] = None
    tau2: Optional[EdgePath] = None
    pieces: tuple[EdgePath, ...] = field(default_factory=tuple)


def trichotomy(
    f: GraphMap,
    rho: EdgePath,
    r: int,
    L: float,
    M: int,
    table: Optional[LegalityTable] = None,
    bounds: SearchBounds = DEFAULT_BOUNDS,
    limits: ResourceLimits = DEFAULT_LIMITS,
) -> Trichotomy:
    """First of: a long r-legal segment in f^M_#(ρ); fewer r-legal segments; a pre-Nielsen split."""
    if not any(f.stratum_of(e) == r for e in rho.edges):
        raise PathError(f"{rho} crosses no edge of H_{r}")
    table = table or build_legality(f)
    image = map_path(f, rho, M, limits)
    length, segment = longest_legal_segment(f, image, r, table)
    if length > L:
        return Trichotomy(1, M, image, segment=segment, segment_length=length)
    before = r_stats(f, rho, r, table).legal_segments
    after = r_stats(f, image, r, table).legal_segments
    if after < before:
        return Trichotomy(2, M, image, n_before=before, n_after=after)
    n = len(rho)
    options = [(0, n), (1, n), (0, n - 1), (1, n - 1)]
    for i, j in options:
        if j - i < 1:
            continue
        # endpoints already fixed need no padding
        if i == 1 and f.vertex_map[rho.start] == rho.start:
            continue
        if j == n - 1 and f.vertex_map[rho.end] == rho.end:
            continue
        middle = rho.sub(i, j)
        pieces = nielsen_split(f, map_path(f, middle, M, limits), bounds.nielsen_period)
        if pieces is not None:
            return Trichotomy(
                3, M, image, tau1=rho.sub(0, i), rho_prime=middle, tau2=rho.sub(j, n), pieces=tuple(pieces),
                n_before=before, n_after=after,
            )
    raise Unknown(f"no trichotomy case certified for {rho} at M={M}")


def trichotomy_exponent(
    f: GraphMap,
    r: int,
    L: float,
    corpus: Sequence[EdgePath],
    max_M: int,
    bounds: SearchBounds = DEFAULT_BOUNDS,
    limits: ResourceLimits = DEFAULT_LIMITS,
) -> int:
    """Smallest M ≤ max_M for which every corpus path falls into some case."""
    table = build_legality(f)
    paths = [rho for rho in corpus if any(f.stratum_of(e) == r for e in rho.edges)]
    for M in range(1, max_M + 1):
        try:
            for rho in paths:
                trichotomy(f, rho, r, L, M, table, bounds, limits)
        except (Unknown, ResourceLimit):
            continue
        logger.warning(f"⚠️ {f.name}: trichotomy exponent M={M} chosen from {len(paths)} sample paths (heuristic)")
        return M
    raise Unknown(f"no M ≤ {max_M} classifies the corpus for stratum {r}")


# Decay statistic


@dataclass(frozen=True)
class DecayCheck:
    applicable: bool
    N_before: int
    N_after: int
    lam: float
    N0: int
    bound_holds: bool
    strict_holds: Optional[bool]


def expdecay_check(
    f: GraphMap,
    rho: EdgePath,
    r: int,
    M: int,
    catalog: NielsenCatalog,
    L: float,
    table: Optional[LegalityTable] = None,
    limits: ResourceLimits = DEFAULT_LIMITS,
) -> DecayCheck:
    """N(f^M_#(ρ)) against λ⁻¹N(ρ) + 1 when f^M_#(ρ) has no legal segment of r-length ≥ L."""
    table = table or build_legality(f)
    lam, N0 = DECAY_CONSTANTS[catalog.has_closed(r)]
    image = map_path(f, rho, M, limits)
    longest, _ = longest_legal_segment(f, image, r, table)
    before = N_count(f, rho, r, catalog, table)
    after = N_count(f, image, r, catalog, table)
    bound = after <= before / lam + 1
    strict = after <= before / lam if before > N0 else None
    return DecayCheck(longest < L, before, after, lam, N0, bound, strict)


# Fast polynomial strata


def fastpoly_exponent(
    f: GraphMap,
    critical: Optional[dict[int, float]] = None,
    bounds: SearchBounds = DEFAULT_BOUNDS,
    limits: ResourceLimits = DEFAULT_LIMITS,
) -> int:
    """Smallest k with a long s-legal piece of height s (s exponential, below E) in every f^k_#(E_fast)."""
    filtration = f.filtration
    polynomial = [s for s in filtration.strata if s.kind == "polynomial" and s.single_edge is not None]
    if not polynomial:
        raise NotApplicable(f"{f.name} has no polynomial strata")
    fast = [s for s in polynomial if growth_degree(f, s.single_edge + 1, bounds) == "fast"]
    if not fast:
        raise NotApplicable(f"{f.name} has no fast polynomial strata")
    if critical is None:
        from cancellation import stratum_constants

        critical = {r: c.critical_length for r, c in stratum_constants(f, bounds=bounds, limits=limits).items()}
    table = build_legality(f)
    paths = {s.index: EdgePath(f.graph, (s.single_edge + 1,), f.graph.origin(s.single_edge + 1)) for s in fast}
    for k in range(1, limits.max_iterations + 1):
        try:
            paths = {r: map_path(f, rho, 1, limits) for r, rho in paths.items()}
        except ResourceLimit as e:
            raise Unknown(f"fast edge images outgrew the limits at k={k}: {e}") from e
        if all(_has_long_piece(f, rho, r, critical, table) for r, rho in paths.items()):
            logger.info(f"✅ {f.name}: fast polynomial exponent k0={k}")
            return k
    raise Unknown(f"no k ≤ {limits.max_iterations} produces long legal pieces")


def _has_long_piece(f: GraphMap, rho: EdgePath, r: int, critical: dict[int, float], table: LegalityTable) -> bool:
    for s in f.filtration.of_kind("exponential"):
        if s >= r or s not in critical:
            continue
        for piece in height_legal_segments(f, rho, s, table):
            if f.r_length(piece, s) > critical[s]:
                return True
    return False
