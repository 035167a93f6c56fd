#!/usr/bin/env python3
"""
Marked graphs, graph self-maps, filtrations and growth data.
Oriented edges are signed integers: +(i+1) crosses edge i forwards, -(i+1) backwards.
The rose of an automorphism uses the same numbering as fgword letters.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Literal, Optional, Sequence, Union

import networkx as nx
import numpy as np
from pydantic import BaseModel

from config import DEFAULT_BOUNDS, DEFAULT_LIMITS, ResourceLimits, SearchBounds
from errors import (
    ConfigError,
    EmptyRay,
    FiltrationError,
    PathError,
    ResourceLimit,
    TTConvexError,
    Unknown,
    WrongStratumClass,
)
from fgword import Automorphism, least_rotation

logger = logging.getLogger(__name__)

PF_TOLERANCE = 1e-12
PF_MAX_ITERATIONS = 100_000
POLYNOMIAL_THRESHOLD = 1e-9

Edge = int
GrowthLabel = Union[int, Literal["fast", "exponential"]]
_FAST = 10**9
_EXPONENTIAL = 10**9 + 1


class MarkedGraph:
    """Finite connected graph with named vertices and edges."""

    def __init__(
        self,
        vertices: Sequence[str],
        edges: Sequence[tuple[str, str, str]],
        lengths: Optional[Sequence[Optional[float]]] = None,
    ):
        self.vertices = tuple(vertices)
        if len(set(self.vertices)) != len(self.vertices):
            raise PathError(f"duplicate vertex names in {self.vertices}")
        self._vertex_index = {v: i for i, v in enumerate(self.vertices)}
        self.edge_names = tuple(name for name, _, _ in edges)
        if not self.edge_names:
            raise PathError("graph has no edges")
        if len(set(self.edge_names)) != len(self.edge_names):
            raise PathError("duplicate edge names")
        for name in self.edge_names:
            if not name or any(ch in name for ch in " \t'^#[]="):
                raise PathError(f"invalid edge name {name!r}")
        self._edge_index = {name: i for i, name in enumerate(self.edge_names)}
        ends = []
        for name, origin, terminus in edges:
            if origin not in self._vertex_index or terminus not in self._vertex_index:
                raise PathError(f"edge {name} ends at an unknown vertex")
            ends.append((self._vertex_index[origin], self._vertex_index[terminus]))
        self._ends = tuple(ends)
        declared = tuple(lengths) if lengths is not None else (None,) * len(ends)
        for name, value in zip(self.edge_names, declared):
            if value is not None and not value > 0:
                raise PathError(f"edge {name} has non-positive length {value}")
        self.declared_lengths = declared
        if not nx.is_connected(self.nx_graph()):
            raise PathError("graph is not connected")
        self._outgoing = {v: [] for v in range(len(self.vertices))}
        for e in self.oriented_edges():
            self._outgoing[self.origin(e)].append(e)

    @property
    def edge_count(self) -> int:
        return len(self.edge_names)

    def oriented_edges(self) -> list[Edge]:
        out = []
        for i in range(1, self.edge_count + 1):
            out.extend((i, -i))
        return out

    def origin(self, e: Edge) -> int:
        o, t = self._ends[abs(e) - 1]
        return o if e > 0 else t

    def terminus(self, e: Edge) -> int:
        o, t = self._ends[abs(e) - 1]
        return t if e > 0 else o

    def outgoing(self, v: int) -> list[Edge]:
        return self._outgoing[v]

    def vertex(self, name: str) -> int:
        try:
            return self._vertex_index[name]
        except KeyError:
            raise PathError(f"unknown vertex {name!r}") from None

    def token(self, e: Edge) -> str:
        name = self.edge_names[abs(e) - 1]
        return name if e > 0 else name + "'"

    def edge(self, token: Union[str, int]) -> Edge:
        if isinstance(token, int):
            if token == 0 or abs(token) > self.edge_count:
                raise PathError(f"edge {token} outside graph")
            return token
        sign = 1
        if token.endswith("'"):
            token, sign = token[:-1], -1
        try:
            return sign * (self._edge_index[token] + 1)
        except KeyError:
            raise PathError(f"unknown edge {token!r}") from None

    def parse_edges(self, text: str) -> list[Edge]:
        out: list[Edge] = []
        for token in text.split():
            power = 1
            if "^" in token:
                token, _, exponent = token.partition("^")
                try:
                    power = int(exponent)
                except ValueError:
                    raise PathError(f"bad exponent in {token}^{exponent}") from None
            e = self.edge(token)
            if power < 0:
                e, power = -e, -power
            out.extend([e] * power)
        return out

    def parse_path(self, text: str, start: Optional[str] = None) -> "EdgePath":
        return tighten(self, self.parse_edges(text), None if start is None else self.vertex(start))

    def nx_graph(self, edges: Optional[Sequence[int]] = None) -> nx.MultiGraph:
        """Undirected multigraph on the given edge indices (all edges by default)."""
        graph = nx.MultiGraph()
        if edges is None:
            graph.add_nodes_from(range(len(self.vertices)))
            edges = range(self.edge_count)
        for i in edges:
            o, t = self._ends[i]
            graph.add_edge(o, t, key=i)
        return graph


class EdgePath:
    """Immersed edge path; `start` pins the vertex of a trivial path."""

    __slots__ = ("graph", "edges", "start")

    def __init__(self, graph: MarkedGraph, edges: Sequence[Edge], start: int):
        self.graph = graph
        self.edges = tuple(edges)
        self.start = start

    @property
    def end(self) -> int:
        return self.graph.terminus(self.edges[-1]) if self.edges else self.start

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def __len__(self):
        return len(self.edges)

    def __bool__(self):
        return bool(self.edges)

    def __iter__(self):
        return iter(self.edges)

    def __eq__(self, other):
        if not isinstance(other, EdgePath):
            return NotImplemented
        return self.edges == other.edges and self.start == other.start

    def __hash__(self):
        return hash((self.edges, self.start))

    def __str__(self):
        if not self.edges:
            return f"({self.graph.vertices[self.start]})"
        return " ".join(self.graph.token(e) for e in self.edges)

    def __repr__(self):
        return f"EdgePath({self})"

    def inverse(self) -> "EdgePath":
        return EdgePath(self.graph, tuple(-e for e in reversed(self.edges)), self.end)

    def vertex_at(self, i: int) -> int:
        """Vertex before edge i (i = len gives the end)."""
        return self.start if i == 0 else self.graph.terminus(self.edges[i - 1])

    def sub(self, i: int, j: int) -> "EdgePath":
        return EdgePath(self.graph, self.edges[i:j], self.vertex_at(i))

    def turns(self) -> list[tuple[Edge, Edge]]:
        """Turn crossed between edge i-1 and edge i, for i = 1..len-1."""
        return [(-self.edges[i - 1], self.edges[i]) for i in range(1, len(self.edges))]


def tighten(graph: MarkedGraph, edges: Sequence[Edge], start: Optional[int] = None) -> EdgePath:
    """Cancel e e⁻¹ pairs, leftmost first."""
    edges = tuple(edges)
    if edges:
        for a, b in zip(edges, edges[1:]):
            if graph.terminus(a) != graph.origin(b):
                raise PathError(f"{graph.token(a)} and {graph.token(b)} are not incident")
        if start is not None and start != graph.origin(edges[0]):
            raise PathError(f"path does not start at {graph.vertices[start]}")
        start = graph.origin(edges[0])
    elif start is None:
        raise PathError("a trivial path needs a start vertex")
    stack: list[Edge] = []
    for e in edges:
        if stack and stack[-1] == -e:
            stack.pop()
        else:
            stack.append(e)
    return EdgePath(graph, stack, start)


def _cyclically_tighten(edges: list[Edge]) -> list[Edge]:
    i, j = 0, len(edges)
    while j - i >= 2 and edges[i] == -edges[j - 1]:
        i += 1
        j -= 1
    return edges[i:j]


class Circuit:
    """Cyclically immersed closed path, stored at its least rotation."""

    __slots__ = ("graph", "edges")

    def __init__(self, graph: MarkedGraph, edges: Sequence[Edge]):
        edges = list(edges)
        if edges and graph.terminus(edges[-1]) != graph.origin(edges[0]):
            raise PathError("circuit is not closed")
        path = tighten(graph, edges, graph.origin(edges[0]) if edges else 0)
        core = _cyclically_tighten(list(path.edges))
        k = least_rotation(core)
        self.graph = graph
        self.edges = tuple(core[k:] + core[:k])

    def __len__(self):
        return len(self.edges)

    def __eq__(self, other):
        if not isinstance(other, Circuit):
            return NotImplemented
        return self.edges == other.edges

    def __hash__(self):
        return hash(self.edges)

    def __str__(self):
        return " ".join(self.graph.token(e) for e in self.edges)

    def as_path(self) -> EdgePath:
        return EdgePath(self.graph, self.edges, self.graph.origin(self.edges[0]) if self.edges else 0)

    def turns(self) -> list[tuple[Edge, Edge]]:
        """All turns including the wrap-around one."""
        n = len(self.edges)
        if n == 0:
            return []
        return [(-self.edges[i - 1], self.edges[i]) for i in range(n)]


@dataclass(frozen=True)
class Stratum:
    index: int
    edges: tuple[int, ...]
    matrix: tuple[tuple[int, ...], ...]
    kind: Literal["zero", "polynomial", "exponential"]
    growth_rate: float
    eigenvector: Optional[tuple[float, ...]]
    u: Optional[tuple[Edge, ...]]
    h_value: float

    @property
    def single_edge(self) -> Optional[int]:
        return self.edges[0] if len(self.edges) == 1 else None


@dataclass(frozen=True)
class Filtration:
    strata: tuple[Stratum, ...]
    lengths: tuple[float, ...]
    leagues: dict

    def __getitem__(self, r: int) -> Stratum:
        return self.strata[r - 1]

    def __len__(self):
        return len(self.strata)

    def of_kind(self, kind: str) -> list[int]:
        return [s.index for s in self.strata if s.kind == kind]


class GraphMap:
    """Homotopy equivalence f: G -> G with a declared (or suggested) filtration."""

    def __init__(
        self,
        graph: MarkedGraph,
        images: Sequence[Sequence[Edge]],
        strata: Optional[Sequence[Sequence[int]]] = None,
        name: str = "f",
        inverse: Optional["GraphMap"] = None,
    ):
        self.graph = graph
        self.name = name
        self.inverse = inverse
        if len(images) != graph.edge_count:
            raise PathError(f"{graph.edge_count} edges but {len(images)} images")
        checked = []
        for i, image in enumerate(images):
            image = tuple(image)
            if not image:
                raise PathError(f"image of {graph.edge_names[i]} is trivial")
            path = tighten(graph, image)
            if path.edges != image:
                raise PathError(f"image of {graph.edge_names[i]} is not immersed")
            checked.append(image)
        self.images = tuple(checked)
        self.vertex_map = self._vertex_map()
        if strata is None:
            strata = suggest_filtration(self)
        self.declared_strata = tuple(tuple(s) for s in strata)
        seen = sorted(i for s in self.declared_strata for i in s)
        if seen != list(range(graph.edge_count)) or any(not s for s in self.declared_strata):
            raise FiltrationError("strata must partition the edges into nonempty sets")
        stratum_of = [0] * graph.edge_count
        for r, s in enumerate(self.declared_strata, start=1):
            for i in s:
                stratum_of[i] = r
        self._stratum_of = tuple(stratum_of)
        self._growth_cache: dict[int, int] = {}
        self._nielsen_cache: dict[tuple, Optional[int]] = {}

    def _vertex_map(self) -> tuple[int, ...]:
        g = self.graph
        vmap: dict[int, int] = {}
        for e in g.oriented_edges():
            image = self.image(e)
            for v, w in ((g.origin(e), g.origin(image[0])), (g.terminus(e), g.terminus(image[-1]))):
                if vmap.setdefault(v, w) != w:
                    raise PathError(f"edge images disagree on the image of vertex {g.vertices[v]}")
        return tuple(vmap[v] for v in range(len(g.vertices)))

    def image(self, e: Edge) -> tuple[Edge, ...]:
        image = self.images[abs(e) - 1]
        return image if e > 0 else tuple(-x for x in reversed(image))

    def stratum_of(self, e: Edge) -> int:
        return self._stratum_of[abs(e) - 1]

    @cached_property
    def filtration(self) -> Filtration:
        return classify_strata(self)

    @property
    def lengths(self) -> tuple[float, ...]:
        return self.filtration.lengths

    @property
    def fixed_vertices(self) -> frozenset[int]:
        return frozenset(v for v, w in enumerate(self.vertex_map) if v == w)

    @property
    def max_image_length(self) -> int:
        return max(len(image) for image in self.images)

    def edge_length(self, e: Edge) -> float:
        return self.lengths[abs(e) - 1]

    def height(self, path: Union[EdgePath, Circuit, Sequence[Edge]]) -> int:
        edges = path.edges if isinstance(path, (EdgePath, Circuit)) else path
        return max((self.stratum_of(e) for e in edges), default=0)

    def length(self, path: Union[EdgePath, Circuit, Sequence[Edge]]) -> float:
        edges = path.edges if isinstance(path, (EdgePath, Circuit)) else path
        return float(sum(self.edge_length(e) for e in edges))

    def r_length(self, path: Union[EdgePath, Circuit, Sequence[Edge]], r: int) -> float:
        edges = path.edges if isinstance(path, (EdgePath, Circuit)) else path
        return float(sum(self.edge_length(e) for e in edges if self.stratum_of(e) == r))

    def in_lower(self, e: Edge, r: int) -> bool:
        return self.stratum_of(e) < r

    def path(self, text: str, start: Optional[str] = None) -> EdgePath:
        return self.graph.parse_path(text, start)

    def vertex_image(self, v: int) -> int:
        return self.vertex_map[v]

    def with_strata(self, strata: Sequence[Sequence[int]]) -> "GraphMap":
        return GraphMap(self.graph, self.images, strata, name=self.name, inverse=self.inverse)

    def degree(self, e: Union[Edge, str], bounds: SearchBounds = DEFAULT_BOUNDS) -> GrowthLabel:
        return growth_degree(self, e, bounds)

    def __repr__(self):
        return f"GraphMap({self.name}, {self.graph.edge_count} edges, {len(self.declared_strata)} strata)"


def rose(phi: Automorphism, strata: Optional[Sequence[Sequence[str]]] = None) -> GraphMap:
    """One vertex, one loop per generator; edge i+1 is letter i+1."""
    gens = phi.alphabet.generators
    graph = MarkedGraph(["v"], [(g, "v", "v") for g in gens])
    images = [w.letters for w in phi.images]
    declared = strata if strata is not None else phi.strata
    indices = None
    if declared:
        indices = [[phi.alphabet.index(g) - 1 for g in s] for s in declared]
    inverse = None
    if phi.has_inverse:
        inverse = GraphMap(graph, [w.letters for w in phi.inverse_images], name=f"{phi.name}^-1")
    return GraphMap(graph, images, indices, name=phi.name, inverse=inverse)


def _transition_digraph(f: GraphMap) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(range(f.graph.edge_count))
    for j, image in enumerate(f.images):
        for e in image:
            graph.add_edge(j, abs(e) - 1)
    return graph


def suggest_filtration(f: GraphMap) -> list[tuple[int, ...]]:
    """SCCs of the transition digraph, each stratum after the strata its images cross."""
    condensed = nx.condensation(_transition_digraph(f))
    members = nx.get_node_attributes(condensed, "members")
    order = nx.lexicographical_topological_sort(condensed.reverse(), key=lambda c: min(members[c]))
    return [tuple(sorted(members[c])) for c in order]


def perron_frobenius(matrix: np.ndarray) -> tuple[float, np.ndarray, bool]:
    """Largest eigenvalue and left eigenvector of a nonnegative irreducible matrix.

    Power iteration on M + I keeps the iteration aperiodic; the returned vector is scaled
    so that its smallest entry equals one.
    """
    m = matrix.shape[0]
    shifted = matrix.astype(float) + np.eye(m)
    v = np.full(m, 1.0 / m)
    converged = False
    for _ in range(PF_MAX_ITERATIONS):
        w = v @ shifted
        w /= w.sum()
        if np.max(np.abs(w - v)) < PF_TOLERANCE:
            v = w
            converged = True
            break
        v = w
    eigenvalue = float((v @ shifted).sum() / v.sum()) - 1.0
    return eigenvalue, v / v.min(), converged


def _irreducible(matrix: np.ndarray) -> bool:
    m = matrix.shape[0]
    step = (matrix > 0).astype(np.int64)
    reach = step.copy()
    for _ in range(m):
        reach = ((reach + reach @ step) > 0).astype(np.int64)
    return bool(reach.all())


def classify_strata(f: GraphMap) -> Filtration:
    g = f.graph
    strata_edges = f.declared_strata
    for r, edges in enumerate(strata_edges, start=1):
        for i in edges:
            crossed = max(f.stratum_of(e) for e in f.images[i])
            if crossed > r:
                raise FiltrationError(
                    f"f({g.edge_names[i]}) crosses stratum {crossed} above its own stratum {r}; "
                    "f(G_r) must lie in G_r"
                )
    lengths = [v if v is not None else 1.0 for v in g.declared_lengths]
    pending = []
    for r, edges in enumerate(strata_edges, start=1):
        position = {i: k for k, i in enumerate(edges)}
        matrix = np.zeros((len(edges), len(edges)), dtype=np.int64)
        for col, j in enumerate(edges):
            for e in f.images[j]:
                row = position.get(abs(e) - 1)
                if row is not None:
                    matrix[row, col] += 1
        eigenvector = None
        u = None
        if not matrix.any():
            kind, rate = "zero", 0.0
        elif not _irreducible(matrix):
            raise FiltrationError(
                f"stratum {r} ({' '.join(g.edge_names[i] for i in edges)}) is neither zero nor "
                "irreducible; refine it (see suggest-filtration)"
            )
        elif len(edges) == 1 and matrix[0, 0] == 1:
            kind, rate = "polynomial", 1.0
            image = f.images[edges[0]]
            if image[0] == edges[0] + 1:
                u = image[1:]
        else:
            rate, vector, converged = perron_frobenius(matrix)
            if not converged:
                logger.warning(f"⚠️ stratum {r}: power iteration did not converge")
            if abs(rate - 1.0) < POLYNOMIAL_THRESHOLD:
                kind, rate = "polynomial", 1.0
            else:
                kind = "exponential"
                eigenvector = tuple(float(x) for x in vector)
                for k, i in enumerate(edges):
                    lengths[i] = eigenvector[k]
        matrix_rows = tuple(tuple(int(x) for x in row) for row in matrix)
        pending.append([r, tuple(edges), matrix_rows, kind, rate, eigenvector, u])

    stratum_of = f.stratum_of

    def lower_height(edge_indices, below: int) -> float:
        heights = [stratum_of(e) for i in edge_indices for e in f.images[i] if stratum_of(e) <= below]
        return float(max(heights)) if heights else math.inf

    h_values: dict[int, float] = {}
    kinds = {p[0]: p[3] for p in pending}
    for r, edges, _, kind, _, _, u in pending:
        if kind == "polynomial":
            if u is not None:
                h_values[r] = float(max((stratum_of(e) for e in u), default=0))
            else:
                h_values[r] = lower_height(edges, r - 1)
        elif kind == "exponential":
            if r > 1 and kinds[r - 1] == "zero":
                h_values[r] = lower_height(edges + strata_edges[r - 2], r - 2)
            else:
                h_values[r] = lower_height(edges, r - 1)
    for r, edges, _, kind, _, _, _ in pending:
        if kind == "zero":
            if r < len(pending) and kinds[r + 1] == "exponential":
                h_values[r] = h_values[r + 1]
            else:
                h_values[r] = lower_height(edges, r - 1)

    strata = tuple(
        Stratum(r, edges, matrix, kind, rate, vector, u, h_values[r])
        for r, edges, matrix, kind, rate, vector, u in pending
    )
    leagues: dict[int, tuple[int, ...]] = {}
    for s in strata:
        if math.isfinite(s.h_value) and s.h_value >= 1:
            leagues.setdefault(int(s.h_value), ())
            leagues[int(s.h_value)] += (s.index,)
    logger.debug(f"classified {f.name}: {[s.kind for s in strata]}")
    return Filtration(strata, tuple(float(x) for x in lengths), leagues)


def _h_ordered(h: Sequence[float]) -> bool:
    for r, hr in enumerate(h):
        for s, hs in enumerate(h):
            if math.isfinite(hr) and math.isfinite(hs) and hr > hs and not r > s:
                return False
    return True


def reorder_strata(f: GraphMap) -> tuple[list[int], GraphMap]:
    """Permute strata so that h(H_r) > h(H_s) implies r > s, keeping f(G_r) ⊆ G_r.

    Returns the permutation (new position -> old stratum index) and the reordered map.
    Infinite h values belong to no league and are left out of the comparison.
    """
    n = len(f.declared_strata)
    order = list(range(1, n + 1))
    current = f
    for _ in range(n + 1):
        h = [s.h_value for s in current.filtration.strata]
        if _h_ordered(h):
            return order, current
        constraints = nx.DiGraph()
        constraints.add_nodes_from(range(n))
        for p, edges in enumerate(current.declared_strata):
            for i in edges:
                for e in current.images[i]:
                    q = current.stratum_of(e) - 1
                    if q != p:
                        constraints.add_edge(q, p)
        for p in range(n):
            for q in range(n):
                if math.isfinite(h[p]) and math.isfinite(h[q]) and h[p] < h[q]:
                    constraints.add_edge(p, q)
        try:
            positions = list(nx.lexicographical_topological_sort(constraints))
        except nx.NetworkXUnfeasible:
            raise FiltrationError("no stratum permutation realizes the h-ordering") from None
        order = [order[p] for p in positions]
        current = f.with_strata([f.declared_strata[r - 1] for r in order])
    raise FiltrationError("h-ordering did not stabilize")


def map_path(f: GraphMap, rho: EdgePath, k: int = 1, limits: ResourceLimits = DEFAULT_LIMITS) -> EdgePath:
    """f^k_#(ρ): images are immersed, so one stack pass per step tightens the concatenation."""
    if k > limits.max_iterations:
        raise ResourceLimit(f"k={k} exceeds max_iterations={limits.max_iterations}")
    edges, start = rho.edges, rho.start
    for _ in range(k):
        raw = sum(len(f.images[abs(e) - 1]) for e in edges)
        if raw > limits.max_word_length:
            raise ResourceLimit(
                f"f-image of a {len(edges)}-edge path has {raw} edges (max_word_length={limits.max_word_length})",
                witness=str(rho),
            )
        stack: list[Edge] = []
        for e in edges:
            for x in f.image(e):
                if stack and stack[-1] == -x:
                    stack.pop()
                else:
                    stack.append(x)
        edges, start = tuple(stack), f.vertex_map[start]
    return EdgePath(f.graph, edges, start)


def map_circuit(f: GraphMap, sigma: Circuit, k: int = 1, limits: ResourceLimits = DEFAULT_LIMITS) -> Circuit:
    current = sigma
    for _ in range(k):
        image = map_path(f, current.as_path(), 1, limits)
        current = Circuit(f.graph, image.edges)
    return current


def is_nielsen_path(f: GraphMap, rho: EdgePath, max_period: int, limits: ResourceLimits = DEFAULT_LIMITS) -> Optional[int]:
    """Smallest period p ≤ max_period with f^p_#(ρ) = ρ, else None."""
    if not rho:
        return None
    key = (rho.edges, rho.start, max_period)
    cache = f._nielsen_cache
    if key in cache:
        return cache[key]
    period = None
    current = rho
    try:
        for p in range(1, max_period + 1):
            current = map_path(f, current, 1, limits)
            if current == rho:
                period = p
                break
    except ResourceLimit:
        period = None
    cache[key] = period
    return period


def split_poly_path(f: GraphMap, rho: EdgePath, r: int) -> list[tuple[str, EdgePath]]:
    """Cut before every E_r and after every E_r⁻¹; tag pieces basic or lower."""
    stratum = f.filtration[r]
    if stratum.kind != "polynomial" or stratum.single_edge is None:
        raise WrongStratumClass(f"stratum {r} is not a single-edge polynomial stratum")
    if f.height(rho) > r:
        raise PathError(f"path {rho} has height {f.height(rho)} > {r}")
    top = stratum.single_edge + 1
    cuts = {0, len(rho)}
    for i, e in enumerate(rho.edges):
        if e == top:
            cuts.add(i)
        elif e == -top:
            cuts.add(i + 1)
    bounds = sorted(cuts)
    pieces = []
    for i, j in zip(bounds, bounds[1:]):
        if i == j:
            continue
        piece = rho.sub(i, j)
        tag = "basic" if any(abs(e) == top for e in piece.edges) else "lower"
        pieces.append((tag, piece))
    if not pieces:
        pieces.append(("lower", rho))
    return pieces


@dataclass(frozen=True)
class Eigenray:
    edge: Edge
    blocks: tuple[EdgePath, ...]
    path: EdgePath

    @property
    def boundaries(self) -> list[int]:
        out, total = [], 0
        for block in self.blocks:
            total += len(block)
            out.append(total)
        return out


def _polynomial_edge(f: GraphMap, E: Union[Edge, str]) -> tuple[Edge, Stratum]:
    e = f.graph.edge(E)
    stratum = f.filtration[f.stratum_of(e)]
    if stratum.kind != "polynomial":
        raise WrongStratumClass(f"{f.graph.token(e)} lies in a {stratum.kind} stratum")
    if stratum.u is None:
        raise WrongStratumClass(f"f({f.graph.token(abs(e))}) does not have the form E·u")
    return abs(e), stratum


def eigenray(f: GraphMap, E: Union[Edge, str], n_blocks: int, limits: ResourceLimits = DEFAULT_LIMITS) -> Eigenray:
    e, stratum = _polynomial_edge(f, E)
    if not stratum.u:
        raise EmptyRay(f"{f.graph.token(e)} is a constant edge; its eigenray is empty")
    block = EdgePath(f.graph, stratum.u, f.graph.terminus(e))
    blocks = [block]
    for _ in range(n_blocks - 1):
        block = map_path(f, block, 1, limits)
        blocks.append(block)
    joined = [x for b in blocks for x in b.edges]
    path = tighten(f.graph, joined)
    if len(path) != len(joined):
        raise PathError(f"successive eigenray blocks of {f.graph.token(e)} cancel")
    return Eigenray(e, tuple(blocks), path)


def _label(rank: int) -> GrowthLabel:
    if rank == _EXPONENTIAL:
        return "exponential"
    if rank == _FAST:
        return "fast"
    return rank


def growth_degree(f: GraphMap, E: Union[Edge, str], bounds: SearchBounds = DEFAULT_BOUNDS) -> GrowthLabel:
    """Polynomial degree of f^k_#(E), or 'fast' / 'exponential'."""
    return _label(_edge_rank(f, abs(f.graph.edge(E)) - 1, bounds))


def _edge_rank(f: GraphMap, i: int, bounds: SearchBounds) -> int:
    if i in f._growth_cache:
        return f._growth_cache[i]
    stratum = f.filtration[f.stratum_of(i + 1)]
    if stratum.kind == "exponential":
        rank = _EXPONENTIAL
    elif stratum.kind == "zero":
        rank = _path_rank(f, f.images[i], f.graph.origin(f.images[i][0]), bounds)
    else:
        if stratum.u is None:
            raise WrongStratumClass(f"polynomial stratum {stratum.index} is not of the form E·u")
        if not stratum.u:
            rank = 0
        else:
            start = f.graph.terminus(i + 1)
            inner = _path_rank(f, stratum.u, start, bounds)
            if inner < _FAST:
                rank = inner + 1
            elif inner == _FAST or _grows(f, EdgePath(f.graph, stratum.u, start), bounds):
                rank = _FAST
            else:
                raise Unknown(
                    f"u of {f.graph.edge_names[i]} carries exponential edges that are neither "
                    f"Nielsen within period {bounds.nielsen_period} nor visibly growing"
                )
    f._growth_cache[i] = rank
    return rank


def _path_rank(f: GraphMap, edges: Sequence[Edge], start: int, bounds: SearchBounds) -> int:
    """Cheapest split into single edges and Nielsen subpaths; a split costs its worst piece."""
    path = EdgePath(f.graph, edges, start)
    n = len(edges)
    best = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        candidate = max(_edge_rank(f, abs(edges[i]) - 1, bounds), best[i + 1])
        for j in range(i + 1, n + 1):
            if best[j] < candidate and is_nielsen_path(f, path.sub(i, j), bounds.nielsen_period):
                candidate = best[j]
        best[i] = candidate
    return best[0]


def _grows(f: GraphMap, u: EdgePath, bounds: SearchBounds) -> bool:
    try:
        image = map_path(f, u, 2 * bounds.nielsen_period)
    except ResourceLimit:
        return True
    return len(image) > 2 * max(len(u), 1)


# Validation


class PropertyResult(BaseModel):
    name: str
    status: Literal["pass", "fail", "unknown"]
    detail: str = ""
    bounded: bool = False


class ValidationReport(BaseModel):
    map_name: str
    properties: list[PropertyResult]
    flags: list[str] = []

    @property
    def ok(self) -> bool:
        return all(p.status != "fail" for p in self.properties)

    def failures(self) -> list[str]:
        return [p.name for p in self.properties if p.status == "fail"]


def enumerate_paths(
    graph: MarkedGraph,
    max_edges: int,
    allowed: Optional[set[int]] = None,
    starts: Optional[Sequence[int]] = None,
) -> Iterator[tuple[Edge, ...]]:
    """Every nontrivial immersed path with ≤ max_edges edges from the given start vertices."""
    allowed_edges = [e for e in graph.oriented_edges() if allowed is None or abs(e) - 1 in allowed]
    by_origin: dict[int, list[Edge]] = {}
    for e in allowed_edges:
        by_origin.setdefault(graph.origin(e), []).append(e)
    vertices = starts if starts is not None else range(len(graph.vertices))
    stack: list[tuple[Edge, ...]] = []
    for v in vertices:
        for e in by_origin.get(v, []):
            stack.append((e,))
        while stack:
            path = stack.pop()
            yield path
            if len(path) < max_edges:
                last = path[-1]
                for e in reversed(by_origin.get(graph.terminus(last), [])):
                    if e != -last:
                        stack.append(path + (e,))


def validate_improved(f: GraphMap, bounds: SearchBounds = DEFAULT_BOUNDS) -> ValidationReport:
    """Check the relative train track and improved properties at bounded scale."""
    from legality import build_legality, find_nielsen, r_stats

    results: list[PropertyResult] = []
    g = f.graph
    try:
        filtration = f.filtration
    except FiltrationError as e:
        message = str(e)
        failed = "filtration.invariant" if "must lie in" in message else "filtration.irreducible"
        results.append(PropertyResult(name=failed, status="fail", detail=message))
        return ValidationReport(map_name=f.name, properties=results)
    results.append(PropertyResult(name="filtration.invariant", status="pass"))
    results.append(PropertyResult(name="filtration.irreducible", status="pass"))
    exponential = filtration.of_kind("exponential")

    # rtt(1)
    bad = []
    for r in exponential:
        for i in filtration[r].edges:
            image = f.images[i]
            if f.stratum_of(image[0]) != r or f.stratum_of(image[-1]) != r:
                bad.append(g.edge_names[i])
    results.append(
        PropertyResult(
            name="rtt(1)",
            status="fail" if bad else "pass",
            detail=f"first/last image edges leave H_r for {' '.join(bad)}" if bad else "",
        )
    )

    # rtt(2)
    bad = []
    for r in exponential:
        lower = {i for s in filtration.strata[: r - 1] for i in s.edges}
        top_vertices = {v for i in filtration[r].edges for v in (g.origin(i + 1), g.terminus(i + 1))}
        lower_vertices = {v for i in lower for v in (g.origin(i + 1), g.terminus(i + 1))}
        junction = sorted(top_vertices & lower_vertices)
        for edges in enumerate_paths(g, bounds.path_length, lower, junction):
            if g.terminus(edges[-1]) not in top_vertices:
                continue
            if not map_path(f, EdgePath(g, edges, g.origin(edges[0]))):
                bad.append(" ".join(g.token(e) for e in edges))
                break
    results.append(
        PropertyResult(
            name="rtt(2)",
            status="fail" if bad else "pass",
            detail=f"f_# kills {bad[0]}" if bad else f"unknown beyond {bounds.path_length} edges",
            bounded=not bad,
        )
    )

    # rtt(3)
    table = build_legality(f)
    bad = []
    for r in exponential:
        g_r = {i for s in filtration.strata[:r] for i in s.edges}
        for edges in enumerate_paths(g, bounds.path_length, g_r):
            if not any(f.stratum_of(e) == r for e in edges):
                continue
            rho = EdgePath(g, edges, g.origin(edges[0]))
            if r_stats(f, rho, r, table).r_legal and not r_stats(f, map_path(f, rho), r, table).r_legal:
                bad.append(str(rho))
                break
    results.append(
        PropertyResult(
            name="rtt(3)",
            status="fail" if bad else "pass",
            detail=f"r-legal {bad[0]} maps to an r-illegal path" if bad else f"unknown beyond {bounds.path_length} edges",
            bounded=not bad,
        )
    )

    # ttimproved(1)
    bad = []
    for s in filtration.strata:
        if s.kind != "zero":
            continue
        r = s.index
        if r == len(filtration) or filtration[r + 1].kind != "exponential":
            bad.append(f"zero stratum {r} is not followed by an exponential stratum")
        for e1 in (x for i in s.edges for x in (i + 1, -(i + 1))):
            for e2 in (x for i in s.edges for x in (i + 1, -(i + 1))):
                if e1 < e2 and g.origin(e1) == g.origin(e2) and f.image(e1)[0] == f.image(e2)[0]:
                    bad.append(f"f is not an immersion on H_{r} at {g.token(e1)}, {g.token(e2)}")
        g_r_edges = [i for t in filtration.strata[:r] for i in t.edges]
        components = nx.MultiGraph(g.nx_graph(g_r_edges))
        contractible: set[int] = set()
        for nodes in nx.connected_components(components):
            sub = components.subgraph(nodes)
            if sub.number_of_edges() == sub.number_of_nodes() - 1:
                contractible.update(key for _, _, key in sub.edges(keys=True))
        if contractible != set(s.edges):
            bad.append(f"H_{r} is not the union of contractible components of G_{r}")
    results.append(PropertyResult(name="ttimproved(1)", status="fail" if bad else "pass", detail="; ".join(bad)))

    # ttimproved(2)
    bad = [g.vertices[v] for v in range(len(g.vertices)) if f.vertex_map[f.vertex_map[v]] != f.vertex_map[v]]
    results.append(
        PropertyResult(
            name="ttimproved(2)",
            status="fail" if bad else "pass",
            detail=f"f(v) not fixed for v in {' '.join(bad)}" if bad else "",
        )
    )

    # ttimproved(3)
    flags = []
    catalog = find_nielsen(f, bounds)
    if not catalog.complete:
        flags.append("nielsen-search-incomplete")
    bad = []
    for r in exponential:
        found = catalog.indivisible(r)
        if len(found) > 1:
            bad.append(f"stratum {r} has {len(found)} indivisible Nielsen paths")
    results.append(
        PropertyResult(
            name="ttimproved(3)",
            status="fail" if bad else "pass",
            detail="; ".join(bad) if bad else f"unknown beyond {catalog.max_edges} edges / period {catalog.max_period}",
            bounded=not bad,
        )
    )

    # ttimproved(4)
    bad = []
    for s in filtration.strata:
        if s.kind != "polynomial":
            continue
        if s.single_edge is None:
            bad.append(f"polynomial stratum {s.index} has {len(s.edges)} edges")
            continue
        name = g.edge_names[s.single_edge]
        if s.u is None:
            bad.append(f"f({name}) does not start with {name}")
            continue
        end = g.terminus(s.single_edge + 1)
        if s.u and (g.origin(s.u[0]) != end or g.terminus(s.u[-1]) != end):
            bad.append(f"u of {name} is not a closed path")
        if f.vertex_map[end] != end:
            bad.append(f"base point of u of {name} is not fixed")
    results.append(PropertyResult(name="ttimproved(4)", status="fail" if bad else "pass", detail="; ".join(bad)))

    report = ValidationReport(map_name=f.name, properties=results, flags=flags)
    if report.ok:
        logger.info(f"✅ {f.name}: all checked properties pass")
    else:
        logger.info(f"❌ {f.name}: failing {', '.join(report.failures())}")
    return report


# Text format


def parse_graph_map(text: str, name: str = "f") -> GraphMap:
    from fgword import _sections

    vertices: list[str] = []
    edges: list[tuple[str, str, str]] = []
    lengths: list[Optional[float]] = []
    maps: dict[str, dict[str, tuple[int, str]]] = {"map": {}, "inverse": {}}
    strata: dict[int, tuple[int, list[str]]] = {}
    for section, number, line in _sections(text):
        words = line.split()
        if section == "graph" and words[0] == "vertex" and len(words) == 2:
            vertices.append(words[1])
        elif section == "graph" and words[0] == "edge":
            head, eq, body = line.partition("=")
            parts = body.split()
            if not eq or len(head.split()) != 2 or len(parts) not in (2, 4) or (len(parts) == 4 and parts[2] != "length"):
                raise ConfigError(f"expected 'edge E = v w [length x]', got {line!r}", number, section)
            try:
                lengths.append(float(parts[3]) if len(parts) == 4 else None)
            except ValueError:
                raise ConfigError(f"bad length in {line!r}", number, section) from None
            edges.append((head.split()[1], parts[0], parts[1]))
        elif section in maps:
            source, arrow, target = line.partition("->")
            if not arrow:
                raise ConfigError(f"expected 'E -> path', got {line!r}", number, section)
            maps[section][source.strip()] = (number, target)
        elif section == "filtration":
            head, eq, body = line.partition("=")
            parts = head.split()
            if not eq or len(parts) != 2 or parts[0] != "stratum" or not parts[1].isdigit():
                raise ConfigError(f"expected 'stratum r = E ...', got {line!r}", number, section)
            strata[int(parts[1])] = (number, body.split())
        else:
            raise ConfigError(f"unexpected line {line!r}", number, section or "top")
    try:
        graph = MarkedGraph(vertices, edges, lengths)
    except PathError as e:
        raise ConfigError(str(e), section="graph") from e

    def images_of(section: str) -> list[tuple[Edge, ...]]:
        table = maps[section]
        missing = [e for e in graph.edge_names if e not in table]
        if missing:
            raise ConfigError(f"no image for {' '.join(missing)}", section=section)
        out = []
        for edge_name in graph.edge_names:
            number, target = table[edge_name]
            try:
                out.append(tuple(graph.parse_edges(target)))
            except PathError as e:
                raise ConfigError(str(e), number, section) from e
        return out

    try:
        declared = None
        if strata:
            declared = []
            for r in sorted(strata):
                number, names = strata[r]
                declared.append([abs(graph.edge(x)) - 1 for x in names])
        inverse = None
        if maps["inverse"]:
            inverse = GraphMap(graph, images_of("inverse"), name=f"{name}^-1")
        return GraphMap(graph, images_of("map"), declared, name=name, inverse=inverse)
    except (PathError, FiltrationError) as e:
        raise ConfigError(str(e), section="map") from e


def format_graph_map(f: GraphMap) -> str:
    g = f.graph
    lines = ["[graph]"]
    lines += [f"vertex {v}" for v in g.vertices]
    for i, name in enumerate(g.edge_names):
        o, t = g.origin(i + 1), g.terminus(i + 1)
        length = g.declared_lengths[i]
        suffix = f" length {length}" if length is not None else ""
        lines.append(f"edge {name} = {g.vertices[o]} {g.vertices[t]}{suffix}")
    lines.append("[map]")
    lines += [f"{name} -> {' '.join(g.token(e) for e in image)}" for name, image in zip(g.edge_names, f.images)]
    if f.inverse is not None:
        lines.append("[inverse]")
        lines += [
            f"{name} -> {' '.join(g.token(e) for e in image)}" for name, image in zip(g.edge_names, f.inverse.images)
        ]
    lines.append("[filtration]")
    lines += [
        f"stratum {r} = {' '.join(g.edge_names[i] for i in s)}" for r, s in enumerate(f.declared_strata, start=1)
    ]
    return "\n".join(lines) + "\n"


def describe(f: GraphMap, bounds: SearchBounds = DEFAULT_BOUNDS) -> list[dict]:
    """Per-stratum summary used by reports."""
    out = []
    for s in f.filtration.strata:
        entry = {
            "stratum": s.index,
            "edges": [f.graph.edge_names[i] for i in s.edges],
            "class": s.kind,
            "growth_rate": s.growth_rate,
            "h": s.h_value if math.isfinite(s.h_value) else "inf",
            "matrix": [list(row) for row in s.matrix],
        }
        if s.eigenvector is not None:
            entry["metric"] = list(s.eigenvector)
        if s.u is not None:
            entry["u"] = " ".join(f.graph.token(e) for e in s.u)
        if s.single_edge is not None and s.kind != "exponential":
            try:
                entry["degree"] = growth_degree(f, s.single_edge + 1, bounds)
            except TTConvexError as e:
                entry["degree"] = f"unknown: {e}"
        out.append(entry)
    return out
