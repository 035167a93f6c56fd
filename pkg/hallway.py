#!/usr/bin/env python3
"""
Hallways in the mapping torus of a graph map.

A hallway is an initial slice ρ₀ plus notches μ_i, ν_i; slice i is the tightening of
μ_i · f(ρ_{i−1}) · ν_i. Group-form hallways are hallways over the rose.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

from config import DEFAULT_BOUNDS, DEFAULT_LIMITS, ResourceLimits, SearchBounds
from errors import (
    ConfigError,
    HallwayError,
    NotCuttable,
    PathError,
    ResourceLimit,
    TTConvexError,
    Unknown,
    WrongStratumClass,
)
from fgword import Automorphism
from graphmap import Edge, EdgePath, GraphMap, growth_degree, map_path, rose, tighten

logger = logging.getLogger(__name__)

PathLike = Union[EdgePath, str, Sequence[int], None]


def as_graph_map(source: Union[GraphMap, Automorphism]) -> GraphMap:
    return rose(source) if isinstance(source, Automorphism) else source


def _path(f: GraphMap, value: PathLike, start: Optional[int] = None) -> Optional[EdgePath]:
    if value is None:
        return None
    if isinstance(value, EdgePath):
        return value
    if isinstance(value, str):
        edges = f.graph.parse_edges(value)
    else:
        edges = [f.graph.edge(e) for e in value]
    path = tighten(f.graph, edges, start if not edges else None)
    if len(path) != len(edges):
        raise HallwayError(f"{value!r} is not an immersed path")
    return path


class Hallway:
    """Slices ρ_0..ρ_D of a hallway over f. Missing notches are trivial."""

    __slots__ = ("f", "rho0", "duration", "mu", "nu", "slices", "limits")

    def __init__(
        self,
        f: GraphMap,
        rho0: PathLike,
        duration: int,
        mu: Optional[Mapping[int, PathLike]] = None,
        nu: Optional[Mapping[int, PathLike]] = None,
        limits: ResourceLimits = DEFAULT_LIMITS,
    ):
        if duration < 0:
            raise HallwayError(f"negative duration {duration}")
        if duration > limits.max_iterations:
            raise ResourceLimit(f"duration {duration} exceeds max_iterations={limits.max_iterations}")
        mu, nu = dict(mu or {}), dict(nu or {})
        for i in list(mu) + list(nu):
            if not 1 <= i <= duration:
                raise HallwayError(f"notch index {i} outside 1..{duration}")
        self.f = f
        self.limits = limits
        self.duration = duration
        self.rho0 = _path(f, rho0, 0) if rho0 is not None else None
        if self.rho0 is None:
            raise HallwayError("hallway needs an initial slice")
        slices = [self.rho0]
        mus: list[Optional[EdgePath]] = [None]
        nus: list[Optional[EdgePath]] = [None]
        for i in range(1, duration + 1):
            image = map_path(f, slices[-1], 1, limits)
            m = _path(f, mu.get(i), image.start)
            if m is None:
                m = EdgePath(f.graph, (), image.start)
            elif m.end != image.start:
                raise HallwayError(
                    f"mu_{i} ends at {f.graph.vertices[m.end]}, but f(ρ_{i - 1}) starts at {f.graph.vertices[image.start]}"
                )
            n = _path(f, nu.get(i), image.end)
            if n is None:
                n = EdgePath(f.graph, (), image.end)
            elif n.start != image.end:
                raise HallwayError(
                    f"nu_{i} starts at {f.graph.vertices[n.start]}, but f(ρ_{i - 1}) ends at {f.graph.vertices[image.end]}"
                )
            current = tighten(f.graph, m.edges + image.edges + n.edges, m.start)
            if len(current) > limits.max_word_length:
                raise ResourceLimit(f"slice {i} has {len(current)} edges", witness=i)
            slices.append(current)
            mus.append(m)
            nus.append(n)
        self.slices = tuple(slices)
        self.mu = tuple(mus)
        self.nu = tuple(nus)

    def __repr__(self):
        return f"Hallway(ρ₀={self.rho0}, D={self.duration}, 𝒱={self.visible_length:g})"

    def notches(self) -> list[EdgePath]:
        return [p for i in range(1, self.duration + 1) for p in (self.mu[i], self.nu[i])]

    @property
    def smooth(self) -> bool:
        return not any(self.notches())

    @property
    def closed(self) -> bool:
        return self.duration == 0 or not (self.mu[-1] or self.nu[-1])

    @property
    def visible_length(self) -> float:
        f = self.f
        return f.length(self.rho0) + f.length(self.slices[-1]) + sum(f.length(p) for p in self.notches())

    @property
    def visible_edges(self) -> int:
        return len(self.rho0) + len(self.slices[-1]) + sum(len(p) for p in self.notches())

    @property
    def quasi_smooth_bound(self) -> float:
        return max((self.f.length(p) for p in self.notches()), default=0.0)

    def slice_lengths(self) -> list[int]:
        return [len(s) for s in self.slices]

    def max_slice(self) -> tuple[int, int]:
        """(index, edge count) of the first longest slice."""
        lengths = self.slice_lengths()
        best = max(lengths)
        return lengths.index(best), best

    def height(self) -> int:
        return max((self.f.height(s) for s in self.slices), default=0)

    def check(self) -> bool:
        """Re-derive every slice from its predecessor."""
        for i in range(1, self.duration + 1):
            image = map_path(self.f, self.slices[i - 1], 1, self.limits)
            expected = tighten(self.f.graph, self.mu[i].edges + image.edges + self.nu[i].edges, self.mu[i].start)
            if expected != self.slices[i]:
                return False
        return True

    def inverse(self) -> "Hallway":
        """The same hallway read with every slice reversed."""
        return Hallway(
            self.f,
            self.rho0.inverse(),
            self.duration,
            mu={i: self.nu[i].inverse() for i in range(1, self.duration + 1)},
            nu={i: self.mu[i].inverse() for i in range(1, self.duration + 1)},
            limits=self.limits,
        )

    def window(self, a: int, b: int) -> "Hallway":
        """Slices a..b as a hallway of duration b − a."""
        return Hallway(
            self.f,
            self.slices[a],
            b - a,
            mu={i - a: self.mu[i] for i in range(a + 1, b + 1)},
            nu={i - a: self.nu[i] for i in range(a + 1, b + 1)},
            limits=self.limits,
        )

    def word(self) -> str:
        """Group form t⁻¹μ_{D−1}⋯t⁻¹μ_1 t⁻¹ρ₀ t ν_1 ⋯ t ν_{D−1} t ρ_D⁻¹ of a closed hallway."""
        if not self.closed:
            raise HallwayError("only closed hallways have a boundary word")
        g = self.f.graph
        parts = []
        for i in range(self.duration - 1, 0, -1):
            parts.append("t'")
            parts.extend(g.token(e) for e in self.mu[i].edges)
        if self.duration:
            parts.append("t'")
        parts.extend(g.token(e) for e in self.rho0.edges)
        for i in range(1, self.duration):
            parts.append("t")
            parts.extend(g.token(e) for e in self.nu[i].edges)
        if self.duration:
            parts.append("t")
            parts.extend(g.token(e) for e in self.slices[-1].inverse().edges)
        return " ".join(parts)

    def summary(self) -> dict:
        index, longest = self.max_slice()
        return {
            "duration": self.duration,
            "rho0": str(self.rho0),
            "final": str(self.slices[-1]),
            "visible_length": self.visible_length,
            "visible_edges": self.visible_edges,
            "quasi_smooth_bound": self.quasi_smooth_bound,
            "smooth": self.smooth,
            "slice_lengths": self.slice_lengths(),
            "max_slice_length": longest,
            "max_slice_index": index,
        }


def smooth_hallway(
    f: Union[GraphMap, Automorphism], rho0: PathLike, N: int, limits: ResourceLimits = DEFAULT_LIMITS
) -> Hallway:
    """Trivial notches: slice i is f^i_#(ρ₀)."""
    return Hallway(as_graph_map(f), rho0, N, limits=limits)


def build_hallway(
    f: Union[GraphMap, Automorphism],
    rho0: PathLike,
    duration: int,
    mu: Optional[Mapping[int, PathLike]] = None,
    nu: Optional[Mapping[int, PathLike]] = None,
    limits: ResourceLimits = DEFAULT_LIMITS,
) -> Hallway:
    """A closed hallway: notches only at levels 1..D−1."""
    for side, notches in (("mu", mu or {}), ("nu", nu or {})):
        if any(i == duration and notches[i] for i in notches):
            raise HallwayError(f"{side}_{duration} must be trivial: the last slice is f_#(ρ_(D−1))")
    f = as_graph_map(f)
    try:
        hallway = Hallway(f, rho0, duration, mu, nu, limits)
    except PathError as e:
        raise HallwayError(str(e)) from e
    logger.debug(f"built {hallway!r}")
    return hallway


# Group form


def _word_items(f: GraphMap, text: str) -> list[Union[str, Edge]]:
    """Tokens x, x', x^n plus the stable letter t, freely reduced."""
    items: list[Union[str, Edge]] = []
    if "t" in f.graph.edge_names:
        raise HallwayError("'t' is reserved for the stable letter")
    for token in text.split():
        power = 1
        name = token
        if "^" in token:
            name, _, exponent = token.partition("^")
            try:
                power = int(exponent)
            except ValueError:
                raise HallwayError(f"bad exponent in {token!r}") from None
        sign = 1
        if name.endswith("'"):
            name, sign = name[:-1], -1
        sign *= 1 if power >= 0 else -1
        for _ in range(abs(power)):
            if name == "t":
                item: Union[str, Edge] = "t" if sign > 0 else "t'"
            else:
                try:
                    item = sign * abs(f.graph.edge(name))
                except PathError as e:
                    raise HallwayError(str(e)) from e
            last = items[-1] if items else None
            if last is not None and (
                (isinstance(item, int) and isinstance(last, int) and last == -item)
                or {item, last} == {"t", "t'"}
            ):
                items.pop()
            else:
                items.append(item)
    return items


def hallway_from_word(source: Union[GraphMap, Automorphism], text: str, limits: ResourceLimits = DEFAULT_LIMITS) -> Hallway:
    """Read t⁻¹μ_{D−1}⋯t⁻¹ρ₀ t ν_1⋯t ρ_D⁻¹ (any rotation) into a hallway and check it closes up."""
    f = as_graph_map(source)
    items = _word_items(f, text)
    if "t" not in items:
        raise HallwayError("hallway word has no stable letter")
    lead = 0
    while not isinstance(items[lead], str):
        lead += 1
    items = items[lead:] + items[:lead]
    if items[0] != "t'":
        raise HallwayError("hallway word must descend (t') before it climbs (t)")
    down: list[list[Edge]] = []
    up: list[list[Edge]] = []
    for item in items:
        if item == "t'":
            if up:
                raise HallwayError("t' after t: not a single hallway")
            down.append([])
        elif item == "t":
            up.append([])
        else:
            (up if up else down)[-1].append(item)
    D = len(down)
    if len(up) != D:
        raise HallwayError(f"t-exponent sum is {len(up) - D}, expected 0")
    # down[j] follows the (j+1)-th t': mu_{D-1-j}, and down[D-1] is rho0
    mu = {D - 1 - j: down[j] for j in range(D - 1) if down[j]}
    nu = {i + 1: up[i] for i in range(D - 1) if up[i]}
    try:
        rho0 = _path(f, down[-1], 0)
        hallway = Hallway(f, rho0, D, mu, nu, limits)
        top = _path(f, up[-1], 0)
    except PathError as e:
        raise HallwayError(str(e)) from e
    if top.inverse().edges != hallway.slices[-1].edges:
        raise HallwayError(f"word does not close up: top slice is {hallway.slices[-1]}, word ends with {top}")
    return hallway


def parse_hallway(text: str, source: Union[GraphMap, Automorphism], limits: ResourceLimits = DEFAULT_LIMITS) -> Hallway:
    """`[hallway]` section: `word = ...` or `rho0 = ...`, `duration = k`, `mu_i = ...`, `nu_i = ...`."""
    from fgword import _sections

    f = as_graph_map(source)
    fields: dict[str, tuple[int, str]] = {}
    for section, number, line in _sections(text):
        if section != "hallway":
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ConfigError(f"expected 'key = value', got {line!r}", number, section)
        fields[key.strip()] = (number, value.strip())
    if not fields:
        raise ConfigError("no [hallway] section", section="hallway")
    try:
        if "word" in fields:
            return hallway_from_word(f, fields["word"][1], limits)
        if "rho0" not in fields or "duration" not in fields:
            raise ConfigError("need 'word' or both 'rho0' and 'duration'", section="hallway")
        number, value = fields["duration"]
        try:
            duration = int(value)
        except ValueError:
            raise ConfigError(f"bad duration {value!r}", number, "hallway") from None
        mu, nu = {}, {}
        for key, (number, value) in fields.items():
            for prefix, table in (("mu_", mu), ("nu_", nu)):
                if key.startswith(prefix):
                    if not key[len(prefix):].isdigit():
                        raise ConfigError(f"bad notch name {key!r}", number, "hallway")
                    table[int(key[len(prefix):])] = value
        return build_hallway(f, fields["rho0"][1], duration, mu, nu, limits)
    except (HallwayError, PathError) as e:
        raise ConfigError(str(e), section="hallway") from e


# Traced tightening


def _traced_step(
    f: GraphMap,
    tokens: Sequence[tuple[Edge, object]],
    mu: EdgePath,
    nu: EdgePath,
    image_tag: Callable[[Edge, object, int, Edge], object],
    notch_tag: Callable[[str, int, Edge], object],
    on_cancel: Optional[Callable[[tuple, tuple], None]] = None,
) -> list[tuple[Edge, object]]:
    """One slice step on tagged edges; the stack order is the one `tighten` uses."""
    stack: list[tuple[Edge, object]] = []

    def push(item):
        if stack and stack[-1][0] == -item[0]:
            popped = stack.pop()
            if on_cancel is not None:
                on_cancel(popped, item)
        else:
            stack.append(item)

    for q, e in enumerate(mu.edges):
        push((e, notch_tag("mu", q, e)))
    for e, tag in tokens:
        for k, x in enumerate(f.image(e)):
            push((x, image_tag(e, tag, k, x)))
    for q, e in enumerate(nu.edges):
        push((e, notch_tag("nu", q, e)))
    return stack


# Markings

_NONLINEAR = ("superlinear", "exponential")


@dataclass(frozen=True)
class Marking:
    slices: tuple[tuple[int, ...], ...]
    classes: dict

    def counts(self, i: int) -> dict[str, int]:
        out: dict[str, int] = {}
        for s in self.slices[i]:
            label = self.classes[s]
            out[label] = out.get(label, 0) + 1
        return out


def marking_class(f: GraphMap, s: int, bounds: SearchBounds = DEFAULT_BOUNDS) -> str:
    stratum = f.filtration[s]
    if stratum.kind != "polynomial":
        return stratum.kind
    try:
        degree = growth_degree(f, stratum.single_edge + 1, bounds)
    except (Unknown, WrongStratumClass, TypeError):
        return "unknown"
    if degree == 0:
        return "constant"
    if degree == 1:
        return "linear"
    return "superlinear"


def propagate_markings(f: GraphMap, hallway: Hallway, bounds: SearchBounds = DEFAULT_BOUNDS) -> Marking:
    """Marks start at edge heights; an image edge of lower height than its parent takes the parent's height."""
    filtration = f.filtration

    def image_tag(e, s, k, x):
        r = f.stratum_of(e)
        if f.stratum_of(x) == r or filtration[s].kind == "zero":
            return s
        return r

    def notch_tag(side, q, e):
        return f.stratum_of(e)

    tokens = [(e, f.stratum_of(e)) for e in hallway.rho0.edges]
    marks = [tuple(s for _, s in tokens)]
    for i in range(1, hallway.duration + 1):
        tokens = _traced_step(f, tokens, hallway.mu[i], hallway.nu[i], image_tag, notch_tag)
        if tuple(e for e, _ in tokens) != hallway.slices[i].edges:
            raise HallwayError(f"traced slice {i} disagrees with the stored slice")
        marks.append(tuple(s for _, s in tokens))
    used = {s for row in marks for s in row}
    classes = {s: marking_class(f, s, bounds) for s in sorted(used)}
    return Marking(tuple(marks), classes)


def nonlin_count(marking: Marking, i: int) -> int:
    """Edges of slice i marked by superlinear or exponential strata."""
    counts = marking.counts(i)
    if counts.get("unknown"):
        raise Unknown(f"slice {i} carries markings whose growth could not be classified")
    return sum(counts.get(label, 0) for label in _NONLINEAR)


def nonlin_ratio(marking: Marking, hallway: Hallway) -> float:
    visible = hallway.visible_length
    if visible == 0:
        return 0.0
    return max(nonlin_count(marking, i) for i in range(hallway.duration + 1)) / visible


def nonlin_edges(marking: Marking, hallway: Hallway, i: int) -> dict[str, int]:
    """The edges behind nonlin_count(marking, i), counted by edge name."""
    nonlin_count(marking, i)
    g = hallway.f.graph
    out: dict[str, int] = {}
    for e, s in zip(hallway.slices[i].edges, marking.slices[i]):
        if marking.classes[s] in _NONLINEAR:
            name = g.edge_names[abs(e) - 1]
            out[name] = out.get(name, 0) + 1
    return out


# Trajectories, cutting and sawtooth


@dataclass(frozen=True)
class Trajectory:
    start: int
    edge: Edge
    positions: tuple[tuple[int, int], ...]
    end: str
    end_slice: int
    notch_position: Optional[int] = None


def _polynomial_edge(f: GraphMap, e: Edge):
    stratum = f.filtration[f.stratum_of(e)]
    if stratum.kind != "polynomial" or stratum.u is None:
        raise WrongStratumClass(f"{f.graph.token(e)} is not an edge with f(E) = E·u")
    return stratum


def trajectory(hallway: Hallway, j: int) -> Trajectory:
    """Follow edge j of ρ₀ through the slices: E ↦ first edge of f(E), E⁻¹ ↦ last edge of f(E⁻¹)."""
    f = hallway.f
    e = hallway.rho0.edges[j]
    _polynomial_edge(f, e)
    tokens = [(x, ("rho", q == j)) for q, x in enumerate(hallway.rho0.edges)]
    positions = [(0, j)]
    ending: dict = {}

    def image_tag(parent, tag, k, x):
        tracked = tag[1] and x == parent and (k == 0 if parent > 0 else k == len(f.image(parent)) - 1)
        return ("img", tracked)

    def notch_tag(side, q, x):
        return (side, False, q)

    def on_cancel(popped, incoming):
        if ending:
            return
        if popped[1][1]:
            ending.update(kind="nu" if incoming[1][0] == "nu" else "died", q=incoming[1][2] if incoming[1][0] == "nu" else None)
        elif incoming[1][1]:
            ending.update(kind="mu" if popped[1][0] == "mu" else "died", q=None)

    for i in range(1, hallway.duration + 1):
        tokens = _traced_step(f, tokens, hallway.mu[i], hallway.nu[i], image_tag, notch_tag, on_cancel)
        if ending:
            return Trajectory(j, e, tuple(positions), ending["kind"], i, ending["q"])
        where = [p for p, (_, tag) in enumerate(tokens) if tag[1]]
        positions.append((i, where[0]))
        tokens = [(x, ("rho", tag[1])) for x, tag in tokens]
    return Trajectory(j, e, tuple(positions), "final", hallway.duration)


def cut(hallway: Hallway, j: int) -> tuple[Hallway, Hallway, int]:
    """Cut along the trajectory of edge j of ρ₀.

    Returns (ρ′, ρ″, k): ρ′ carries the trajectory edge on its boundary, ρ″ the rest, and k
    is the slice where the trajectory becomes visible.
    """
    e = hallway.rho0.edges[j]
    if e < 0:
        right, left, k = cut(hallway.inverse(), len(hallway.rho0) - 1 - j)
        return right.inverse(), left.inverse(), k
    traj = trajectory(hallway, j)
    if traj.end in ("died", "mu"):
        raise NotCuttable(f"trajectory of {hallway.f.graph.token(e)} ends inside the hallway at slice {traj.end_slice}")
    f, D, limits = hallway.f, hallway.duration, hallway.limits
    rho0 = hallway.rho0
    k = traj.end_slice
    if traj.end == "final":
        right = Hallway(f, rho0.sub(j, len(rho0)), D, nu={i: hallway.nu[i] for i in range(1, D + 1)}, limits=limits)
        left = Hallway(f, rho0.sub(0, j), D, mu={i: hallway.mu[i] for i in range(1, D + 1)}, limits=limits)
    else:
        q = traj.notch_position
        right = Hallway(f, rho0.sub(j, len(rho0)), k, nu={i: hallway.nu[i] for i in range(1, k)}, limits=limits)
        nu_left = {k: hallway.nu[k].sub(q + 1, len(hallway.nu[k]))}
        nu_left.update({i: hallway.nu[i] for i in range(k + 1, D + 1)})
        left = Hallway(f, rho0.sub(0, j), D, mu={i: hallway.mu[i] for i in range(1, D + 1)}, nu=nu_left, limits=limits)
    return right, left, k


def is_indecomposable(hallway: Hallway) -> bool:
    """No cut of length 𝒟."""
    for j, e in enumerate(hallway.rho0.edges):
        try:
            _, _, k = cut(hallway, j)
        except (NotCuttable, WrongStratumClass):
            continue
        if k == hallway.duration:
            return False
    return True


def sawtooth(hallway: Hallway, E: Union[Edge, str]) -> Hallway:
    """Push a leading E (or trailing E⁻¹) through the hallway: ρ₀ loses it, every μ_i becomes u."""
    f = hallway.f
    e = abs(f.graph.edge(E))
    stratum = _polynomial_edge(f, e)
    edges = hallway.rho0.edges
    D = hallway.duration
    leading = bool(edges) and edges[0] == e and not any(hallway.mu[1:])
    if not leading:
        if edges and edges[-1] == -e and not any(hallway.nu[1:]):
            return sawtooth(hallway.inverse(), e).inverse()
        if e in edges or -e in edges:
            raise HallwayError(f"{f.graph.token(e)} is interior to ρ₀ = {hallway.rho0}; cut first")
        raise HallwayError(f"ρ₀ = {hallway.rho0} does not cross {f.graph.token(e)}")
    for i, s in enumerate(hallway.slices):
        if not s.edges or s.edges[0] != e:
            raise HallwayError(f"{f.graph.token(e)} does not survive to slice {i}")
    u = EdgePath(f.graph, stratum.u, f.graph.terminus(e))
    return Hallway(
        f,
        hallway.rho0.sub(1, len(edges)),
        D,
        mu={i: u for i in range(1, D + 1)},
        nu={i: hallway.nu[i] for i in range(1, D + 1)},
        limits=hallway.limits,
    )


def _has_notches(h: Hallway) -> bool:
    return bool(h.rho0) or any(h.notches())


def cut_and_sawtooth(
    hallway: Hallway, degree: int, bounds: SearchBounds = DEFAULT_BOUNDS
) -> tuple[list[Hallway], list[Hallway]]:
    """Cut along every trajectory of a degree-d edge, then sawtooth it away.

    Returns (ℳ₁, ℳ₂): pieces never sawtoothed, and the sawtoothed ones.
    """
    f = hallway.f
    top = set()
    for s in f.filtration.strata:
        if s.kind == "polynomial" and s.single_edge is not None and s.u is not None:
            try:
                if growth_degree(f, s.single_edge + 1, bounds) == degree:
                    top.add(s.single_edge + 1)
            except TTConvexError:
                continue
    m1: list[Hallway] = []
    m2: list[Hallway] = []
    work: list[tuple[Hallway, bool]] = [(hallway, False)]
    while work:
        current, sawn = work.pop()
        for j, e in enumerate(current.rho0.edges):
            if abs(e) not in top:
                continue
            try:
                right, left, _ = cut(current, j)
            except NotCuttable:
                continue
            work.append((sawtooth(right, abs(e)), True))
            if _has_notches(left):
                work.append((left, sawn))
            break
        else:
            (m2 if sawn else m1).append(current)
    logger.debug(f"cut and sawtooth at degree {degree}: {len(m1)} + {len(m2)} pieces")
    return m1, m2


# Admissibility


def is_admissible(hallway: Hallway, r: int) -> bool:
    """Every slice starts and ends at a fixed vertex or with an H_r edge."""
    f = hallway.f
    fixed = f.fixed_vertices
    for s in hallway.slices:
        if not s.edges:
            if s.start not in fixed:
                return False
            continue
        if s.start not in fixed and f.stratum_of(s.edges[0]) != r:
            return False
        if s.end not in fixed and f.stratum_of(s.edges[-1]) != r:
            return False
    return True


def has_property_b(hallway: Hallway, r: int, L: float, N0: int, catalog, table=None) -> bool:
    """For every slice: no r-legal segment of r-length ≥ L, or N(ρ_(i−1)) < N₀."""
    from legality import N_count, build_legality, longest_legal_segment

    f = hallway.f
    table = table or build_legality(f)
    for i in range(1, hallway.duration + 1):
        longest, _ = longest_legal_segment(f, hallway.slices[i], r, table)
        if longest >= L and N_count(f, hallway.slices[i - 1], r, catalog, table) >= N0:
            return False
    return True


# Subhallway fan


@dataclass(frozen=True)
class FanElement:
    hallway: Hallway
    host_offset: int
    host_intervals: tuple[tuple[int, int], ...]
    origin: str

    def host_slices(self) -> range:
        return range(self.host_offset, self.host_offset + self.hallway.duration + 1)

    def interval_at(self, i: int) -> tuple[int, int]:
        return self.host_intervals[i - self.host_offset]


@dataclass(frozen=True)
class Carving:
    r: int
    T: float
    S: float
    smooth: tuple[FanElement, ...]
    cut: tuple[FanElement, ...]
    image_born: int
    notch_bound: float = 0.0
    flags: tuple[str, ...] = field(default_factory=tuple)


def _lower_runs(f: GraphMap, tokens: Sequence[tuple[Edge, object]], r: int) -> list[tuple[int, int]]:
    runs, start = [], None
    for p, (e, _) in enumerate(list(tokens) + [(None, None)]):
        inside = e is not None and f.stratum_of(e) < r
        if inside and start is None:
            start = p
        elif not inside and start is not None:
            runs.append((start, p))
            start = None
    return runs


def _find(haystack: tuple, needle: tuple) -> int:
    for a in range(len(haystack) - len(needle) + 1):
        if haystack[a : a + len(needle)] == needle:
            return a
    return -1


@dataclass
class _Open:
    birth: int
    origin: str
    rho0: EdgePath
    intervals: list
    mu: dict
    nu: dict
    steps: int = 0
    last: Optional[EdgePath] = None


def carve_subhallways(
    f: GraphMap, hallway: Hallway, r: int, T: float, S: float
) -> Carving:
    """Follow every maximal G_(r−1) run of ρ₀ and of the notches through the slices.

    Each run is a hallway in G_(r−1); its notches absorb the lower material that joins it.
    Smooth elements form ℳ₁; the others are cut at slices shorter than S_r and form ℳ₂.
    """
    if f.filtration[r].kind != "exponential":
        raise WrongStratumClass(f"stratum {r} is {f.filtration[r].kind}")
    g = f.graph
    counter = iter(range(1, 10**9))
    tokens: list[tuple[Edge, object]] = [(e, None) for e in hallway.rho0.edges]
    open_: dict[int, _Open] = {}
    for a, b in _lower_runs(f, tokens, r):
        ident = next(counter)
        open_[ident] = _Open(0, "slice", hallway.rho0.sub(a, b), [(a, b)], {}, {})
        for p in range(a, b):
            tokens[p] = (tokens[p][0], ident)
    finished: list[_Open] = []
    image_born = 0
    for i in range(1, hallway.duration + 1):
        tokens = _traced_step(
            f, tokens, hallway.mu[i], hallway.nu[i],
            lambda e, tag, k, x: tag if f.stratum_of(e) < r else "image",
            lambda side, q, e: "notch",
        )
        current = EdgePath(g, tuple(e for e, _ in tokens), hallway.slices[i].start)
        seen_parents = set()
        relabel: list[object] = [None] * len(tokens)
        for a, b in _lower_runs(f, tokens, r):
            run = tokens[a:b]
            parents = sorted({tag for _, tag in run if isinstance(tag, int)})
            seen_parents.update(parents)
            if len(parents) == 1 and parents[0] in open_:
                ident = parents[0]
                element = open_[ident]
                survivors = tuple(e for e, tag in run if tag == ident)
                first = next(p for p, (_, tag) in enumerate(run) if tag == ident)
                last = max(p for p, (_, tag) in enumerate(run) if tag == ident)
                previous = element.rho0 if element.steps == 0 else element.last
                image = map_path(f, previous).edges
                at = _find(image, survivors)
                if at < 0:
                    raise HallwayError(f"survivors of a G_(r−1) run at slice {i} are not a subpath of its image")
                left = [e for e, _ in run[:first]] + [-x for x in reversed(image[:at])]
                right = [-x for x in reversed(image[at + len(survivors) :])] + [e for e, _ in run[last + 1 :]]
                element.steps += 1
                element.mu[element.steps] = tighten(g, left, current.vertex_at(a) if not left else None)
                element.nu[element.steps] = tighten(g, right, current.vertex_at(b) if not right else None)
                element.intervals.append((a, b))
                element.last = current.sub(a, b)
                for p in range(a, b):
                    relabel[p] = ident
                continue
            for ident in parents:
                if ident in open_:
                    finished.append(open_.pop(ident))
            kinds = {tag for _, tag in run}
            if parents or "notch" in kinds:
                ident = next(counter)
                piece = current.sub(a, b)
                element = _Open(i, "merge" if parents else "notch", piece, [(a, b)], {}, {}, last=piece)
                open_[ident] = element
                for p in range(a, b):
                    relabel[p] = ident
            else:
                image_born += 1
        for ident in [k for k in open_ if k not in seen_parents and open_[k].birth < i]:
            finished.append(open_.pop(ident))
        tokens = [(e, relabel[p]) for p, (e, _) in enumerate(tokens)]
    finished.extend(open_.values())

    smooth: list[FanElement] = []
    cut_fan: list[FanElement] = []
    notch_bound = 0.0
    for element in sorted(finished, key=lambda el: (el.birth, el.intervals[0])):
        h = Hallway(f, element.rho0, element.steps, element.mu, element.nu, hallway.limits)
        fan = FanElement(h, element.birth, tuple(element.intervals), element.origin)
        notch_bound = max(notch_bound, h.quasi_smooth_bound)
        if h.smooth:
            smooth.append(fan)
            continue
        lengths = [f.length(s) for s in h.slices]
        cuts = [0] + [k for k in range(1, h.duration) if lengths[k] < S] + [h.duration]
        for a, b in zip(cuts, cuts[1:]):
            piece = h.window(a, b)
            cut_fan.append(FanElement(piece, element.birth + a, tuple(element.intervals[a : b + 1]), element.origin))
    logger.debug(f"carved {len(smooth)} smooth and {len(cut_fan)} cut subhallways at height {r}")
    return Carving(r, T, S, tuple(smooth), tuple(cut_fan), image_born, notch_bound)


def significant_hosts(carving: Carving, i: int, S_r: float) -> list[FanElement]:
    """ℳ₂ elements that meet host slice i in a segment of length ≥ S_r."""
    out = []
    for element in carving.cut:
        if i in element.host_slices():
            s = element.hallway.slices[i - element.host_offset]
            if element.hallway.f.length(s) >= S_r:
                out.append(element)
    return out
