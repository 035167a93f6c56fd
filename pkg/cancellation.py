#!/usr/bin/env python3
"""
Bounded cancellation and the constants derived from it.
Critical lengths, the lower-stratum thresholds T_r and S_r, Nielsen prepending and
the eigenray cancellation check all live here.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from config import DEFAULT_BOUNDS, DEFAULT_LIMITS, ResourceLimits, SearchBounds
from errors import (
    IdentityViolation,
    MissingInverse,
    NotNielsen,
    PathError,
    ThresholdError,
    WrongStratumClass,
)
from graphmap import (
    EdgePath,
    GraphMap,
    eigenray,
    enumerate_paths,
    growth_degree,
    is_nielsen_path,
    map_path,
    tighten,
)

logger = logging.getLogger(__name__)

HEURISTIC_FACTOR = 2.0
TOLERANCE = 1e-9


@dataclass(frozen=True)
class BccEstimate:
    lower_bound: float
    upper_bound: Optional[float]
    certified: bool
    witness: Optional[tuple[EdgePath, EdgePath]]
    search_edges: int

    def replay(self, f: GraphMap) -> float:
        """Cancellation of the witness pair, recomputed from scratch."""
        if self.witness is None:
            return 0.0
        return cancellation(f, *self.witness)


@dataclass(frozen=True)
class StratumConstants:
    r: int
    growth_rate: float
    bcc: float
    critical_length: float
    T: float
    S: float
    flags: tuple[str, ...] = field(default_factory=tuple)
    verified_edges: int = 0
    required_edges: int = 0

    @property
    def heuristic(self) -> bool:
        return bool(self.flags)

    @property
    def verification_complete(self) -> bool:
        return self.verified_edges >= self.required_edges


def lipschitz(f: GraphMap) -> float:
    """Largest stretch 𝓛(f(e)) / 𝓛(e) over edges."""
    return max(f.length(image) / f.edge_length(i + 1) for i, image in enumerate(f.images))


def volume(f: GraphMap) -> float:
    return float(sum(f.lengths))


def cancellation(f: GraphMap, alpha: EdgePath, beta: EdgePath, limits: ResourceLimits = DEFAULT_LIMITS) -> float:
    """𝓛(f_#α) + 𝓛(f_#β) − 𝓛(f_#(αβ)) for an immersed concatenation αβ."""
    if alpha.end != beta.start:
        raise PathError(f"{alpha} and {beta} are not concatenable")
    joined = tighten(f.graph, alpha.edges + beta.edges, alpha.start)
    if len(joined) != len(alpha) + len(beta):
        raise PathError(f"{alpha}·{beta} is not immersed")
    left = map_path(f, alpha, 1, limits)
    right = map_path(f, beta, 1, limits)
    whole = map_path(f, joined, 1, limits)
    return f.length(left) + f.length(right) - f.length(whole)


def _lcp(a: tuple, b: tuple) -> int:
    k = 0
    while k < len(a) and k < len(b) and a[k] == b[k]:
        k += 1
    return k


def bcc_constant(
    f: GraphMap,
    mode: str = "exhaustive",
    bounds: SearchBounds = DEFAULT_BOUNDS,
    limits: ResourceLimits = DEFAULT_LIMITS,
    max_edges: Optional[int] = None,
) -> BccEstimate:
    """Witnessed lower bound for the bounded cancellation constant, plus a certified upper bound on request.

    Paths γ₁, γ₂ leaving a vertex along different edges give the immersed concatenation
    γ₁⁻¹γ₂, whose cancellation under f is twice the common prefix of their images.
    """
    if mode not in ("exhaustive", "certified"):
        raise ValueError(f"unknown bcc mode {mode!r}")
    if mode == "certified" and f.inverse is None:
        raise MissingInverse(f"certified cancellation bound for {f.name} needs an inverse map")
    B = max_edges or bounds.bcc_edges
    g = f.graph
    best, witness = 0.0, None
    for v in range(len(g.vertices)):
        images = []
        for edges in enumerate_paths(g, B, starts=[v]):
            gamma = EdgePath(g, edges, v)
            images.append((map_path(f, gamma, 1, limits).edges, edges[0], gamma))
        images.sort(key=lambda item: item[0])
        for (im1, e1, p1), (im2, e2, p2) in zip(images, images[1:]):
            if e1 == e2:
                continue
            k = _lcp(im1, im2)
            value = 2 * f.length(im1[:k])
            if value > best + TOLERANCE:
                best, witness = value, (p1.inverse(), p2)
    upper = None
    if mode == "certified":
        upper = lipschitz(f) * (1 + 2 * lipschitz(f.inverse) * volume(f))
    logger.debug(f"{f.name}: cancellation lower bound {best} over {B}-edge paths")
    return BccEstimate(best, upper, mode == "certified", witness, B)


def random_paths(f: GraphMap, count: int, max_edges: int, rng: np.random.Generator) -> list[EdgePath]:
    """Seeded immersed paths with 2..max_edges edges."""
    g = f.graph
    out = []
    edges_all = g.oriented_edges()
    for _ in range(count):
        n = int(rng.integers(2, max_edges + 1))
        e = edges_all[int(rng.integers(len(edges_all)))]
        edges = [e]
        while len(edges) < n:
            options = [x for x in g.outgoing(g.terminus(edges[-1])) if x != -edges[-1]]
            if not options:
                break
            edges.append(options[int(rng.integers(len(options)))])
        out.append(EdgePath(g, edges, g.origin(edges[0])))
    return out


def check_bcc(
    f: GraphMap,
    C: float,
    paths: Sequence[EdgePath],
    rng: np.random.Generator,
    limits: ResourceLimits = DEFAULT_LIMITS,
) -> list[tuple[EdgePath, EdgePath, float]]:
    """Random splittings ρ = αβ violating 𝓛(f_#ρ) ≥ 𝓛(f_#α) + 𝓛(f_#β) − C."""
    violations = []
    for rho in paths:
        if len(rho) < 2:
            continue
        cut = int(rng.integers(1, len(rho)))
        alpha, beta = rho.sub(0, cut), rho.sub(cut, len(rho))
        lost = cancellation(f, alpha, beta, limits)
        if lost > C + TOLERANCE:
            violations.append((alpha, beta, lost))
    return violations


def select_bcc(
    f: GraphMap,
    bounds: SearchBounds = DEFAULT_BOUNDS,
    limits: ResourceLimits = DEFAULT_LIMITS,
    seed: int = 0,
    rounds: int = 8,
) -> tuple[float, list[str]]:
    """Cancellation constant used downstream, with the flags describing its provenance."""
    if f.inverse is not None:
        estimate = bcc_constant(f, "certified", bounds, limits)
        return estimate.upper_bound, []
    estimate = bcc_constant(f, "exhaustive", bounds, limits)
    value = max(HEURISTIC_FACTOR * estimate.lower_bound, estimate.lower_bound)
    rng = np.random.default_rng(seed)
    paths = random_paths(f, min(bounds.samples, 2000), bounds.path_length * 2, rng)
    flags = ["heuristic-bcc"]
    for _ in range(rounds):
        violations = check_bcc(f, value, paths, rng, limits)
        if not violations:
            break
        worst = max(v[2] for v in violations)
        logger.warning(f"⚠️ {f.name}: cancellation {worst} exceeds heuristic constant {value}, raising")
        value = max(2 * value, worst)
    else:
        if check_bcc(f, value, paths, rng, limits):
            logger.warning(f"⚠️ {f.name}: cancellation constant {value} still violated after {rounds} rounds")
            flags.append("bcc-unsettled")
    return value, flags


def critical_length(f: GraphMap, r: int, bcc: float) -> float:
    """2𝒞_f / (λ_r − 1)"""
    stratum = f.filtration[r]
    if stratum.kind != "exponential":
        raise WrongStratumClass(f"stratum {r} is {stratum.kind}; critical lengths need an exponential stratum")
    return 2 * bcc / (stratum.growth_rate - 1)


def _lower_pieces(f: GraphMap, image: Sequence[int], r: int) -> list[tuple[int, ...]]:
    pieces, current = [], []
    for e in image:
        if f.stratum_of(e) < r:
            current.append(e)
        elif current:
            pieces.append(tuple(current))
            current = []
    if current:
        pieces.append(tuple(current))
    return pieces


def longest_lower_subpath(f: GraphMap, r: int) -> float:
    """T_r: the longest subpath of some f(E), E in H_r, that lies in G_{r−1}."""
    lengths = [f.length(p) for i in f.filtration[r].edges for p in _lower_pieces(f, f.images[i], r)]
    return max(lengths, default=0.0)


@dataclass(frozen=True)
class Thresholds:
    T: float
    S: float
    certified: bool
    verified_edges: int
    required_edges: int

    @property
    def complete(self) -> bool:
        """Both conditions were checked on every lower path with up to 2·S_r edges."""
        return self.verified_edges >= self.required_edges


def _lower_samples(f: GraphMap, lower: set[int], max_edges: int, limits: ResourceLimits) -> list:
    g = f.graph
    samples = []
    for edges in enumerate_paths(g, max_edges, lower):
        gamma = EdgePath(g, edges, g.origin(edges[0]))
        once = map_path(f, gamma, 1, limits)
        twice = map_path(f, once, 1, limits)
        samples.append((f.length(gamma), f.length(once), f.length(twice), gamma))
    return samples


def thresholds(
    f: GraphMap,
    r: int,
    bcc: float,
    bounds: SearchBounds = DEFAULT_BOUNDS,
    limits: ResourceLimits = DEFAULT_LIMITS,
) -> Thresholds:
    """T_r and a significance threshold S_r, both defining conditions checked on lower paths.

    The check covers paths in G_(r−1) with up to 2·S_r edges, capped at bounds.path_length;
    past the cap the conditions are unknown and `complete` is False.
    """
    stratum = f.filtration[r]
    if stratum.kind != "exponential":
        raise WrongStratumClass(f"stratum {r} is {stratum.kind}")
    T = longest_lower_subpath(f, r)
    lower = {i for s in f.filtration.strata[: r - 1] for i in s.edges}
    lip = lipschitz(f)
    samples = []
    if T == 0:
        S, certified = 1.0, True
    elif f.inverse is not None:
        S = max(lip**2 * T + 1, lipschitz(f.inverse) * lip * (3 * T + 2 * bcc) + 1)
        certified = True
    else:
        samples = _lower_samples(f, lower, bounds.path_length, limits)
        short = [length for length, once, twice, _ in samples if min(once, twice) <= 3 * T]
        S = max([lip * T] + short) + 1
        certified = False
        logger.warning(f"⚠️ {f.name}: S_{r} = {S} supported by enumeration only")
    required = math.ceil(2 * S)
    verified = min(required, bounds.path_length)
    if not lower or T == 0:
        verified = required
    elif certified:
        samples = _lower_samples(f, lower, verified, limits)
    for length, once, twice, gamma in samples:
        if length >= S and min(once, twice) <= 3 * T:
            raise ThresholdError(f"S_{r}={S}: {gamma} is long but its images are short", witness=str(gamma))
        if length <= T and once >= S:
            raise ThresholdError(f"S_{r}={S}: short {gamma} maps to a long path", witness=str(gamma))
    if verified < required:
        logger.info(f"{f.name}: S_{r} = {S:.6g} checked on lower paths up to {verified} edges, unknown up to {required}")
    return Thresholds(T, S, certified, verified, required)


def is_significant(f: GraphMap, gamma: EdgePath, S_r: float, r: int) -> bool:
    """γ ⊂ G_{r−1} with 𝓛(γ) ≥ S_r."""
    return f.height(gamma) < r and f.length(gamma) >= S_r


def stratum_constants(
    f: GraphMap,
    bounds: SearchBounds = DEFAULT_BOUNDS,
    limits: ResourceLimits = DEFAULT_LIMITS,
    seed: int = 0,
) -> dict[int, StratumConstants]:
    bcc, flags = select_bcc(f, bounds, limits, seed)
    out = {}
    for r in f.filtration.of_kind("exponential"):
        stratum = f.filtration[r]
        th = thresholds(f, r, bcc, bounds, limits)
        extra = [] if th.certified else ["heuristic-S"]
        out[r] = StratumConstants(
            r,
            stratum.growth_rate,
            bcc,
            critical_length(f, r, bcc),
            th.T,
            th.S,
            tuple(flags + extra),
            th.verified_edges,
            th.required_edges,
        )
    return out


def delta_nielsen(
    f: GraphMap,
    mu: EdgePath,
    nu: EdgePath,
    k_max: int = 6,
    limits: ResourceLimits = DEFAULT_LIMITS,
) -> float:
    """Δ = 𝓛([μν]) − 𝓛(ν) for a period-one Nielsen path μ, with 𝓛(f^k_#[μν]) = 𝓛(f^k_#ν) + Δ checked."""
    if is_nielsen_path(f, mu, 1, limits) != 1:
        raise NotNielsen(f"{mu} is not fixed by f_#")
    if mu.end != nu.start:
        raise PathError(f"{mu} and {nu} are not concatenable")
    gamma = tighten(f.graph, mu.edges + nu.edges, mu.start)
    delta = f.length(gamma) - f.length(nu)
    if abs(delta) > f.length(mu) + TOLERANCE:
        raise IdentityViolation(f"|Δ|={abs(delta)} exceeds 𝓛(μ)={f.length(mu)}", witness=str(gamma))
    image_gamma, image_nu = gamma, nu
    for k in range(1, k_max + 1):
        image_gamma = map_path(f, image_gamma, 1, limits)
        image_nu = map_path(f, image_nu, 1, limits)
        if abs(f.length(image_gamma) - f.length(image_nu) - delta) > TOLERANCE:
            raise IdentityViolation(f"length identity fails at k={k}", witness=k)
    return delta


@dataclass(frozen=True)
class BlockRecord:
    k: int
    cancelled_edges: int
    blocks_i: int
    blocks_j: int


@dataclass(frozen=True)
class SublemmaReport:
    edge_i: str
    edge_j: str
    superlinear: bool
    records: tuple[BlockRecord, ...]

    @property
    def lost_i(self) -> bool:
        return any(rec.blocks_i for rec in self.records)

    @property
    def lost_j(self) -> bool:
        return any(rec.blocks_j for rec in self.records)

    @property
    def exclusive(self) -> bool:
        return not (self.lost_i and self.lost_j)


def _whole_blocks(blocks: Sequence[EdgePath], suffix: int) -> int:
    count = 0
    for block in reversed(blocks):
        if len(block) > suffix:
            break
        suffix -= len(block)
        count += 1
    return count


def sublemma_check(
    f: GraphMap,
    E_i: Union[int, str],
    E_j: Union[int, str],
    prefix_blocks: Union[int, tuple[int, int]],
    k_max: int,
    bounds: SearchBounds = DEFAULT_BOUNDS,
    limits: ResourceLimits = DEFAULT_LIMITS,
) -> SublemmaReport:
    """Iterate f_# on E_i S_i S̄_j E_j⁻¹ and count whole eigenray blocks lost on each side."""
    g = f.graph
    n_i, n_j = (prefix_blocks, prefix_blocks) if isinstance(prefix_blocks, int) else prefix_blocks
    e_i, e_j = abs(g.edge(E_i)), abs(g.edge(E_j))
    for e in (e_i, e_j):
        if f.filtration[f.stratum_of(e)].kind != "polynomial":
            raise WrongStratumClass(f"{g.token(e)} is not a polynomial edge")
    degree = growth_degree(f, e_i, bounds)
    superlinear = degree == "fast" or degree == "exponential" or degree >= 2

    def side(e: int, n: int) -> tuple[list[int], list[EdgePath]]:
        blocks = list(eigenray(f, e, n, limits).blocks) if n else []
        return [e] + [x for b in blocks for x in b.edges], blocks

    left, _ = side(e_i, n_i)
    right, _ = side(e_j, n_j)
    if g.terminus(left[-1]) != g.terminus(right[-1]):
        raise PathError("S_i and S_j end at different vertices")
    records = []
    for k in range(k_max + 1):
        left, blocks_i = side(e_i, n_i + k)
        right, blocks_j = side(e_j, n_j + k)
        suffix = 0
        while suffix < min(len(left), len(right)) and left[-1 - suffix] == right[-1 - suffix]:
            suffix += 1
        if suffix >= len(left) or suffix >= len(right):
            raise PathError(f"cancellation reaches {g.token(e_i)} or {g.token(e_j)} at k={k}")
        records.append(BlockRecord(k, suffix, _whole_blocks(blocks_i, suffix), _whole_blocks(blocks_j, suffix)))
    report = SublemmaReport(g.token(e_i), g.token(e_j), superlinear, tuple(records))
    if superlinear and not report.exclusive:
        raise IdentityViolation(
            f"both {g.token(e_i)} and {g.token(e_j)} lose whole blocks", witness=[r.k for r in records if r.blocks_i]
        )
    return report
