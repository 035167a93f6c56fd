#!/usr/bin/env python3
"""
ttconvex command line
Subcommands: validate, analyze, orbit, hallway, convexity, ledger, examples, suggest-filtration.
Exit codes: 0 success, 1 validation failure, 2 configuration error.
"""

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence, Union

from config import TTCONVEX_LOG_LEVEL, VERSION, RunConfig, ResourceLimits, SearchBounds, build
from errors import AlphabetError, ConfigError, TTConvexError
from fgword import Automorphism, orbit_lengths, parse_automorphism
from graphmap import GraphMap, describe, parse_graph_map, rose, suggest_filtration, validate_improved

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("validate", "analyze", "orbit", "hallway", "convexity", "ledger", "examples", "suggest-filtration")


def status(message: str) -> None:
    print(message, file=sys.stderr)


# Output


def _clean(value):
    """Floats to 10 significant digits; non-finite floats become strings."""
    if isinstance(value, float):
        if not math.isfinite(value):
            return "inf" if value > 0 else ("-inf" if value < 0 else "nan")
        return float(f"{value:.10g}")
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def _collect_flags(value, out: set) -> set:
    if isinstance(value, dict):
        for key, item in value.items():
            if key == "flags" and isinstance(item, (list, tuple)):
                out.update(str(x) for x in item)
            else:
                _collect_flags(item, out)
    elif isinstance(value, (list, tuple)):
        for item in value:
            _collect_flags(item, out)
    return out


def render(report: dict, fmt: str = "json") -> str:
    report = _clean(report)
    report["flags"] = sorted(_collect_flags(report, set()))
    if fmt == "table":
        lines = []
        for key in sorted(report):
            value = report[key]
            if isinstance(value, (dict, list)):
                value = json.dumps(value, sort_keys=True, ensure_ascii=False)
            lines.append(f"{key:<20} {value}")
        return "\n".join(lines) + "\n"
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def emit(report: dict, config: RunConfig, csv_text: Optional[str] = None) -> None:
    if config.format == "csv" and csv_text is not None:
        text = csv_text
    else:
        text = render(report, "table" if config.format == "table" else "json")
    if config.output:
        Path(config.output).write_text(text, encoding="utf-8")
        status(f"📊 Report written to {config.output}")
    else:
        sys.stdout.write(text)


# Inputs


def load_source(path: Optional[str] = None, fixture: Optional[str] = None) -> Union[Automorphism, GraphMap]:
    """`.aut` files give automorphisms, `.gm` files graph maps."""
    from fixtures import AUTOMORPHISMS, automorphism, graph_map

    if fixture:
        return automorphism(fixture) if fixture in AUTOMORPHISMS else graph_map(fixture)
    if not path:
        raise ConfigError("need --input or --fixture")
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from e
    name = Path(path).stem
    if path.endswith(".gm"):
        return parse_graph_map(text, name=name)
    return parse_automorphism(text, name=name)


def as_map(source: Union[Automorphism, GraphMap]) -> GraphMap:
    return rose(source) if isinstance(source, Automorphism) else source


def run_config(args: argparse.Namespace) -> RunConfig:
    limits = build(
        ResourceLimits,
        max_word_length=getattr(args, "max_word_length", None),
        max_iterations=getattr(args, "max_iterations", None),
    )
    bounds = build(
        SearchBounds,
        path_length=getattr(args, "path_length", None),
        nielsen_edges=getattr(args, "nielsen_edges", None),
        nielsen_period=getattr(args, "nielsen_period", None),
        bcc_edges=getattr(args, "bcc_edges", None),
        samples=getattr(args, "samples", None),
    )
    inputs = tuple(x for x in (getattr(args, "input", None),) if x)
    return build(
        RunConfig,
        subcommand=args.command,
        inputs=inputs,
        output=args.out,
        seed=args.seed,
        format=args.format,
        limits=limits,
        bounds=bounds,
        N_max=getattr(args, "N_max", None),
    )


# Subcommands


def cmd_validate(args, config: RunConfig) -> int:
    f = as_map(load_source(args.input, args.fixture))
    report = validate_improved(f, config.bounds)
    emit({"command": "validate", "ok": report.ok, "failures": report.failures(), "report": report.model_dump()}, config)
    if report.ok:
        status(f"✅ {f.name}: all checked properties pass")
        return 0
    status(f"❌ {f.name}: failing {', '.join(report.failures())}")
    return 1


def cmd_analyze(args, config: RunConfig) -> int:
    from cancellation import stratum_constants
    from legality import build_legality, find_nielsen

    f = as_map(load_source(args.input, args.fixture))
    table = build_legality(f)
    catalog = find_nielsen(f, config.bounds, config.limits)
    flags = [] if catalog.complete else ["nielsen-search-incomplete"]
    constants = {}
    for r, c in stratum_constants(f, config.bounds, config.limits, config.seed).items():
        constants[str(r)] = {
            "growth_rate": c.growth_rate,
            "bcc": c.bcc,
            "critical_length": c.critical_length,
            "T": c.T,
            "S": c.S,
            "verified_edges": c.verified_edges,
            "required_edges": c.required_edges,
            "flags": list(c.flags),
        }
        if not c.verification_complete:
            flags.append(f"S_{r}-unknown-beyond-{c.verified_edges}-edges")
    report = {
        "command": "analyze",
        "map": f.name,
        "strata": describe(f, config.bounds),
        "illegal_turns": [
            f"{f.graph.token(t.first)} {f.graph.token(t.second)}" for t in table.illegal_turns() if not t.degenerate
        ],
        "nielsen": [
            {"path": str(n.path), "period": n.period, "height": n.height, "closed": n.closed} for n in catalog.entries
        ],
        "nielsen_complete": catalog.complete,
        "constants": constants,
        "flags": flags,
    }
    emit(report, config)
    status(f"✅ {f.name}: {len(f.filtration)} strata analysed")
    return 0


def cmd_orbit(args, config: RunConfig) -> int:
    source = load_source(args.input, args.fixture)
    if isinstance(source, Automorphism):
        word = source.alphabet.parse_word(args.word)
        lengths = orbit_lengths(source, word, args.N, args.mode, config.limits)
    else:
        from graphmap import Circuit, map_circuit, map_path

        current = source.path(args.word) if args.mode != "cyclic" else Circuit(source.graph, source.graph.parse_edges(args.word))
        lengths = [len(current)]
        for _ in range(args.N):
            current = map_circuit(source, current) if args.mode == "cyclic" else map_path(source, current, 1, config.limits)
            lengths.append(len(current))
    emit({"command": "orbit", "word": args.word, "N": args.N, "mode": args.mode, "lengths": lengths}, config)
    return 0


def cmd_hallway(args, config: RunConfig) -> int:
    from cancellation import stratum_constants
    from hallway import carve_subhallways, hallway_from_word, nonlin_count, parse_hallway, propagate_markings

    source = load_source(args.input, args.fixture)
    f = as_map(source)
    if args.hallway:
        try:
            text = Path(args.hallway).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read {args.hallway}: {e.strerror}") from e
        h = parse_hallway(text, f, config.limits)
    elif args.word:
        h = hallway_from_word(f, args.word, config.limits)
    else:
        raise ConfigError("need --hallway or --word")
    report = {"command": "hallway", "hallway": h.summary(), "flags": []}
    marking = propagate_markings(f, h, config.bounds)
    try:
        counts = [nonlin_count(marking, i) for i in range(h.duration + 1)]
        report["nonlinear_counts"] = counts
        report["nonlinear_ratio"] = max(counts) / h.visible_length if h.visible_length else 0.0
    except TTConvexError as e:
        report["nonlinear_counts"] = None
        report["flags"].append("unknown-growth")
        status(f"⚠️ {e}")
    if args.carve is not None:
        constants = stratum_constants(f, config.bounds, config.limits, config.seed)
        if args.carve not in constants:
            raise ConfigError(f"stratum {args.carve} is not exponential")
        c = constants[args.carve]
        carving = carve_subhallways(f, h, args.carve, c.T, c.S)
        report["carving"] = {
            "T": carving.T,
            "S": carving.S,
            "smooth": [e.hallway.summary() | {"host_offset": e.host_offset} for e in carving.smooth],
            "cut": [e.hallway.summary() | {"host_offset": e.host_offset} for e in carving.cut],
            "image_born": carving.image_born,
            "notch_bound": carving.notch_bound,
            "flags": list(c.flags),
        }
    emit(report, config)
    status(f"✅ hallway of duration {h.duration}, visible length {h.visible_length:g}")
    return 0


def cmd_convexity(args, config: RunConfig) -> int:
    from convexity import corpus, empirical_K

    source = load_source(args.input, args.fixture)
    words = corpus(args.corpus, source, config.seed)
    if words and isinstance(words[0], str):
        raise ConfigError(f"{args.corpus} is a hallway fixture, not a corpus")
    report = empirical_K(source, words, config.N_max, args.mode, config.limits, corpus_name=args.corpus)
    if args.csv:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
        status(f"📊 Ratio table written to {args.csv}")
    payload = {"command": "convexity", **report.model_dump()}
    emit(payload, config, csv_text=report.to_csv())
    if report.flags:
        status(f"⚠️ flags: {', '.join(report.flags)}")
    status(f"✅ empirical K = {report.empirical_K:.10g}")
    return 0


def cmd_ledger(args, config: RunConfig) -> int:
    from convexity import LedgerInputs, ledger

    values = {}
    if args.input:
        try:
            values = json.loads(Path(args.input).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read ledger inputs from {args.input}: {e}") from e
    for key in ("q", "K_nonlin", "M", "C", "L", "k", "K_prime", "empirical_K"):
        value = getattr(args, key)
        if value is not None:
            values[key] = value
    if args.exponential:
        values["exponential"] = True
    inputs = build(LedgerInputs, **values)
    result = ledger(inputs)
    emit({"command": "ledger", **result.model_dump()}, config)
    return 0


def cmd_suggest(args, config: RunConfig) -> int:
    f = as_map(load_source(args.input, args.fixture))
    strata = suggest_filtration(f)
    names = [[f.graph.edge_names[i] for i in s] for s in strata]
    emit({"command": "suggest-filtration", "map": f.name, "strata": names}, config)
    return 0


def example_checks(name: str, config: RunConfig) -> list[dict]:
    """The worked examples, each reduced to a pass/fail check."""
    from convexity import corpus, empirical_K, stabilization_check
    from fixtures import automorphism, hallway_word, word_family
    from graphmap import is_nielsen_path
    from hallway import hallway_from_word, nonlin_edges, propagate_markings, smooth_hallway

    checks = []

    def check(label: str, ok: bool, detail) -> None:
        checks.append({"name": f"{name}.{label}", "ok": bool(ok), "detail": detail})

    def stabilizes(phi) -> None:
        result = stabilization_check(phi, corpus("ball(2)", phi), limits=config.limits, corpus_name="ball(2)")
        check("stabilization", result.stable, result.model_dump())

    if name == "f6":
        phi = automorphism("f6")
        f = rose(phi)
        lengths = orbit_lengths(phi, phi.alphabet.parse_word("d"), 8, "word", config.limits)
        check("orbit_d", lengths == [k * k + 1 for k in range(9)], lengths)
        flat = []
        for m in range(-5, 6):
            for template in ("a^{m}", "b a^{m} b'", "c a^{m} c'"):
                w = phi.alphabet.parse_word(template.format(m=m))
                if w:
                    flat.append(len(set(smooth_hallway(f, str(w), 7, config.limits).slice_lengths())) == 1)
        check("smoothex_constant", all(flat), f"{sum(flat)}/{len(flat)} constant")
        steps = []
        for m in range(0, 6):
            lengths = smooth_hallway(f, f"b a^{m}", 7, config.limits).slice_lengths()
            steps.append(all(b - a == 1 for a, b in zip(lengths, lengths[1:])))
        check("smoothex_growing", all(steps), f"{sum(steps)}/{len(steps)} grow by one")
        h = hallway_from_word(f, hallway_word("bulgeex", 5), config.limits)
        index, longest = h.max_slice()
        check("bulgeex", longest == 7 and h.visible_edges == 4, {"max_slice": longest, "at": index, "visible": h.visible_edges})
        expected = phi.alphabet.parse_word("x c a^-5 b'")
        w0 = word_family("expex", 5)[-1]
        h = smooth_hallway(f, str(w0), 10, config.limits)
        peak = " ".join(f.graph.token(e) for e in h.slices[5].edges)
        check("expex", peak == str(expected), {"slice_5": peak, "w0_length": len(w0)})
        w0 = word_family("polyex", 5)[-1]
        h = smooth_hallway(f, str(w0), 10, config.limits)
        index, longest = h.max_slice()
        marked = nonlin_edges(propagate_markings(f, h, config.bounds), h, index)
        visible_c = sum(1 for p in (h.rho0, h.slices[-1]) for e in p.edges if abs(e) == f.graph.edge("c"))
        nonlinear = sum(marked.values())
        check(
            "polyex",
            2 * marked.get("c", 0) > nonlinear and nonlinear <= visible_c,
            {"max_slice": longest, "at": index, "nonlinear": marked, "visible_c": visible_c},
        )
        rate = f.filtration[5].growth_rate
        check("spectral", abs(rate - (1 + 5**0.5) / 2) < 1e-9, rate)
        h = hallway_from_word(f, hallway_word("bulgeex2", 5), config.limits)
        index, longest = h.max_slice()
        check("bulgeex2", (index, longest) == (5, 6) and h.visible_edges == 4, {"max_slice": longest, "at": index})
        report = empirical_K(phi, word_family("abc", 4), 10, "cyclic", config.limits, corpus_name="abc")
        check("abc_cyclic", report.empirical_K <= 1.0, report.empirical_K)
        stabilizes(phi)
    elif name == "eglinear":
        phi = automorphism("eglinear")
        lengths = orbit_lengths(phi, phi.alphabet.parse_word("a"), 20, "word", config.limits)
        check("orbit_a", lengths == [1 + 4 * k for k in range(21)], lengths)
        f = rose(phi)
        check("commutator_nielsen", is_nielsen_path(f, f.path("x y x' y'"), 1) == 1, "x y x' y'")
        stabilizes(phi)
    elif name == "psi_f4":
        phi = automorphism("psi_f4")
        f = rose(phi)
        degrees = {f.graph.edge_names[s.single_edge]: f.degree(s.single_edge + 1, config.bounds) for s in f.filtration.strata}
        check("linear", degrees == {"a": 0, "b": 1, "c": 1, "d": 1}, degrees)
        stabilizes(phi)
    elif name == "identity":
        phi = automorphism("identity")
        report = empirical_K(phi, corpus("ball(2)", phi), 4, "word", config.limits, threads=1)
        check("empirical_K", report.empirical_K == 0.5, report.empirical_K)
    else:
        raise ConfigError(f"unknown example set {name!r} (known: f6, eglinear, psi_f4, identity, all)")
    return checks


def cmd_examples(args, config: RunConfig) -> int:
    names = ["f6", "eglinear", "psi_f4", "identity"] if args.name == "all" else [args.name]
    checks = [c for n in names for c in example_checks(n, config)]
    failed = [c["name"] for c in checks if not c["ok"]]
    emit({"command": "examples", "name": args.name, "checks": checks, "ok": not failed}, config)
    for c in checks:
        status(f"{'✅' if c['ok'] else '❌'} {c['name']}")
    return 1 if failed else 0


COMMANDS = {
    "validate": cmd_validate,
    "analyze": cmd_analyze,
    "orbit": cmd_orbit,
    "hallway": cmd_hallway,
    "convexity": cmd_convexity,
    "ledger": cmd_ledger,
    "examples": cmd_examples,
    "suggest-filtration": cmd_suggest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ttconvex", description="Train tracks, hallways and coarse convexity")
    parser.add_argument("--version", action="version", version=f"ttconvex {VERSION}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("json", "csv", "table"), default="json")
    common.add_argument("--max-word-length", type=int)
    common.add_argument("--max-iterations", type=int)
    common.add_argument("--path-length", type=int)
    common.add_argument("--nielsen-edges", type=int)
    common.add_argument("--nielsen-period", type=int)
    common.add_argument("--bcc-edges", type=int)
    common.add_argument("--samples", type=int)
    source = argparse.ArgumentParser(add_help=False)
    source.add_argument("--input", help=".aut automorphism or .gm graph map file")
    source.add_argument("--fixture", help="built-in example map")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", parents=[common, source], help="check the train track properties")
    sub.add_parser("analyze", parents=[common, source], help="strata, legality, Nielsen paths, constants")
    sub.add_parser("suggest-filtration", parents=[common, source], help="propose an invariant filtration")

    p = sub.add_parser("orbit", parents=[common, source], help="lengths of φ^k(w) for k = 0..N")
    p.add_argument("--word", required=True)
    p.add_argument("--N", type=int, default=8)
    p.add_argument("--mode", choices=("word", "cyclic"), default="word")

    p = sub.add_parser("hallway", parents=[common, source], help="slices, markings and carving of a hallway")
    p.add_argument("--hallway", help="file with a [hallway] section")
    p.add_argument("--word", help="group word with stable letter t")
    p.add_argument("--carve", type=int, help="carve subhallways below this exponential stratum")

    p = sub.add_parser("convexity", parents=[common, source], help="empirical coarse convexity constant")
    p.add_argument("--corpus", default="ball(4)")
    p.add_argument("--N-max", dest="N_max", type=int)
    p.add_argument("--mode", choices=("word", "cyclic", "path", "circuit"), default="word")
    p.add_argument("--csv", help="also write the per-(w, i, N) ratio table")

    p = sub.add_parser("ledger", parents=[common], help="assemble constants from the recurrences")
    p.add_argument("--input", help="JSON file of ledger inputs")
    p.add_argument("--q", type=int)
    p.add_argument("--K", dest="K_nonlin", type=float)
    p.add_argument("--M", type=float)
    p.add_argument("--C", type=float)
    p.add_argument("--L", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--K-prime", dest="K_prime", type=float)
    p.add_argument("--empirical-K", dest="empirical_K", type=float)
    p.add_argument("--exponential", action="store_true")

    p = sub.add_parser("examples", parents=[common], help="reproduce the worked examples")
    p.add_argument("--name", default="all")
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=TTCONVEX_LOG_LEVEL, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 2
    try:
        config = run_config(args)
        return COMMANDS[args.command](args, config)
    except (ConfigError, AlphabetError) as e:
        status(f"❌ {e}")
        return 2
    except TTConvexError as e:
        status(f"❌ {type(e).__name__}: {e}")
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
