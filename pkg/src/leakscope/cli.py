"""Command-line front end for the full pipeline.

Exit codes: 0 success, 1 usage error, 2 analysis error, 3 when analysis or
fuzzing produced at least one finding and --fail-on-finding was set (CI
gate). Machine-readable output goes to --out paths; stdout stays human.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import corpus as corpus_mod
from .coverage import emit_sva_file, match_coverage, path_condition, sva_lint
from .design import ast_to_json, levelize, parse_design
from .diagnose import diagnose
from .errors import LeakscopeError
from .fuzz import FuzzConfig, fuzz_loop
from .leakage import analyze, measure
from .meg import build_megs, enumerate_meps, export_dot, export_json
from .reports import Format, finding_to_json, render, text_report
from .simulator import InitPolicy, simulate
from .stimulus import load_stimulus
from .vcd import load_vcd_file, write_vcd

JOBS_ENV = "LEAKSCOPE_JOBS"


class _Parser(argparse.ArgumentParser):
    # Usage problems exit 1; analysis problems exit 2 (mapped in main).
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_design_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("sources", nargs="*", help="HDL source files")
    p.add_argument("--dut", help="use a bundled DUT instead of source files")
    p.add_argument("--top", help="top module name")


def _load_design(args):
    if args.dut:
        dut = corpus_mod.load_dut(args.dut)
        root = Path(corpus_mod._corpus_root()) / args.dut
        refs = tuple(
            (str(root / name), digest)
            for name, digest in corpus_mod.source_digest(dut.sources).items()
        )
        return dut.hierarchy, dut.profile, refs
    if not args.sources:
        raise LeakscopeError("no source files given (or use --dut)")
    sources = [(Path(p).name, Path(p).read_text()) for p in args.sources]
    digests = corpus_mod.source_digest(sources)
    refs = tuple((str(Path(p)), digests[Path(p).name]) for p in args.sources)
    h = parse_design(sources, top=args.top)
    return h, None, refs


def _parse_duration(text: str) -> float:
    text = text.strip().lower()
    if text.endswith("ms"):
        return float(text[:-2]) / 1000.0
    if text.endswith("s"):
        return float(text[:-1])
    if text.endswith("m"):
        return float(text[:-1]) * 60.0
    return float(text)


def _init_policy(args) -> InitPolicy:
    if args.init == "random":
        return InitPolicy.random(args.init_seed)
    return InitPolicy.zero()


def build_parser() -> _Parser:
    root = _Parser(prog="leakscope", description=__doc__)
    sub = root.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse sources and dump the AST")
    _add_design_args(p)
    p.add_argument("--dump-ast", metavar="OUT", help="write AST JSON here")

    p = sub.add_parser("graph", help="build micro-event graphs and paths")
    _add_design_args(p)
    p.add_argument("--module", help="restrict to one module")
    p.add_argument("--dot", metavar="OUT", help="write DOT here")
    p.add_argument("--json", metavar="OUT", help="write graph JSON here")
    p.add_argument("--meps", action="store_true", help="list input-to-output paths")
    p.add_argument("--max-paths", type=int, default=10_000)
    p.add_argument("--max-len", type=int, default=64)

    p = sub.add_parser("sim", help="simulate a stimulus and dump traces")
    _add_design_args(p)
    p.add_argument("--stim", required=True, help="stimulus JSON file")
    p.add_argument("--vcd", metavar="OUT", help="write a VCD here")
    p.add_argument("--max-cycles", type=int, default=10_000)
    p.add_argument("--quiescence", type=int, default=8)
    p.add_argument("--init", choices=["zero", "random"], default="zero")
    p.add_argument("--init-seed", type=int, default=0)

    p = sub.add_parser("analyze", help="leakage analysis over a run pair")
    _add_design_args(p)
    p.add_argument("--stim-a", help="first stimulus (simulated)")
    p.add_argument("--stim-b", help="second stimulus (simulated)")
    p.add_argument("--vcd-a", help="first run as VCD")
    p.add_argument("--vcd-b", help="second run as VCD")
    p.add_argument("--min-delta", type=int, default=1)
    p.add_argument("--init", choices=["zero", "random"], default="zero")
    p.add_argument("--init-seed", type=int, default=0)
    p.add_argument("--out", help="write findings JSON here")
    p.add_argument("--fail-on-finding", action="store_true")

    p = sub.add_parser("diagnose", help="localize a timing difference")
    p.add_argument("vcd_a", help="first run (VCD)")
    p.add_argument("vcd_b", help="second run (VCD)")
    p.add_argument("--design", action="append", default=[], help="HDL source file")
    p.add_argument("--dut", help="use a bundled DUT")
    p.add_argument("--top", help="top module name")
    p.add_argument("--module", help="module whose instance to diagnose")
    p.add_argument("--instance", help="instance path to diagnose")
    p.add_argument("--all-levels", action="store_true",
                   help="diagnose every instance, not just the deepest")
    p.add_argument("--out", help="write diagnosis JSON here")

    p = sub.add_parser("coverage", help="emit cover properties, match traces")
    _add_design_args(p)
    p.add_argument("--stim", action="append", default=[], help="stimulus to run")
    p.add_argument("--emit-sva", metavar="OUT", help="write SVA properties here")
    p.add_argument("--out", help="write coverage JSON here")
    p.add_argument("--csv", metavar="OUT", help="write per-module coverage CSV here")
    p.add_argument("--max-paths", type=int, default=10_000)
    p.add_argument("--max-len", type=int, default=64)

    p = sub.add_parser("fuzz", help="run a full campaign")
    _add_design_args(p)
    p.add_argument("--profile", help="DUT profile JSON (tags + data inputs)")
    p.add_argument("--budget", default=None, help="wall-clock abort bound (default 60s)")
    p.add_argument("--seed", type=int, default=0, help="campaign rng seed")
    p.add_argument("--mutants", type=int, default=None)
    p.add_argument("--rounds", type=int, default=None)
    p.add_argument("--seed-dir", help="directory of stimulus JSON seed files")
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--config", help="campaign config JSON file")
    p.add_argument("--out", help="output directory for campaign artifacts")
    p.add_argument("--fail-on-finding", action="store_true")

    p = sub.add_parser("report", help="render campaign artifacts")
    p.add_argument("campaign_dir", help="directory written by fuzz --out")
    p.add_argument("--format", choices=["text", "csv"], default="text")
    p.add_argument("--out", help="write the report here instead of stdout")

    return root


# ---------------------------------------------------------------------------
# Subcommand bodies
# ---------------------------------------------------------------------------

def _cmd_parse(args) -> int:
    h, _, _ = _load_design(args)
    print(f"parsed {len(h.modules)} module(s), top = {h.top}")
    for group in levelize(h):
        for path in group:
            inst = h.instance(path)
            print(f"  level {inst.level}: {path} ({inst.module_name})")
    if args.dump_ast:
        Path(args.dump_ast).write_text(ast_to_json(h) + "\n")
        print(f"AST written to {args.dump_ast}")
    return 0


def _cmd_graph(args) -> int:
    h, _, _ = _load_design(args)
    megs = build_megs(h.modules)
    names = [args.module] if args.module else sorted(megs)
    dots = []
    jsons = []
    for name in names:
        if name not in megs:
            raise LeakscopeError(f"no module {name!r} in design")
        g = megs[name]
        print(f"{name}: {len(g.nodes)} nodes, {len(g.edges)} edges")
        dots.append(export_dot(g))
        jsons.append(export_json(g))
        if args.meps:
            result = enumerate_meps(g, args.max_paths, args.max_len)
            flag = " (truncated)" if result.truncated else ""
            print(f"  {len(result.paths)} micro-event paths{flag}")
            for path in result.paths:
                print(f"    {path}")
    if args.dot:
        Path(args.dot).write_text("\n".join(dots))
        print(f"DOT written to {args.dot}")
    if args.json:
        Path(args.json).write_text(json.dumps(jsons, indent=2) + "\n")
        print(f"graph JSON written to {args.json}")
    return 0


def _cmd_sim(args) -> int:
    h, _, _ = _load_design(args)
    stim = load_stimulus(args.stim)
    bundle = simulate(
        h, stim, max_cycles=args.max_cycles, init=_init_policy(args),
        quiescence_window=args.quiescence,
    )
    flag = " (max cycles reached)" if bundle.max_cycles_reached else ""
    print(f"simulated {bundle.cycles} cycles{flag}, start at {bundle.start_cycle}")
    for path in bundle.instances():
        t = measure(bundle, path)
        print(f"  {path}: execution time {t.cycles} cycles")
    if args.vcd:
        Path(args.vcd).write_text(write_vcd(bundle))
        print(f"VCD written to {args.vcd}")
    return 0


def _cmd_analyze(args) -> int:
    h, _, _ = _load_design(args)
    if args.vcd_a and args.vcd_b:
        a = load_vcd_file(args.vcd_a)
        b = load_vcd_file(args.vcd_b)
    elif args.stim_a and args.stim_b:
        init = _init_policy(args)
        a = simulate(h, load_stimulus(args.stim_a), init=init, seed_id="a")
        b = simulate(h, load_stimulus(args.stim_b), init=init, seed_id="b")
    else:
        raise LeakscopeError("need --stim-a/--stim-b or --vcd-a/--vcd-b")
    findings = analyze([(a, b)], h, min_delta=args.min_delta)
    for f in findings:
        marker = "*" if f.first_leaky_level else " "
        print(
            f"{marker} {f.instance_path}: {f.time_a} vs {f.time_b} cycles "
            f"(delta {f.delta})"
        )
    if not findings:
        print("no timing differences")
    if args.out:
        doc = {"schemaVersion": 1, "findings": [finding_to_json(f) for f in findings]}
        Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    if findings and args.fail_on_finding:
        return 3
    return 0


def _cmd_diagnose(args) -> int:
    if args.dut:
        dut = corpus_mod.load_dut(args.dut)
        h = dut.hierarchy
    else:
        if not args.design:
            raise LeakscopeError("need --design sources or --dut")
        sources = [(Path(p).name, Path(p).read_text()) for p in args.design]
        h = parse_design(sources, top=args.top)
    megs = build_megs(h.modules)
    a = load_vcd_file(args.vcd_a, expect=h)
    b = load_vcd_file(args.vcd_b, expect=h)

    if args.instance:
        targets = [args.instance]
    elif args.module:
        targets = [i.path for i in h.instances if i.module_name == args.module]
        if not targets:
            raise LeakscopeError(f"no instance of module {args.module!r}")
    elif args.all_levels:
        targets = [path for group in levelize(h) for path in group]
    else:
        targets = [h.top]

    results = []
    for path in targets:
        module = h.instance(path).module_name
        diag = diagnose(a.trace(path), b.trace(path), megs[module])
        results.append((path, diag))
        print(f"{path}: divergence at cycle {diag.divergence_cycle}")
        print(f"  instigators: {', '.join(sorted(diag.instigators))}")
        for signal, loc in sorted(diag.culprits, key=lambda c: (c[1].line, c[0])):
            print(f"  culprit {signal} at {loc.file}:{loc.line}")
    if args.out:
        doc = {
            "schemaVersion": 1,
            "diagnoses": [
                {
                    "instance": path,
                    "instigators": sorted(d.instigators),
                    "divergenceCycle": d.divergence_cycle,
                    "culprits": [
                        {"signal": s, "file": loc.file, "line": loc.line}
                        for s, loc in sorted(d.culprits, key=lambda c: (c[0], c[1].line))
                    ],
                }
                for path, d in results
            ],
        }
        Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0


def _cmd_coverage(args) -> int:
    h, _, _ = _load_design(args)
    megs = build_megs(h.modules)
    conditions = {}
    truncated = {}
    for name, g in megs.items():
        result = enumerate_meps(g, args.max_paths, args.max_len)
        conditions[name] = [path_condition(p, g) for p in result.paths]
        truncated[name] = result.truncated
    if args.emit_sva:
        chunks = [emit_sva_file(conditions[name], name) for name in sorted(conditions)]
        text = "\n".join(chunks)
        problems = sva_lint(text)
        if problems:
            raise LeakscopeError("emitted SVA failed lint: " + "; ".join(problems))
        Path(args.emit_sva).write_text(text)
        print(f"SVA properties written to {args.emit_sva}")

    if args.stim:
        from .coverage import CoverageReport

        report = CoverageReport()
        for name in megs:
            from .fuzz import match_coverage_empty

            report.add(match_coverage_empty(name, len(conditions[name]), truncated[name]))
        for stim_path in args.stim:
            bundle = simulate(h, load_stimulus(stim_path))
            for name, g in megs.items():
                report.add(
                    match_coverage(bundle, conditions[name], g, truncated=truncated[name])
                )
        for name, m in sorted(report.per_module.items()):
            pct = 100.0 * m.covered_paths / m.total_paths if m.total_paths else 0.0
            print(f"{name}: {m.covered_paths}/{m.total_paths} ({pct:.2f}%)")
        print(f"overall: {report.overall_percent:.2f}%")
        if args.out:
            doc = {
                "schemaVersion": 1,
                "perModule": {
                    name: {
                        "totalPaths": m.total_paths,
                        "coveredPaths": m.covered_paths,
                        "truncated": m.truncated,
                    }
                    for name, m in sorted(report.per_module.items())
                },
                "overallPercent": round(report.overall_percent, 4),
            }
            Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        if args.csv:
            from .reports import coverage_report_csv

            Path(args.csv).write_text(coverage_report_csv(report))
    return 0


def _cmd_fuzz(args) -> int:
    h, profile, refs = _load_design(args)
    if args.profile:
        profile = corpus_mod.DutProfile.from_json(Path(args.profile).read_text())
    if profile is None:
        raise LeakscopeError("fuzzing needs --profile (or --dut with a bundled profile)")

    config_doc = {}
    if args.config:
        config_doc = json.loads(Path(args.config).read_text())

    def setting(flag_value, key, default):
        if flag_value is not None:
            return flag_value
        if key in config_doc:
            return config_doc[key]
        return default

    # Precedence: flags > environment > config file > built-in defaults.
    jobs_env = os.environ.get(JOBS_ENV)
    if args.jobs is not None:
        jobs = args.jobs
    elif jobs_env:
        jobs = int(jobs_env)
    else:
        jobs = config_doc.get("jobs", 1)
    cfg = FuzzConfig(
        mutants_per_seed=setting(args.mutants, "mutantsPerSeed", 200),
        rng_seed=args.seed,
        time_budget=_parse_duration(str(setting(args.budget, "timeBudget", "60s"))),
        max_rounds=setting(args.rounds, "maxRounds", 32),
        jobs=jobs,
    )

    seed_corpus = []
    if args.seed_dir:
        for path in sorted(Path(args.seed_dir).glob("*.json")):
            seed_corpus.append(load_stimulus(path))

    megs = build_megs(h.modules)
    result = fuzz_loop(h, megs, cfg, profile, seed_corpus or None, source_refs=refs)
    print(
        f"campaign done: {len(result.seeds)} seeds, {result.sims} sims, "
        f"{len(result.findings)} findings, stop: {result.stop_reason}"
    )
    if args.out:
        for fmt in (Format.JSON, Format.CSV, Format.DOT, Format.TEXT):
            render(result, fmt, args.out)
        print(f"artifacts written to {args.out}")
    else:
        sys.stdout.write(text_report(result))
    if result.findings and args.fail_on_finding:
        return 3
    return 0


def _cmd_report(args) -> int:
    base = Path(args.campaign_dir)
    if args.format == "csv":
        text = (base / "coverage.csv").read_text()
    else:
        text = (base / "summary.txt").read_text()
    if args.out:
        Path(args.out).write_text(text)
        print(f"report written to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


_COMMANDS = {
    "parse": _cmd_parse,
    "graph": _cmd_graph,
    "sim": _cmd_sim,
    "analyze": _cmd_analyze,
    "diagnose": _cmd_diagnose,
    "coverage": _cmd_coverage,
    "fuzz": _cmd_fuzz,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        return _COMMANDS[args.command](args)
    except LeakscopeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
