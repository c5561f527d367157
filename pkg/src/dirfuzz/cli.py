"""Command-line entry point: ``dirfuzz <subcommand> ...``.

Exit codes: 0 success, 1 error (including bad flags), 2 fanout rejection.
Every subcommand prints JSON on stdout unless ``--human`` is given; the
``prompt`` subcommand prints the prompt text itself.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from dirfuzz.analysis import AnalysisConfig, analyze
from dirfuzz.backends import HttpBackend, OracleBackend, ReplayBackend
from dirfuzz.benchmark import TABLE1_DISTANCES, BenchmarkSpec, benchmark_cgf, benchmark_json, make_benchmark
from dirfuzz.callgraph import load_cgf
from dirfuzz.campaign import (
    CampaignConfig,
    Mode,
    calling_code,
    compare_target,
    read_records,
    recompute_metrics,
    run_campaign,
    write_records,
    write_series_csv,
)
from dirfuzz.engine import FuzzConfig
from dirfuzz.errors import DirfuzzError, FanoutRejected
from dirfuzz.kernel import SyntheticKernel
from dirfuzz.metrics import load_table, reported_avg_diff, summarize, table1_path
from dirfuzz.prompts import TOKEN_BUDGET, FeedbackCase, build_feedback_prompt, build_init_prompt

log = logging.getLogger("dirfuzz")

EXIT_OK, EXIT_ERROR, EXIT_REJECT = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit code 2 is reserved for fanout rejection
        raise UsageError(f"{self.prog}: {message}")


def _emit(doc, human: bool) -> None:
    if human:
        _print_human(doc)
    else:
        print(json.dumps(doc, indent=2, sort_keys=True))


def _print_human(doc, indent: int = 0) -> None:
    pad = "  " * indent
    if isinstance(doc, dict):
        for key, val in doc.items():
            if isinstance(val, (dict, list)) and val:
                print(f"{pad}{key}:")
                _print_human(val, indent + 1)
            else:
                print(f"{pad}{key}: {val}")
    elif isinstance(doc, list):
        for item in doc:
            if isinstance(item, list):
                print(f"{pad}- " + " -> ".join(map(str, item)))
            elif isinstance(item, dict):
                print(f"{pad}-")
                _print_human(item, indent + 1)
            else:
                print(f"{pad}- {item}")
    else:
        print(f"{pad}{doc}")


def _analysis_cfg(args) -> AnalysisConfig:
    return AnalysisConfig(k=args.k, d=args.d, max_paths=args.max_paths, fanout_limit=args.fanout_limit)


def _load_graph(path: str):
    with open(path, "rb") as fh:
        return load_cgf(fh)


# -- subcommands ----------------------------------------------------------------


def cmd_analyze(args) -> int:
    cfg = _analysis_cfg(args)
    g = _load_graph(args.callgraph)
    spec = analyze(g, args.target, cfg)
    _emit(spec.to_json(cfg), args.human)
    if not spec.fanout.accepted:
        print(
            f"error: {spec.fanout.offender} has {spec.fanout.predecessors} direct callers "
            f"(limit {cfg.fanout_limit})",
            file=sys.stderr,
        )
        return EXIT_REJECT
    return EXIT_OK


def _backend(spec: str, g, target: str, cfg: AnalysisConfig, args):
    if spec == "oracle":
        return OracleBackend(g, target, cfg)
    if spec.startswith("replay:"):
        return ReplayBackend(spec[len("replay:"):], g.syscalls)
    if spec.startswith(("http:", "https:")):
        url = spec[len("http:"):] if spec.startswith(("http:http://", "http:https://")) else spec
        return HttpBackend(url, g.syscalls, model=args.model, transcript=args.record_transcript)
    raise UsageError(f"unknown --llm backend {spec!r} (oracle | replay:PATH | http:URL)")


def cmd_fuzz(args) -> int:
    mode = Mode(args.mode)
    if mode is Mode.BASELINE and args.llm is not None:
        raise UsageError("--mode baseline takes no --llm backend")
    if mode is Mode.BASELINE and args.parallel_feedback:
        raise UsageError("--parallel-feedback needs --mode agent")
    acfg = _analysis_cfg(args)
    ccfg = CampaignConfig(
        mode=mode,
        budget=args.budget,
        feedback_interval=args.interval,
        feedback_case_count=args.cases_per_round,
        analysis=acfg,
        seed=args.seed,
        token_budget=args.token_budget,
        sampling_rate=args.sampling_rate,
        fuzz=FuzzConfig(max_len=args.max_len),
        parallel_feedback=args.parallel_feedback,
    )
    g = _load_graph(args.callgraph)
    spec = analyze(g, args.target, acfg)
    if not spec.fanout.accepted:
        print(f"error: fanout check rejected {args.target}: {spec.fanout.offender}", file=sys.stderr)
        return EXIT_REJECT
    backend = _backend(args.llm or "oracle", g, args.target, acfg, args) if mode is Mode.AGENT else None
    kernel = SyntheticKernel(g)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write, close = write_records(out / "records.jsonl")
    try:
        metrics = run_campaign(kernel, spec, ccfg, backend, on_record=write)
    finally:
        close()
    summary = {
        "target": args.target,
        "mode": mode.value,
        "seed": args.seed,
        "budget": args.budget,
        "interval": args.interval,
        "backend": backend.name if backend else None,
        **metrics.to_json(),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    write_series_csv(out / "series.csv", {mode.value: metrics})
    _emit(summary, args.human)
    return EXIT_OK


def cmd_report(args) -> int:
    path = args.table or table1_path()
    rows = load_table(path)
    summary = summarize(rows)
    doc = {"rows": [r.to_json() for r in rows], "summary": summary.to_json()}
    printed = reported_avg_diff(path)
    if any(v is not None for v in printed):
        errs = [abs(r.avg_diff - p) for r, p in zip(rows, printed) if p is not None]
        doc["max_abs_error_vs_table"] = round(max(errs), 6)
    _emit(doc, args.human)
    return EXIT_OK


def cmd_prompt(args) -> int:
    acfg = _analysis_cfg(args)
    g = _load_graph(args.callgraph)
    spec = analyze(g, args.target, acfg)
    kernel = SyntheticKernel(g)
    code = calling_code(kernel, spec)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if args.kind == "init":
            env = build_init_prompt(code, args.target, args.token_budget)
        else:
            cases = _load_cases(args.cases, g) if args.cases else []
            env = build_feedback_prompt(code, args.target, cases, args.token_budget)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if env.truncated:
        print(f"warning: prompt truncated to fit {env.budget} tokens", file=sys.stderr)
    sys.stdout.write(env.text + "\n")
    return EXIT_OK


def _load_cases(path: str, g) -> list[FeedbackCase]:
    with open(path, encoding="utf-8") as fh:
        docs = json.load(fh)
    cases = []
    for doc in docs:
        if "covered_source" in doc:
            srcs = tuple(doc["covered_source"])
        else:
            covered = set(doc.get("covered", ()))
            srcs = tuple(fi.source for n, fi in g.info.items() if n in covered and fi.source)
        cases.append(FeedbackCase(tuple(doc["program"]), srcs))
    return cases


def cmd_benchmark(args) -> int:
    acfg = _analysis_cfg(args)
    spec = BenchmarkSpec(
        distances=tuple(args.distances) if args.distances else TABLE1_DISTANCES,
        n_syscalls=args.n_syscalls,
        n_filler=args.n_filler,
        analysis=acfg,
    )
    kernel, targets = make_benchmark(args.seed, spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "kernel.cgf").write_text(benchmark_cgf(kernel))
    (out / "targets.json").write_text(benchmark_json(kernel, targets, acfg) + "\n")
    _emit(
        {
            "kernel": str(out / "kernel.cgf"),
            "targets": str(out / "targets.json"),
            "functions": len(kernel.graph.info),
            "syscalls": len(kernel.graph.syscalls),
            "target_names": [t.target for t in targets],
        },
        args.human,
    )
    return EXIT_OK


def cmd_bench(args) -> int:
    """Agent vs baseline over every target of a generated benchmark."""
    acfg = _analysis_cfg(args)
    kernel, targets = make_benchmark(args.seed, BenchmarkSpec(analysis=acfg))
    ccfg = CampaignConfig(budget=args.budget, feedback_interval=args.interval, analysis=acfg)
    seeds = list(range(args.runs))
    rows = []
    for i, ts in enumerate(targets, start=1):
        row = compare_target(kernel, ts, seeds, ccfg, lambda ts=ts: OracleBackend(kernel.graph, ts.target, acfg))
        rows.append(replace(row, id=str(i)))
    if args.table_out:
        _write_table(args.table_out, rows)
    _emit({"rows": [r.to_json() for r in rows], "summary": summarize(rows).to_json()}, args.human)
    return EXIT_OK


def _write_table(path: str, rows) -> None:
    n = len(rows[0].agent_runs)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "target", "dist", *(f"agent_{i}" for i in range(1, n + 1)),
                    *(f"baseline_{i}" for i in range(1, n + 1)), "avg_diff"])
        for r in rows:
            w.writerow([r.id, r.target, r.dist, *(f"{x:.4f}" for x in r.agent_runs),
                        *(f"{x:.4f}" for x in r.baseline_runs), f"{r.avg_diff:.4f}"])


def cmd_series(args) -> int:
    labels = args.labels or [Path(p).parent.name or Path(p).stem for p in args.records]
    if len(labels) != len(args.records):
        raise UsageError("--labels must match --records one to one")
    runs = {label: recompute_metrics(read_records(p)) for label, p in zip(labels, args.records)}
    write_series_csv(args.out, runs)
    _emit({"series": args.out, "runs": {k: m.executed for k, m in runs.items()}}, args.human)
    return EXIT_OK


# -- parser -----------------------------------------------------------------------


def _add_analysis_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=3, help="bounded-path length cap (paths have < k edges)")
    p.add_argument("--d", type=int, default=2, help="close range in call edges")
    p.add_argument("--max-paths", type=int, default=10_000)
    p.add_argument("--fanout-limit", type=int, default=5)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dirfuzz", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key = value file; command-line flags take precedence")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="static analysis of one target")
    p.add_argument("--callgraph", required=True)
    p.add_argument("--target", required=True)
    _add_analysis_flags(p)
    p.add_argument("--human", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fuzz", help="run one campaign against a CGF kernel")
    p.add_argument("--callgraph", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--mode", choices=[m.value for m in Mode], default="agent")
    p.add_argument("--budget", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--llm", default=None, help="oracle | replay:PATH | http:URL (agent mode; default oracle)")
    p.add_argument("--interval", type=int, default=500)
    p.add_argument("--cases-per-round", type=int, default=3)
    p.add_argument("--token-budget", type=int, default=TOKEN_BUDGET)
    p.add_argument("--sampling-rate", type=float, default=1.0)
    p.add_argument("--max-len", type=int, default=16)
    p.add_argument("--model", default="gpt-4o")
    p.add_argument("--record-transcript", default=None, help="append HTTP responses to this JSONL file")
    p.add_argument("--parallel-feedback", action="store_true")
    p.add_argument("--out", required=True)
    _add_analysis_flags(p)
    p.add_argument("--human", action="store_true")
    p.set_defaults(func=cmd_fuzz)

    p = sub.add_parser("report", help="Avg Diff / omega summary of a per-target hit-rate table")
    p.add_argument("--table", default=None, help="CSV; defaults to the bundled evaluation table")
    p.add_argument("--human", action="store_true")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("prompt", help="print the initial or feedback prompt")
    p.add_argument("--kind", choices=["init", "feedback"], required=True)
    p.add_argument("--callgraph", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--cases", default=None, help="JSON list of {program, covered}")
    p.add_argument("--token-budget", type=int, default=TOKEN_BUDGET)
    _add_analysis_flags(p)
    p.set_defaults(func=cmd_prompt)

    p = sub.add_parser("benchmark", help="write a seeded synthetic benchmark kernel")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--distances", type=int, nargs="*", default=None)
    p.add_argument("--n-syscalls", type=int, default=BenchmarkSpec.n_syscalls)
    p.add_argument("--n-filler", type=int, default=BenchmarkSpec.n_filler)
    _add_analysis_flags(p)
    p.add_argument("--human", action="store_true")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("bench", help="agent vs baseline on every benchmark target")
    p.add_argument("--seed", type=int, default=0, help="benchmark seed")
    p.add_argument("--runs", type=int, default=3, help="campaign seeds per mode")
    p.add_argument("--budget", type=int, default=5000)
    p.add_argument("--interval", type=int, default=500)
    p.add_argument("--table-out", default=None, help="write a CSV readable by 'report'")
    _add_analysis_flags(p)
    p.add_argument("--human", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("series", help="coverage-vs-executions CSV from record files")
    p.add_argument("--records", nargs="+", required=True)
    p.add_argument("--labels", nargs="*", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--human", action="store_true")
    p.set_defaults(func=cmd_series)
    return parser


def read_config(path: str) -> dict[str, str]:
    """``key = value`` lines; ``#`` comments and optional ``[section]`` headers ignored."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line or (line.startswith("[") and line.endswith("]")):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = val.strip("\"'")
    return out


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Load ``--config`` (accepted anywhere on the line) into parser defaults."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return rest
    values = read_config(known.config)
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for sp in sub.choices.values():
        dests = {a.dest: a for a in sp._actions}
        overrides = {}
        for key, val in values.items():
            action = dests.get(key)
            if action is None:
                continue
            if isinstance(action, argparse._StoreTrueAction):
                overrides[key] = val.lower() in ("1", "true", "yes", "on")
            elif action.nargs in ("*", "+"):
                overrides[key] = [action.type(v) if action.type else v for v in val.split()]
            else:
                overrides[key] = val
        sp.set_defaults(**overrides)
    return rest


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_apply_config(parser, argv))
        logging.basicConfig(
            level=logging.DEBUG if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
            stream=sys.stderr,
        )
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except FanoutRejected as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REJECT
    except (DirfuzzError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
