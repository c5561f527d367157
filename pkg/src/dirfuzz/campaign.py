"""Directed fuzzing campaigns: guided (agent) and unguided (baseline).

An agent campaign asks the backend for entry syscalls before fuzzing,
then every ``feedback_interval`` executions samples a few close-area hits
from the last window, asks again, and swaps in the boosted choice table.
A baseline campaign runs the same loop with a uniform table and never
talks to a backend.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
import random
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from dirfuzz.addrmap import ClosePcSet, close_area_pcs, covers_close_area
from dirfuzz.analysis import AnalysisConfig, TargetSpec
from dirfuzz.backends import Backend
from dirfuzz.choice import ChoiceTable, apply_guidance, init_table
from dirfuzz.engine import ExecutionRecord, FuzzConfig, FuzzState, step, validate_templates
from dirfuzz.errors import FanoutRejected, LlmError
from dirfuzz.kernel import SyntheticKernel
from dirfuzz.metrics import ComparisonRow, compare_runs
from dirfuzz.prompts import (
    TOKEN_BUDGET,
    FeedbackCase,
    PromptEnvelope,
    build_feedback_prompt,
    build_init_prompt,
)

log = logging.getLogger(__name__)


class Mode(str, enum.Enum):
    AGENT = "agent"
    BASELINE = "baseline"


@dataclass(frozen=True)
class CampaignConfig:
    mode: Mode = Mode.AGENT
    budget: int = 5000
    feedback_interval: int = 500
    feedback_case_count: int = 3
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    seed: int = 0
    token_budget: int = TOKEN_BUDGET
    sampling_rate: float = 1.0
    fuzz: FuzzConfig = field(default_factory=FuzzConfig)
    parallel_feedback: bool = False

    def __post_init__(self) -> None:
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.feedback_interval < 1:
            raise ValueError("feedback_interval must be >= 1")
        if self.feedback_case_count < 1:
            raise ValueError("feedback_case_count must be >= 1")
        if not 0.0 < self.sampling_rate <= 1.0:
            raise ValueError("sampling_rate must lie in (0, 1]")


@dataclass
class GuidanceRound:
    round: int
    kind: str
    executed: int
    s_inc: tuple[str, ...] = ()
    applied: bool = False
    skipped: str | None = None
    cases: tuple[int, ...] = ()

    def to_json(self) -> dict:
        return {
            "round": self.round,
            "kind": self.kind,
            "executed": self.executed,
            "s_inc_size": len(self.s_inc),
            "s_inc": list(self.s_inc),
            "applied": self.applied,
            "skipped": self.skipped,
            "cases": list(self.cases),
        }


@dataclass
class CampaignMetrics:
    executed: int = 0
    sampled: int = 0
    close_hits: int = 0
    series: list[tuple[int, int, float]] = field(default_factory=list)
    initial_round: GuidanceRound | None = None
    guidance_rounds: list[GuidanceRound] = field(default_factory=list)
    backend_calls: int = 0
    final_generation: int = 0

    @property
    def hit_rate(self) -> float:
        return self.close_hits / self.sampled if self.sampled else 0.0

    @property
    def coverage(self) -> int:
        return self.series[-1][1] if self.series else 0

    def record(self, hit: bool, sampled: bool, coverage: int) -> None:
        self.executed += 1
        if sampled:
            self.sampled += 1
            self.close_hits += hit
        self.series.append((self.executed, coverage, self.hit_rate))

    def to_json(self) -> dict:
        return {
            "executed": self.executed,
            "sampled": self.sampled,
            "close_hits": self.close_hits,
            "hit_rate": self.hit_rate,
            "coverage": self.coverage,
            "feedback_rounds": len(self.guidance_rounds),
            "feedback_rounds_applied": sum(r.applied for r in self.guidance_rounds),
            "initial_round": self.initial_round.to_json() if self.initial_round else None,
            "guidance_rounds": [r.to_json() for r in self.guidance_rounds],
            "backend_calls": self.backend_calls,
            "final_generation": self.final_generation,
        }


def calling_code(kernel: SyntheticKernel, target: TargetSpec) -> list[str]:
    """Source snippets of every function on the analysed paths, in declaration order."""
    on_paths = target.path_functions() or {target.target}
    return [
        fi.source
        for name, fi in kernel.graph.info.items()
        if name in on_paths and fi.source
    ]


def _record_json(rec: ExecutionRecord, kernel: SyntheticKernel, hit: bool, sampled: bool, cumulative: int) -> dict:
    return {
        "index": rec.index,
        "task": rec.task_kind.value,
        "program": list(rec.program),
        "generation": rec.generation,
        "was_new": rec.was_new,
        "hit": hit,
        "sampled": sampled,
        "coverage": len(rec.coverage),
        "functions": sorted(kernel.pc_map.functions(rec.coverage)),
        "cumulative_coverage": cumulative,
    }


class _Campaign:
    def __init__(
        self,
        kernel: SyntheticKernel,
        target: TargetSpec,
        cfg: CampaignConfig,
        backend: Backend | None,
        on_record: Callable[[dict], None] | None,
    ) -> None:
        if not target.fanout.accepted:
            raise FanoutRejected(
                f"{target.fanout.offender} has {target.fanout.predecessors} callers "
                f"(limit {cfg.analysis.fanout_limit})"
            )
        if cfg.mode is Mode.AGENT and backend is None:
            raise ValueError("agent mode needs a guidance backend")
        self.kernel = kernel
        self.target = target
        self.cfg = cfg
        self.backend = backend if cfg.mode is Mode.AGENT else None
        self.on_record = on_record
        self.close_set: ClosePcSet = close_area_pcs(kernel.pc_map, target.close_area)
        self.code = calling_code(kernel, target)
        self.templates = validate_templates(kernel.graph.templates, kernel.syscalls, cfg.fuzz.max_len)
        self.state = FuzzState.seeded(cfg.seed, cfg.fuzz)
        self.case_rng = random.Random(f"{cfg.seed}/feedback")
        self.sample_rng = random.Random(f"{cfg.seed}/hit-sampling")
        self.table: ChoiceTable = init_table(kernel.syscalls)
        self.metrics = CampaignMetrics()
        self.window: list[ExecutionRecord] = []
        self._pool: ThreadPoolExecutor | None = None
        self._pending: tuple[GuidanceRound, Future] | None = None

    # -- guidance --------------------------------------------------------------

    def _ask(self, envelope: PromptEnvelope, rnd: GuidanceRound, base: ChoiceTable) -> ChoiceTable | None:
        assert self.backend is not None
        try:
            resp = self.backend.ask(envelope)
        except LlmError as exc:
            log.warning("guidance round %d (%s) failed: %s", rnd.round, rnd.kind, exc)
            rnd.skipped = f"{type(exc).__name__}: {exc}"
            return None
        rnd.s_inc = tuple(sorted(resp.parsed.s_inc))
        rnd.applied = True
        return apply_guidance(base, resp.parsed)

    def initial_guidance(self) -> None:
        rnd = GuidanceRound(0, "initial", 0)
        env = build_init_prompt(self.code, self.target.target, self.cfg.token_budget)
        new = self._ask(env, rnd, self.table)
        if new is not None:
            self.table = new
        self.metrics.initial_round = rnd

    def _feedback_cases(self, picked: Sequence[ExecutionRecord]) -> list[FeedbackCase]:
        info = self.kernel.graph.info
        cases = []
        for rec in picked:
            covered = self.kernel.pc_map.functions(rec.coverage) & self.target.close_area
            srcs = tuple(fi.source for name, fi in info.items() if name in covered and fi.source)
            cases.append(FeedbackCase(rec.program, srcs))
        return cases

    def feedback_boundary(self) -> None:
        rnd = GuidanceRound(len(self.metrics.guidance_rounds) + 1, "feedback", self.metrics.executed)
        self.metrics.guidance_rounds.append(rnd)
        window, self.window = self.window, []
        if not window:
            rnd.skipped = "no close-area hits in window"
            return
        if self._pending is not None:
            rnd.skipped = "previous feedback request still in flight"
            return
        n = min(self.cfg.feedback_case_count, len(window))
        picked = sorted(self.case_rng.sample(window, n), key=lambda r: r.index)
        rnd.cases = tuple(r.index for r in picked)
        env = build_feedback_prompt(self.code, self.target.target, self._feedback_cases(picked), self.cfg.token_budget)
        if self._pool is None:
            new = self._ask(env, rnd, self.table)
            if new is not None:
                self.table = new
        else:
            self._pending = (rnd, self._pool.submit(self._ask, env, rnd, self.table))

    def _maybe_swap(self, wait: bool = False) -> None:
        if self._pending is None:
            return
        rnd, fut = self._pending
        if not (wait or fut.done()):
            return
        self._pending = None
        new = fut.result()
        if new is not None:
            # generation counter keeps counting from the live table
            self.table = ChoiceTable(new.syscalls, new.weights, self.table.generation + 1)

    # -- loop ------------------------------------------------------------------

    def run(self) -> CampaignMetrics:
        cfg = self.cfg
        if cfg.parallel_feedback and self.backend is not None:
            self._pool = ThreadPoolExecutor(max_workers=1, thread_name_prefix="feedback")
        try:
            if self.backend is not None:
                self.initial_guidance()
            for _ in range(cfg.budget):
                self._maybe_swap()
                rec = step(self.state, self.kernel, self.table, self.templates)
                hit = covers_close_area(rec.coverage, self.close_set)
                sampled = cfg.sampling_rate >= 1.0 or self.sample_rng.random() < cfg.sampling_rate
                cumulative = len(self.state.seen_coverage)
                self.metrics.record(hit, sampled, cumulative)
                if hit:
                    self.window.append(rec)
                if self.on_record is not None:
                    self.on_record(_record_json(rec, self.kernel, hit, sampled, cumulative))
                if self.backend is not None and self.metrics.executed % cfg.feedback_interval == 0:
                    self.feedback_boundary()
            self._maybe_swap(wait=True)
        finally:
            if self._pool is not None:
                self._pool.shutdown(wait=True)
        self.metrics.backend_calls = self.backend.calls if self.backend is not None else 0
        self.metrics.final_generation = self.table.generation
        return self.metrics


def run_campaign(
    kernel: SyntheticKernel,
    target: TargetSpec,
    cfg: CampaignConfig,
    backend: Backend | None = None,
    on_record: Callable[[dict], None] | None = None,
) -> CampaignMetrics:
    """Run one campaign; deterministic for a fixed seed unless parallel feedback is on."""
    return _Campaign(kernel, target, cfg, backend, on_record).run()


def recompute_metrics(records: Iterable[dict]) -> CampaignMetrics:
    """Rebuild execution metrics from a persisted record stream."""
    m = CampaignMetrics()
    for rec in records:
        m.record(rec["hit"], rec["sampled"], rec["cumulative_coverage"])
    return m


def compare_target(
    kernel: SyntheticKernel,
    target: TargetSpec,
    seeds: Sequence[int],
    cfg: CampaignConfig,
    backend_factory: Callable[[], Backend],
) -> ComparisonRow:
    """Agent vs baseline hit rates (percent) over the same seeds."""
    agent, base = [], []
    for seed in seeds:
        a = run_campaign(kernel, target, _with(cfg, Mode.AGENT, seed), backend_factory())
        b = run_campaign(kernel, target, _with(cfg, Mode.BASELINE, seed))
        agent.append(100.0 * a.hit_rate)
        base.append(100.0 * b.hit_rate)
    return compare_runs(agent, base, target=target.target, dist=target.min_distance)


def _with(cfg: CampaignConfig, mode: Mode, seed: int) -> CampaignConfig:
    return replace(cfg, mode=mode, seed=seed)


def write_records(path: str | Path) -> tuple[Callable[[dict], None], Callable[[], None]]:
    """Open a JSONL sink; returns ``(write, close)``."""
    fh = open(path, "w", encoding="utf-8")

    def write(doc: dict) -> None:
        fh.write(json.dumps(doc, sort_keys=True) + "\n")

    return write, fh.close


def read_records(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_series_csv(path: str | Path, runs: dict[str, CampaignMetrics]) -> None:
    """Coverage-vs-executions series of several runs side by side."""
    labels = list(runs)
    longest = max((len(m.series) for m in runs.values()), default=0)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["executed_count", *(f"{label}_coverage" for label in labels)])
        for i in range(longest):
            row: list[object] = [i + 1]
            for label in labels:
                series = runs[label].series
                row.append(series[i][1] if i < len(series) else "")
            w.writerow(row)
