"""Coverage-guided fuzz loop: generation, mutation and triage over a work queue."""

from __future__ import annotations

import enum
import heapq
import itertools
import random
from collections.abc import Sequence
from dataclasses import dataclass, field

from dirfuzz.choice import RANDOM_INSERT_PROB, ChoiceTable, sample_next
from dirfuzz.errors import UnknownSyscall, VerificationFailed
from dirfuzz.kernel import Program, SyntheticKernel


class TaskKind(str, enum.Enum):
    TRIAGE = "triage"
    GENERATION = "generation"
    MUTATION = "mutation"


_PRIORITY = {TaskKind.TRIAGE: 0, TaskKind.GENERATION: 1, TaskKind.MUTATION: 1}


@dataclass(frozen=True)
class FuzzConfig:
    max_len: int = 16
    p_template: float = 0.5
    p_mutation: float = 0.8
    random_prob: float = RANDOM_INSERT_PROB

    def __post_init__(self) -> None:
        if self.max_len < 1:
            raise ValueError("max_len must be >= 1")
        for name in ("p_template", "p_mutation", "random_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


@dataclass(frozen=True)
class CorpusEntry:
    program: Program
    coverage: frozenset[int]
    new_pcs: frozenset[int]


@dataclass(frozen=True)
class Task:
    kind: TaskKind
    entry: CorpusEntry | None = None
    candidate: Program | None = None
    claimed: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        if self.kind is TaskKind.TRIAGE and self.candidate is None:
            raise ValueError("triage tasks need a candidate program")


@dataclass(frozen=True)
class ExecutionRecord:
    index: int
    program: Program
    coverage: frozenset[int]
    was_new: bool
    task_kind: TaskKind
    generation: int = 0


@dataclass
class FuzzState:
    """Mutable fuzzing state owned by a single fuzz loop.

    ``global_coverage`` holds every executed PC except those still waiting
    in a triage task; triage adds them once the candidate is verified.
    ``seen_coverage`` is everything executed so far, pending or not.
    """

    rng: random.Random
    config: FuzzConfig = field(default_factory=FuzzConfig)
    corpus: list[CorpusEntry] = field(default_factory=list)
    global_coverage: set[int] = field(default_factory=set)
    seen_coverage: set[int] = field(default_factory=set)
    queue: list[tuple[int, int, Task]] = field(default_factory=list)
    executed_count: int = 0
    _seq: itertools.count = field(default_factory=itertools.count, repr=False)

    @classmethod
    def seeded(cls, seed: int, config: FuzzConfig | None = None) -> FuzzState:
        return cls(rng=random.Random(seed), config=config or FuzzConfig())

    def push(self, task: Task) -> None:
        heapq.heappush(self.queue, (_PRIORITY[task.kind], next(self._seq), task))

    def pop(self) -> Task | None:
        return heapq.heappop(self.queue)[2] if self.queue else None

    def pending_triage(self) -> int:
        return sum(1 for _, _, t in self.queue if t.kind is TaskKind.TRIAGE)


def validate_templates(templates: Sequence[Sequence[str]], syscalls: Sequence[str], max_len: int) -> list[Program]:
    known = set(syscalls)
    out = []
    for tmpl in templates:
        if not 1 <= len(tmpl) <= max_len:
            raise ValueError(f"template length {len(tmpl)} outside 1..{max_len}")
        for call in tmpl:
            if call not in known:
                raise UnknownSyscall(call)
        out.append(tuple(tmpl))
    return out


def generate(state: FuzzState, ct: ChoiceTable, templates: Sequence[Program] = ()) -> Program:
    """Clone a template or build a fresh program by chained table sampling."""
    rng, cfg = state.rng, state.config
    if templates and rng.random() < cfg.p_template:
        return tuple(rng.choice(templates))
    prog: list[str] = []
    prev = None
    for _ in range(rng.randint(1, cfg.max_len)):
        prev = sample_next(ct, prev, rng, cfg.random_prob)
        prog.append(prev)
    return tuple(prog)


def mutate(state: FuzzState, entry: CorpusEntry, ct: ChoiceTable) -> Program:
    """Apply one of insert / remove / replace to the entry's program."""
    rng, cfg = state.rng, state.config
    prog = list(entry.program)
    op = rng.choice(("insert", "remove", "replace"))
    if op == "remove" and len(prog) == 1:
        op = "replace"
    if op == "insert" and len(prog) >= cfg.max_len:
        op = "replace"

    if op == "insert":
        pos = rng.randint(0, len(prog))
        prev = prog[pos - 1] if pos > 0 else None
        prog.insert(pos, sample_next(ct, prev, rng, cfg.random_prob))
    elif op == "remove":
        del prog[rng.randrange(len(prog))]
    else:
        pos = rng.randrange(len(prog))
        prev = prog[pos - 1] if pos > 0 else None
        prog[pos] = sample_next(ct, prev, rng, cfg.random_prob)
    return tuple(prog)


def minimize(kernel: SyntheticKernel, program: Sequence[str], needed: frozenset[int]) -> Program:
    """Greedy left-to-right call removal, repeated until nothing can go."""
    prog = list(program)
    changed = True
    while changed:
        changed = False
        i = 0
        while i < len(prog) and len(prog) > 1:
            trial = prog[:i] + prog[i + 1:]
            if needed <= kernel.execute(trial):
                prog = trial
                changed = True
            else:
                i += 1
    return tuple(prog)


def triage(
    state: FuzzState, kernel: SyntheticKernel, candidate: Program, claimed: frozenset[int]
) -> CorpusEntry:
    """Verify, minimize and admit a candidate; raises VerificationFailed if stale."""
    cov = kernel.execute(candidate)
    needed = (claimed & cov) - state.global_coverage
    if not needed:
        state.global_coverage |= cov
        raise VerificationFailed("claimed coverage is no longer new")
    prog = minimize(kernel, candidate, needed)
    final = kernel.execute(prog)
    entry = CorpusEntry(prog, final, frozenset(final - state.global_coverage))
    state.corpus.append(entry)
    state.global_coverage |= cov
    return entry


def step(
    state: FuzzState,
    kernel: SyntheticKernel,
    ct: ChoiceTable,
    templates: Sequence[Program] = (),
) -> ExecutionRecord:
    """Run one task and return what was executed."""
    task = state.pop()
    if task is None:
        if state.corpus and state.rng.random() < state.config.p_mutation:
            task = Task(TaskKind.MUTATION, entry=state.rng.choice(state.corpus))
        else:
            task = Task(TaskKind.GENERATION)

    if task.kind is TaskKind.TRIAGE:
        assert task.candidate is not None
        try:
            triage(state, kernel, task.candidate, task.claimed)
            was_new = True
        except VerificationFailed:
            was_new = False
        program = task.candidate
        cov = kernel.execute(program)
    else:
        if task.kind is TaskKind.MUTATION and task.entry is not None:
            program = mutate(state, task.entry, ct)
        else:
            program = generate(state, ct, templates)
        cov = kernel.execute(program)
        new = cov - state.global_coverage
        was_new = bool(new)
        if new:
            state.push(Task(TaskKind.TRIAGE, candidate=program, claimed=frozenset(new)))
            state.global_coverage |= cov - new
        else:
            state.global_coverage |= cov

    state.seen_coverage |= cov
    record = ExecutionRecord(state.executed_count, program, cov, was_new, task.kind, ct.generation)
    state.executed_count += 1
    return record
