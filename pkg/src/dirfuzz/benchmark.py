"""Seeded synthetic benchmark kernels with one planted golden path per target.

Every target sits at the end of a private call chain starting at an entry
syscall.  The edge that enters the target's close area is gated on a second
"prerequisite" syscall, so reaching deep close areas requires issuing the
prerequisite before the entry.  Filler functions around the targets keep
coverage-guided fuzzing productive but never lead into a chain.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from dirfuzz.analysis import AnalysisConfig, TargetSpec, analyze
from dirfuzz.callgraph import GraphBuilder, dump_cgf
from dirfuzz.errors import SpecError
from dirfuzz.kernel import SyntheticKernel

# "Dist." column of the 27-target evaluation table.
TABLE1_DISTANCES = (1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3, 3, 4, 4, 5, 5, 5, 5, 6, 6, 6, 7, 7, 7, 8, 8, 8)

SYSCALL_NAMES = (
    "read", "write", "open", "close", "stat", "fstat", "lseek", "mmap", "munmap",
    "brk", "ioctl", "pread64", "pwrite64", "readv", "writev", "pipe", "select",
    "mremap", "msync", "madvise", "dup", "dup2", "nanosleep", "getpid", "socket",
    "connect", "accept", "sendto", "recvfrom", "bind", "listen", "clone", "fork",
    "execve", "kill", "uname", "fcntl", "flock", "fsync", "truncate", "getdents",
    "getcwd", "chdir", "rename", "mkdir", "rmdir", "link", "unlink", "symlink",
    "chmod", "chown", "umask", "semget", "semop", "semctl", "msgget", "msgsnd",
    "shmget", "shmat", "shmctl", "setfsgid", "sched_yield", "keyctl", "add_key",
    "inotify_init", "inotify_init1", "fsopen", "fspick", "perf_event_open",
    "timerfd_create", "epoll_create", "epoll_create1", "eventfd", "eventfd2",
    "signalfd", "signalfd4", "io_uring_setup", "io_uring_enter", "io_uring_register",
    "bpf", "futex", "memfd_create", "mount", "umount2", "kexec_load", "setxattr",
)

MAX_FUNCTIONS = 500


@dataclass(frozen=True)
class BenchmarkSpec:
    distances: tuple[int, ...] = TABLE1_DISTANCES
    n_syscalls: int = 40
    n_filler: int = 100
    filler_gate_prob: float = 0.15
    decoy_prob: float = 0.3
    n_templates: int = 4
    pc_base: int = 0x1000
    pc_width: int = 16
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)

    def validate(self) -> None:
        if not self.distances:
            raise SpecError("at least one target distance is required")
        if any(not 1 <= dist <= 16 for dist in self.distances):
            raise SpecError("target distances must lie in 1..16")
        if not 2 <= self.n_syscalls <= len(SYSCALL_NAMES):
            raise SpecError(f"n_syscalls must lie in 2..{len(SYSCALL_NAMES)}")
        if self.n_filler < 0 or self.pc_width < 1 or self.pc_base < 0:
            raise SpecError("n_filler, pc_width and pc_base must be non-negative (width >= 1)")
        if not (0 <= self.filler_gate_prob <= 1 and 0 <= self.decoy_prob <= 1):
            raise SpecError("probabilities must lie in [0, 1]")
        # worst case: 2 decoys per chain node
        worst = self.n_syscalls + self.n_filler + 3 * sum(self.distances)
        if worst > MAX_FUNCTIONS:
            raise SpecError(f"benchmark could reach {worst} functions (limit {MAX_FUNCTIONS})")
        if self.analysis.fanout_limit < 3:
            raise SpecError("fanout_limit must be >= 3 to admit decoy callers")


def _syscall_src(name: str, calls: list[str], gates: dict[str, str]) -> str:
    body = []
    for callee in calls:
        if callee in gates:
            body.append(f"\tif (state_ready(__NR_{gates[callee]}))\n\t\t{callee}(ctx);")
        else:
            body.append(f"\t{callee}(ctx);")
    lines = "\n".join(body + ["\treturn 0;"])
    return f"SYSCALL_DEFINE1({name}, unsigned long, arg)\n{{\n\tstruct ctx *ctx = current_ctx();\n{lines}\n}}"


def _func_src(name: str, calls: list[str], gates: dict[str, str]) -> str:
    body = []
    for callee in calls:
        if callee in gates:
            body.append(f"\tif (state_ready(__NR_{gates[callee]}))\n\t\t{callee}(ctx);")
        else:
            body.append(f"\t{callee}(ctx);")
    lines = "\n".join(body) if body else "\tctx->count++;"
    return f"static void {name}(struct ctx *ctx)\n{{\n{lines}\n}}"


def make_benchmark(seed: int, spec: BenchmarkSpec = BenchmarkSpec()) -> tuple[SyntheticKernel, list[TargetSpec]]:
    """Build a reproducible kernel and analyse each planted target."""
    spec.validate()
    rng = random.Random(seed)
    d = spec.analysis.d

    syscalls = sorted(rng.sample(SYSCALL_NAMES, spec.n_syscalls))
    internals: list[str] = []
    calls: dict[str, list[str]] = {s: [] for s in syscalls}
    gates: dict[tuple[str, str], str] = {}
    targets: list[str] = []

    for i, dist in enumerate(spec.distances, start=1):
        entry, prereq = rng.sample(syscalls, 2)
        chain = [f"t{i:02d}_f{j}" for j in range(1, dist)] + [f"target_{i:02d}"]
        path = [entry, *chain]
        # gate the edge entering the close area; for shallow targets the
        # entry syscall is itself in the close area, so gate the first edge
        gi = dist - d - 1 if dist > d else 0
        for u, v in zip(path, path[1:]):
            calls.setdefault(u, []).append(v)
        gates[(path[gi], path[gi + 1])] = prereq
        internals.extend(chain)
        for node in chain:
            calls.setdefault(node, [])
            if rng.random() < spec.decoy_prob:
                for c in range(1, rng.randint(1, 2) + 1):
                    decoy = f"{node}_cb{c}"
                    internals.append(decoy)
                    calls[decoy] = [node]
        targets.append(chain[-1])

    fillers = [f"fn_{j:03d}" for j in range(spec.n_filler)]
    internals.extend(fillers)
    for f in fillers:
        calls[f] = []
    if fillers:
        for s in syscalls:
            for f in rng.sample(fillers, min(len(fillers), rng.randint(1, 3))):
                calls[s].append(f)
                if rng.random() < spec.filler_gate_prob:
                    gates[(s, f)] = rng.choice([x for x in syscalls if x != s])
        for j, f in enumerate(fillers):
            later = fillers[j + 1:]
            for g in rng.sample(later, min(len(later), rng.randint(0, 2))):
                calls[f].append(g)
                if rng.random() < spec.filler_gate_prob:
                    gates[(f, g)] = rng.choice(syscalls)

    b = GraphBuilder()
    for s in syscalls:
        b.syscall(s)
    for f in internals:
        b.func(f)
    syscall_set = set(syscalls)
    pc = spec.pc_base
    for name in (*syscalls, *internals):
        callees = calls.get(name, [])
        for callee in callees:
            b.edge(name, callee)
        gated = {v: p for (u, v), p in gates.items() if u == name}
        make_src = _syscall_src if name in syscall_set else _func_src
        b.source(name, make_src(name, callees, gated))
        b.pc(name, pc, pc + spec.pc_width)
        pc += spec.pc_width
    for (u, v), p in gates.items():
        b.gate(u, v, p)
    for _ in range(spec.n_templates):
        b.template(rng.choices(syscalls, k=rng.randint(2, 4)))

    graph = b.build()
    kernel = SyntheticKernel(graph)
    specs = []
    for target, dist in zip(targets, spec.distances):
        ts = analyze(graph, target, spec.analysis)
        if ts.min_distance != dist or not ts.fanout.accepted or len(ts.syscall_paths) != 1:
            raise SpecError(f"internal: target {target} violates the benchmark construction")
        specs.append(ts)
    return kernel, specs


def benchmark_json(kernel: SyntheticKernel, targets: list[TargetSpec], cfg: AnalysisConfig) -> str:
    """TargetSpecs plus each target's golden path as JSON."""
    docs = []
    for ts in targets:
        doc = ts.to_json(cfg)
        (golden,) = ts.syscall_paths
        doc["golden"] = {
            "path": list(golden),
            "entry": golden[0],
            "prerequisites": sorted(
                {kernel.gates[e] for e in zip(golden, golden[1:]) if e in kernel.gates}
            ),
        }
        docs.append(doc)
    return json.dumps({"targets": docs}, indent=2, sort_keys=True)


def benchmark_cgf(kernel: SyntheticKernel) -> str:
    return dump_cgf(kernel.graph)
