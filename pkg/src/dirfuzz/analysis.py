"""Static analysis over a call graph for one target function.

Three jobs: call paths from syscall entries to the target, short call
paths from any function, and the close area (all functions reaching the
target within ``d`` edges).  Paths are simple and counted in edges.
"""

from __future__ import annotations

from collections import deque
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field

from dirfuzz.callgraph import CallGraph
from dirfuzz.errors import PathExplosion, TargetUnknown

CallPath = tuple[str, ...]


@dataclass(frozen=True)
class AnalysisConfig:
    k: int = 3
    d: int = 2
    max_paths: int = 10_000
    fanout_limit: int = 5

    def __post_init__(self) -> None:
        for name in ("k", "d", "max_paths", "fanout_limit"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass(frozen=True)
class PathSet:
    """Lexicographically ordered call paths; ``truncated`` when the cap was hit."""

    paths: tuple[CallPath, ...]
    truncated: bool = False

    def __iter__(self) -> Iterator[CallPath]:
        return iter(self.paths)

    def __len__(self) -> int:
        return len(self.paths)

    def __contains__(self, item: object) -> bool:
        return item in self.paths


@dataclass(frozen=True)
class FanoutVerdict:
    accepted: bool
    offender: str | None = None
    predecessors: int = 0


@dataclass(frozen=True)
class TargetSpec:
    target: str
    syscall_paths: PathSet
    bounded_paths: PathSet
    close_area: frozenset[str]
    min_distance: int | None
    fanout: FanoutVerdict = field(default_factory=lambda: FanoutVerdict(True))

    def path_functions(self) -> set[str]:
        return {n for p in (*self.syscall_paths, *self.bounded_paths) for n in p}

    def to_json(self, cfg: AnalysisConfig | None = None) -> dict:
        doc = {
            "target": self.target,
            "syscall_paths": [list(p) for p in self.syscall_paths],
            "syscall_paths_truncated": self.syscall_paths.truncated,
            "bounded_paths": [list(p) for p in self.bounded_paths],
            "bounded_paths_truncated": self.bounded_paths.truncated,
            "close_area": sorted(self.close_area),
            "min_distance": self.min_distance,
            "fanout": {
                "accepted": self.fanout.accepted,
                "offender": self.fanout.offender,
                "predecessors": self.fanout.predecessors,
            },
        }
        if cfg is not None:
            doc["config"] = {
                "k": cfg.k,
                "d": cfg.d,
                "max_paths": cfg.max_paths,
                "fanout_limit": cfg.fanout_limit,
            }
        return doc


def _require(g: CallGraph, target: str) -> None:
    if target not in g:
        raise TargetUnknown(f"target {target!r} is not declared in the call graph")


def _backward_paths(
    g: CallGraph, target: str, max_edges: int | None, emit, cap: int
) -> tuple[list[CallPath], bool]:
    """Enumerate simple paths ending at ``target`` by walking callers.

    ``emit(head, n_edges)`` decides whether the partial path (read from its
    head to the target) is a result.
    """
    found: list[CallPath] = []
    # path is stored target-first and reversed on emit
    path = [target]
    on_path = {target}
    truncated = False

    def visit(node: str) -> bool:
        nonlocal truncated
        if emit(node, len(path) - 1):
            if len(found) >= cap:
                truncated = True
                return False
            found.append(tuple(reversed(path)))
        if max_edges is not None and len(path) - 1 >= max_edges:
            return True
        for caller in g.predecessors(node):
            if caller in on_path:
                continue
            path.append(caller)
            on_path.add(caller)
            ok = visit(caller)
            on_path.discard(caller)
            path.pop()
            if not ok:
                return False
        return True

    visit(target)
    found.sort()
    return found, truncated


def syscall_paths(
    g: CallGraph, target: str, cfg: AnalysisConfig = AnalysisConfig(), strict: bool = False
) -> PathSet:
    """All simple paths from a syscall entry to ``target``.

    A syscall target yields the zero-edge path ``(target,)`` as well.
    """
    _require(g, target)
    paths, truncated = _backward_paths(
        g, target, None, lambda node, _n: node in g.syscalls, cfg.max_paths
    )
    if truncated and strict:
        raise PathExplosion(f"more than {cfg.max_paths} syscall paths reach {target!r}")
    return PathSet(tuple(paths), truncated)


def bounded_paths(
    g: CallGraph, target: str, cfg: AnalysisConfig = AnalysisConfig(), strict: bool = False
) -> PathSet:
    """All simple paths ending at ``target`` with 1 <= edges < k."""
    _require(g, target)
    paths, truncated = _backward_paths(
        g, target, cfg.k - 1, lambda _node, n: 1 <= n < cfg.k, cfg.max_paths
    )
    if truncated and strict:
        raise PathExplosion(f"more than {cfg.max_paths} bounded paths reach {target!r}")
    return PathSet(tuple(paths), truncated)


def close_area(g: CallGraph, target: str, cfg: AnalysisConfig = AnalysisConfig()) -> frozenset[str]:
    """Target plus every function reaching it within ``cfg.d`` edges (reverse BFS)."""
    _require(g, target)
    seen = {target}
    frontier = [target]
    for _ in range(cfg.d):
        nxt = []
        for node in frontier:
            for caller in g.predecessors(node):
                if caller not in seen:
                    seen.add(caller)
                    nxt.append(caller)
        if not nxt:
            break
        frontier = nxt
    return frozenset(seen)


def min_syscall_distance(g: CallGraph, target: str) -> int | None:
    """Edges on the shortest path from any syscall to ``target``."""
    _require(g, target)
    dist = {target: 0}
    queue = deque([target])
    while queue:
        node = queue.popleft()
        if node in g.syscalls:
            return dist[node]
        for caller in g.predecessors(node):
            if caller not in dist:
                dist[caller] = dist[node] + 1
                queue.append(caller)
    return None


def check_fanout(
    g: CallGraph, paths: Iterable[CallPath], cfg: AnalysisConfig = AnalysisConfig()
) -> FanoutVerdict:
    """Reject when some function on ``paths`` has more than ``fanout_limit`` callers.

    The offender reported is the lexicographically first one.
    """
    on_paths = sorted({n for p in paths for n in p})
    for name in on_paths:
        n_pred = len(g.predecessors(name))
        if n_pred > cfg.fanout_limit:
            return FanoutVerdict(False, name, n_pred)
    return FanoutVerdict(True)


def analyze(g: CallGraph, target: str, cfg: AnalysisConfig = AnalysisConfig()) -> TargetSpec:
    """Run all three jobs plus the fanout check."""
    sp = syscall_paths(g, target, cfg)
    bp = bounded_paths(g, target, cfg)
    return TargetSpec(
        target=target,
        syscall_paths=sp,
        bounded_paths=bp,
        close_area=close_area(g, target, cfg),
        min_distance=min_syscall_distance(g, target),
        fanout=check_fanout(g, (*sp, *bp), cfg),
    )
