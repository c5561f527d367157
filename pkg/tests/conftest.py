from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dirfuzz.callgraph import CallGraph, GraphBuilder, load_cgf  # noqa: E402
from dirfuzz.kernel import SyntheticKernel  # noqa: E402

DATA = Path(__file__).parents[1] / "src" / "dirfuzz" / "data"
MOTIVATING = DATA / "motivating.cgf"


def graph_from(nodes, syscalls, edges, gates=(), pc_width=16) -> CallGraph:
    b = GraphBuilder()
    for n in nodes:
        (b.syscall if n in syscalls else b.func)(n)
    for u, v in edges:
        b.edge(u, v)
    for (u, v), p in dict(gates).items():
        b.gate(u, v, p)
    for i, n in enumerate(nodes):
        b.pc(n, 0x100 + i * pc_width, 0x100 + (i + 1) * pc_width)
    return b.build()


@pytest.fixture(scope="session")
def motivating() -> CallGraph:
    return load_cgf(MOTIVATING.read_bytes())


@pytest.fixture
def gated_kernel() -> SyntheticKernel:
    """s1 -> a is gated on s2; s3 is an unrelated syscall with its own helper."""
    g = graph_from(
        ["s1", "s2", "s3", "a", "b", "c"],
        {"s1", "s2", "s3"},
        [("s1", "a"), ("a", "b"), ("s2", "c"), ("s3", "c")],
        gates={("s1", "a"): "s2"},
    )
    return SyntheticKernel(g)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
