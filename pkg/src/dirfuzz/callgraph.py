"""Kernel call graph model and the CGF interchange format.

CGF is a line-oriented text format, one directive per line::

    # comment
    syscall inotify_init
    func do_inotify_init
    edge inotify_init do_inotify_init
    pc do_inotify_init 0x100 0x110
    source do_inotify_init <<<
    static int do_inotify_init(unsigned int flags)
    {
        ...
    }
    >>>

Two extension directives describe synthetic kernels: ``gate <caller>
<callee> <prereq>`` makes an edge conditional on an earlier syscall, and
``template <call> [<call> ...]`` declares a seed program for generation.
"""

from __future__ import annotations

import enum
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from typing import IO

from dirfuzz.errors import OverlapError, ParseError, ValidationError

NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_.$]*\Z")

Edge = tuple[str, str]


class Kind(str, enum.Enum):
    SYSCALL = "syscall"
    INTERNAL = "func"


@dataclass(frozen=True)
class FunctionInfo:
    name: str
    kind: Kind
    source: str | None = None
    pc_range: tuple[int, int] | None = None


@dataclass(frozen=True, eq=False)
class CallGraph:
    """Immutable call graph ``G = (C ∪ F, E)`` with per-function metadata.

    ``info`` preserves declaration order, which is also the order in which
    source snippets are concatenated into calling code.
    """

    syscalls: frozenset[str]
    internals: frozenset[str]
    edges: frozenset[Edge]
    info: Mapping[str, FunctionInfo]
    gates: Mapping[Edge, str] = field(default_factory=dict)
    templates: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self) -> None:
        succ: dict[str, list[str]] = {n: [] for n in self.info}
        pred: dict[str, list[str]] = {n: [] for n in self.info}
        for u, v in self.edges:
            succ[u].append(v)
            pred[v].append(u)
        object.__setattr__(self, "_succ", {n: tuple(sorted(vs)) for n, vs in succ.items()})
        object.__setattr__(self, "_pred", {n: tuple(sorted(vs)) for n, vs in pred.items()})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CallGraph):
            return NotImplemented
        return (
            self.syscalls == other.syscalls
            and self.internals == other.internals
            and self.edges == other.edges
            and dict(self.info) == dict(other.info)
            and dict(self.gates) == dict(other.gates)
            and self.templates == other.templates
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def names(self) -> tuple[str, ...]:
        """All declared functions in declaration order."""
        return tuple(self.info)

    @property
    def syscall_order(self) -> tuple[str, ...]:
        """Syscalls in declaration order."""
        return tuple(n for n, fi in self.info.items() if fi.kind is Kind.SYSCALL)

    def __contains__(self, name: object) -> bool:
        return name in self.info

    def successors(self, name: str) -> tuple[str, ...]:
        return self._succ[name]  # type: ignore[attr-defined]

    def predecessors(self, name: str) -> tuple[str, ...]:
        return self._pred[name]  # type: ignore[attr-defined]

    def is_syscall(self, name: str) -> bool:
        return name in self.syscalls


class GraphBuilder:
    """Accumulates declarations and produces a validated :class:`CallGraph`."""

    def __init__(self) -> None:
        self._kinds: dict[str, Kind] = {}
        self._edges: list[Edge] = []
        self._pcs: dict[str, tuple[int, int]] = {}
        self._sources: dict[str, str] = {}
        self._gates: dict[Edge, str] = {}
        self._templates: list[tuple[str, ...]] = []

    def _declare(self, name: str, kind: Kind) -> None:
        if name in self._kinds:
            raise ValidationError(f"duplicate declaration of {name!r}")
        self._kinds[name] = kind

    def syscall(self, name: str) -> GraphBuilder:
        self._declare(name, Kind.SYSCALL)
        return self

    def func(self, name: str) -> GraphBuilder:
        self._declare(name, Kind.INTERNAL)
        return self

    def edge(self, caller: str, callee: str) -> GraphBuilder:
        self._edges.append((caller, callee))
        return self

    def pc(self, name: str, start: int, end: int) -> GraphBuilder:
        if name in self._pcs:
            raise ValidationError(f"duplicate pc range for {name!r}")
        self._pcs[name] = (start, end)
        return self

    def source(self, name: str, text: str) -> GraphBuilder:
        if name in self._sources:
            raise ValidationError(f"duplicate source for {name!r}")
        self._sources[name] = text
        return self

    def gate(self, caller: str, callee: str, prereq: str) -> GraphBuilder:
        if (caller, callee) in self._gates:
            raise ValidationError(f"duplicate gate on {caller} -> {callee}")
        self._gates[(caller, callee)] = prereq
        return self

    def template(self, calls: Iterable[str]) -> GraphBuilder:
        self._templates.append(tuple(calls))
        return self

    def build(self) -> CallGraph:
        kinds = self._kinds
        for name in kinds:
            if not NAME_RE.match(name):
                raise ValidationError(f"invalid function name {name!r}")

        edges: set[Edge] = set()
        for u, v in self._edges:
            for end in (u, v):
                if end not in kinds:
                    raise ValidationError(f"edge {u} -> {v}: {end!r} is not declared")
            if u == v:
                raise ValidationError(f"self-loop on {u!r}")
            if (u, v) in edges:
                raise ValidationError(f"duplicate edge {u} -> {v}")
            edges.add((u, v))

        for name, (start, end) in self._pcs.items():
            if name not in kinds:
                raise ValidationError(f"pc range for undeclared {name!r}")
            if not 0 <= start < end:
                raise ValidationError(f"pc range of {name!r} must satisfy 0 <= start < end")
        ranges = sorted((r, n) for n, r in self._pcs.items())
        for (r1, n1), (r2, n2) in zip(ranges, ranges[1:]):
            if r2[0] < r1[1]:
                raise OverlapError(f"pc ranges of {n1!r} and {n2!r} overlap")

        for name in self._sources:
            if name not in kinds:
                raise ValidationError(f"source for undeclared {name!r}")

        for (u, v), prereq in self._gates.items():
            if (u, v) not in edges:
                raise ValidationError(f"gate on undeclared edge {u} -> {v}")
            if kinds.get(prereq) is not Kind.SYSCALL:
                raise ValidationError(f"gate prerequisite {prereq!r} is not a syscall")

        for tmpl in self._templates:
            if not tmpl:
                raise ValidationError("empty template")
            for call in tmpl:
                if kinds.get(call) is not Kind.SYSCALL:
                    raise ValidationError(f"template call {call!r} is not a syscall")

        info = {
            n: FunctionInfo(n, k, self._sources.get(n), self._pcs.get(n))
            for n, k in kinds.items()
        }
        return CallGraph(
            syscalls=frozenset(n for n, k in kinds.items() if k is Kind.SYSCALL),
            internals=frozenset(n for n, k in kinds.items() if k is Kind.INTERNAL),
            edges=frozenset(edges),
            info=info,
            gates=dict(self._gates),
            templates=tuple(self._templates),
        )


def _parse_int(tok: str, lineno: int) -> int:
    try:
        if tok.lower().startswith("0x"):
            return int(tok[2:], 16)
        if not tok.isdigit():
            raise ValueError(tok)
        return int(tok, 10)
    except ValueError:
        raise ParseError(lineno, f"bad integer {tok!r}") from None


_ARITY = {"syscall": 1, "func": 1, "edge": 2, "pc": 3, "gate": 3}


def load_cgf(data: str | bytes | IO[str] | IO[bytes]) -> CallGraph:
    """Parse CGF text (or a stream of it) into a validated call graph."""
    if hasattr(data, "read"):
        data = data.read()  # type: ignore[union-attr]
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(1, f"input is not UTF-8: {exc}") from None
    assert isinstance(data, str)

    b = GraphBuilder()
    lines = data.split("\n")
    i = 0
    while i < len(lines):
        lineno = i + 1
        line = lines[i].split("#", 1)[0].strip()
        i += 1
        if not line:
            continue
        directive, *args = line.split()

        if directive == "source":
            if len(args) != 2 or args[1] != "<<<":
                raise ParseError(lineno, "expected 'source <name> <<<'")
            _check_names(args[:1], lineno)
            body: list[str] = []
            while i < len(lines) and lines[i].strip() != ">>>":
                body.append(lines[i])
                i += 1
            if i == len(lines):
                raise ParseError(lineno, "unterminated source block")
            i += 1
            b.source(args[0], "\n".join(body))
            continue

        if directive == "template":
            if not args:
                raise ParseError(lineno, "template needs at least one call")
            _check_names(args, lineno)
            b.template(args)
            continue

        arity = _ARITY.get(directive)
        if arity is None:
            raise ParseError(lineno, f"unknown directive {directive!r}")
        if len(args) != arity:
            raise ParseError(lineno, f"{directive} takes {arity} argument(s), got {len(args)}")
        if directive == "pc":
            _check_names(args[:1], lineno)
            b.pc(args[0], _parse_int(args[1], lineno), _parse_int(args[2], lineno))
            continue
        _check_names(args, lineno)
        if directive == "syscall":
            b.syscall(args[0])
        elif directive == "func":
            b.func(args[0])
        elif directive == "edge":
            b.edge(args[0], args[1])
        else:
            b.gate(*args)
    return b.build()


def _check_names(names: Iterable[str], lineno: int) -> None:
    for n in names:
        if not NAME_RE.match(n):
            raise ParseError(lineno, f"invalid name {n!r}")


def dump_cgf(g: CallGraph) -> str:
    """Serialize a graph to CGF; output is deterministic and round-trips."""
    out: list[str] = []
    for name, fi in g.info.items():
        out.append(f"{fi.kind.value} {name}")
    for u, v in sorted(g.edges):
        out.append(f"edge {u} {v}")
    for (u, v), prereq in sorted(g.gates.items()):
        out.append(f"gate {u} {v} {prereq}")
    for name, fi in g.info.items():
        if fi.pc_range is not None:
            out.append(f"pc {name} {fi.pc_range[0]:#x} {fi.pc_range[1]:#x}")
    for tmpl in g.templates:
        out.append("template " + " ".join(tmpl))
    for name, fi in g.info.items():
        if fi.source is not None:
            out.append(f"source {name} <<<")
            out.extend(fi.source.split("\n"))
            out.append(">>>")
    return "\n".join(out) + "\n"


def reverse_view(g: CallGraph) -> dict[str, frozenset[str]]:
    """Map every declared function to the set of its direct callers."""
    rev: dict[str, set[str]] = {n: set() for n in g.info}
    for u, v in g.edges:
        rev[v].add(u)
    return {n: frozenset(s) for n, s in rev.items()}
