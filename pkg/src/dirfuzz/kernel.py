"""Deterministic synthetic kernel that executes syscall programs.

Execution walks the call graph from each call in the program.  An edge
with a gate is only followed when the gate's prerequisite syscall appears
earlier in the same program, so call order decides how deep a program
reaches.
"""

from __future__ import annotations

from collections.abc import Sequence

from dirfuzz.addrmap import PcMap, build_pc_map
from dirfuzz.callgraph import CallGraph
from dirfuzz.errors import UnknownSyscall

Program = tuple[str, ...]


class SyntheticKernel:
    def __init__(self, graph: CallGraph) -> None:
        self.graph = graph
        self.gates = dict(graph.gates)
        self.pc_map: PcMap = build_pc_map(graph)
        self._pcs = {
            name: frozenset(range(*fi.pc_range)) if fi.pc_range else frozenset()
            for name, fi in graph.info.items()
        }
        self._relevant: dict[str, frozenset[str]] = {}
        self._cache: dict[tuple[str, frozenset[str]], tuple[frozenset[str], frozenset[int]]] = {}

    @property
    def syscalls(self) -> tuple[str, ...]:
        return self.graph.syscall_order

    def _relevant_prereqs(self, syscall: str) -> frozenset[str]:
        # prerequisites of gates anywhere below ``syscall``, ignoring gating
        got = self._relevant.get(syscall)
        if got is None:
            seen = {syscall}
            stack = [syscall]
            prereqs = set()
            while stack:
                node = stack.pop()
                for callee in self.graph.successors(node):
                    gate = self.gates.get((node, callee))
                    if gate is not None:
                        prereqs.add(gate)
                    if callee not in seen:
                        seen.add(callee)
                        stack.append(callee)
            got = self._relevant[syscall] = frozenset(prereqs)
        return got

    def reach(self, syscall: str, prior: frozenset[str] | set[str]) -> frozenset[str]:
        """Functions visited by one call given the syscalls issued before it."""
        return self._reach(syscall, prior)[0]

    def _reach(self, syscall: str, prior) -> tuple[frozenset[str], frozenset[int]]:
        key = (syscall, self._relevant_prereqs(syscall) & prior)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        seen = {syscall}
        stack = [syscall]
        while stack:
            node = stack.pop()
            for callee in self.graph.successors(node):
                if callee in seen:
                    continue
                gate = self.gates.get((node, callee))
                if gate is not None and gate not in prior:
                    continue
                seen.add(callee)
                stack.append(callee)
        funcs = frozenset(seen)
        pcs = frozenset().union(*(self._pcs[f] for f in funcs))
        self._cache[key] = (funcs, pcs)
        return funcs, pcs

    def _check(self, program: Sequence[str]) -> None:
        for call in program:
            if call not in self.graph.syscalls:
                raise UnknownSyscall(call)

    def execute(self, program: Sequence[str]) -> frozenset[int]:
        """Covered PCs of ``program``."""
        self._check(program)
        prior: set[str] = set()
        parts = []
        for call in program:
            parts.append(self._reach(call, prior)[1])
            prior.add(call)
        return frozenset().union(*parts)

    def execute_functions(self, program: Sequence[str]) -> frozenset[str]:
        """Visited functions of ``program`` (PC-free view of :meth:`execute`)."""
        self._check(program)
        prior: set[str] = set()
        parts = []
        for call in program:
            parts.append(self._reach(call, prior)[0])
            prior.add(call)
        return frozenset().union(*parts)
