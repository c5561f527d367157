"""Brute-force reference implementations used only by the tests.

Each oracle walks the graph *forward* from every candidate start and
works from the raw edge list, so it shares no code path with the
backward traversals in ``dirfuzz.analysis`` or with ``SyntheticKernel``.
"""

from __future__ import annotations

import itertools
import random
from collections import deque


def _adjacency(edges):
    adj = {}
    for u, v in edges:
        adj.setdefault(u, []).append(v)
    return adj


def forward_simple_paths(edges, start, max_edges=None):
    """Every simple path beginning at ``start`` (including the bare ``(start,)``)."""
    adj = _adjacency(edges)
    out = []
    stack = [(start,)]
    while stack:
        path = stack.pop()
        out.append(path)
        if max_edges is not None and len(path) - 1 >= max_edges:
            continue
        for nxt in adj.get(path[-1], ()):
            if nxt not in path:
                stack.append(path + (nxt,))
    return out


def oracle_syscall_paths(nodes, syscalls, edges, target):
    found = set()
    for s in syscalls:
        for p in forward_simple_paths(edges, s):
            if p[-1] == target:
                found.add(p)
    return sorted(found)


def oracle_bounded_paths(nodes, edges, target, k):
    found = set()
    for u in nodes:
        for p in forward_simple_paths(edges, u, max_edges=k - 1):
            if p[-1] == target and 1 <= len(p) - 1 < k:
                found.add(p)
    return sorted(found)


def forward_distance(edges, src, dst):
    adj = _adjacency(edges)
    dist = {src: 0}
    q = deque([src])
    while q:
        u = q.popleft()
        if u == dst:
            return dist[u]
        for v in adj.get(u, ()):
            if v not in dist:
                dist[v] = dist[u] + 1
                q.append(v)
    return None


def oracle_close_area(nodes, edges, target, d):
    out = {target}
    for f in nodes:
        if f == target:
            continue
        dist = forward_distance(edges, f, target)
        if dist is not None and 1 <= dist <= d:
            out.add(f)
    return out


def oracle_min_distance(syscalls, edges, target):
    dists = [forward_distance(edges, s, target) for s in syscalls]
    dists = [x for x in dists if x is not None]
    return min(dists) if dists else None


def interpret(edges, gates, program):
    """Reference executor: per call, flood along edges whose gate is satisfied."""
    visited = set()
    for i, call in enumerate(program):
        earlier = set(program[:i])
        frontier = [call]
        seen = {call}
        while frontier:
            node = frontier.pop()
            for u, v in edges:
                if u != node or v in seen:
                    continue
                prereq = gates.get((u, v))
                if prereq is None or prereq in earlier:
                    seen.add(v)
                    frontier.append(v)
        visited |= seen
    return visited


def proper_subsequences(program):
    n = len(program)
    for r in range(n):
        for idx in itertools.combinations(range(n), r):
            if idx:
                yield tuple(program[i] for i in idx)


def random_graph(rng: random.Random, max_nodes=12, max_edges=30):
    """Random directed graph without self-loops: (nodes, syscalls, edges)."""
    n = rng.randint(1, max_nodes)
    nodes = [f"n{i}" for i in range(n)]
    syscalls = [x for x in nodes if rng.random() < 0.35]
    pairs = [(u, v) for u in nodes for v in nodes if u != v]
    edges = rng.sample(pairs, min(len(pairs), rng.randint(0, max_edges)))
    return nodes, syscalls, edges
