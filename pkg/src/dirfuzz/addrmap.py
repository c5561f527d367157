"""PC-to-function mapping and the precomputed close-area PC set."""

from __future__ import annotations

import bisect
from collections.abc import Iterable
from dataclasses import dataclass

from dirfuzz.callgraph import CallGraph
from dirfuzz.errors import OverlapError

# Above this many PCs the close set is answered by bisection instead of a
# materialized frozenset.
_MATERIALIZE_LIMIT = 1 << 20


@dataclass(frozen=True)
class PcMap:
    """Sorted, disjoint, end-exclusive ``(start, end, function)`` intervals."""

    intervals: tuple[tuple[int, int, str], ...]
    unmapped: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "_starts", [iv[0] for iv in self.intervals])

    def lookup(self, pc: int) -> str | None:
        """Owning function of ``pc`` or None when unmapped."""
        i = bisect.bisect_right(self._starts, pc) - 1  # type: ignore[attr-defined]
        if i >= 0:
            start, end, name = self.intervals[i]
            if start <= pc < end:
                return name
        return None

    def range_of(self, name: str) -> tuple[int, int] | None:
        for start, end, owner in self.intervals:
            if owner == name:
                return start, end
        return None

    def functions(self, pcs: Iterable[int]) -> set[str]:
        out = set()
        for pc in pcs:
            name = self.lookup(pc)
            if name is not None:
                out.add(name)
        return out


def build_pc_map(g: CallGraph) -> PcMap:
    ivs = sorted(
        (fi.pc_range[0], fi.pc_range[1], name)
        for name, fi in g.info.items()
        if fi.pc_range is not None
    )
    for (s1, e1, n1), (s2, _e2, n2) in zip(ivs, ivs[1:]):
        if s2 < e1:
            raise OverlapError(f"pc ranges of {n1!r} and {n2!r} overlap")
    unmapped = tuple(n for n, fi in g.info.items() if fi.pc_range is None)
    return PcMap(tuple(ivs), unmapped)


class ClosePcSet:
    """Membership test over the PCs of close-area functions."""

    def __init__(self, intervals: Iterable[tuple[int, int]]) -> None:
        self.intervals = tuple(sorted(intervals))
        self._starts = [s for s, _ in self.intervals]
        total = sum(e - s for s, e in self.intervals)
        self._pcs: frozenset[int] | None = None
        if total <= _MATERIALIZE_LIMIT:
            self._pcs = frozenset(pc for s, e in self.intervals for pc in range(s, e))

    def __contains__(self, pc: int) -> bool:
        if self._pcs is not None:
            return pc in self._pcs
        i = bisect.bisect_right(self._starts, pc) - 1
        return i >= 0 and pc < self.intervals[i][1]

    def __len__(self) -> int:
        return sum(e - s for s, e in self.intervals)

    def __bool__(self) -> bool:
        return bool(self.intervals)

    def intersects(self, trace: Iterable[int]) -> bool:
        if self._pcs is not None:
            return not self._pcs.isdisjoint(trace)
        return any(pc in self for pc in trace)


def close_area_pcs(pc_map: PcMap, close: Iterable[str]) -> ClosePcSet:
    close = set(close)
    return ClosePcSet((s, e) for s, e, name in pc_map.intervals if name in close)


def covers_close_area(trace: Iterable[int], close_set: ClosePcSet) -> bool:
    return close_set.intersects(trace)
