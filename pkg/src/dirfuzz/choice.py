"""Choice table: pairwise syscall weights, guidance boosts, and sampling."""

from __future__ import annotations

import bisect
import enum
import json
import random
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from dirfuzz.errors import EmptySyscallSet, NegativeWeight, UnknownSyscall, ZeroRow

RANDOM_INSERT_PROB = 0.05


class Origin(str, enum.Enum):
    INITIAL = "initial"
    FEEDBACK = "feedback"


@dataclass(frozen=True)
class Guidance:
    s_inc: frozenset[str]
    round: int = 0
    origin: Origin = Origin.INITIAL


class ChoiceTable:
    """Immutable row-stochastic table over an ordered syscall list.

    ``weights[i][j]`` is the raw weight of emitting ``syscalls[j]`` right
    after ``syscalls[i]``; ``probs`` is its row-normalized form.
    """

    __slots__ = ("syscalls", "weights", "probs", "generation", "_index", "_cdf")

    def __init__(self, syscalls: Sequence[str], weights: np.ndarray, generation: int = 0) -> None:
        self.syscalls = tuple(syscalls)
        w = np.array(weights, dtype=np.float64)
        w.setflags(write=False)
        sums = w.sum(axis=1, keepdims=True)
        p = w / sums
        p.setflags(write=False)
        self.weights = w
        self.probs = p
        self.generation = generation
        self._index = {s: i for i, s in enumerate(self.syscalls)}
        self._cdf: list[list[float]] | None = None

    def __len__(self) -> int:
        return len(self.syscalls)

    def index(self, syscall: str) -> int:
        try:
            return self._index[syscall]
        except KeyError:
            raise UnknownSyscall(syscall) from None

    def prob(self, prev: str, nxt: str) -> float:
        return float(self.probs[self.index(prev), self.index(nxt)])

    def cdf_row(self, i: int) -> list[float]:
        if self._cdf is None:
            self._cdf = np.cumsum(self.probs, axis=1).tolist()
        return self._cdf[i]

    def to_json(self) -> dict:
        return {
            "syscalls": list(self.syscalls),
            "weights": self.weights.tolist(),
            "generation": self.generation,
        }

    @classmethod
    def from_json(cls, doc: dict) -> ChoiceTable:
        return init_table(doc["syscalls"], doc["weights"], generation=doc.get("generation", 0))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def init_table(
    syscalls: Sequence[str], weights: Sequence[Sequence[float]] | np.ndarray | None = None,
    generation: int = 0,
) -> ChoiceTable:
    """Uniform table when ``weights`` is None, otherwise validate and normalize them."""
    syscalls = list(syscalls)
    if not syscalls:
        raise EmptySyscallSet("a choice table needs at least one syscall")
    if len(set(syscalls)) != len(syscalls):
        raise ValueError("syscalls must be unique")
    n = len(syscalls)
    if weights is None:
        return ChoiceTable(syscalls, np.ones((n, n)), generation)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (n, n):
        raise ValueError(f"weights must be {n}x{n}, got {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    if np.any(w < 0):
        raise NegativeWeight("choice table weights must be non-negative")
    zero = np.flatnonzero(w.sum(axis=1) <= 0)
    if zero.size:
        raise ZeroRow(f"row {syscalls[zero[0]]!r} has zero total weight")
    return ChoiceTable(syscalls, w, generation)


def apply_guidance(t: ChoiceTable, g: Guidance | Iterable[str]) -> ChoiceTable:
    """Add 1 to every weight whose row or column syscall is in ``s_inc``.

    Returns a fresh table with generation + 1; ``t`` is left untouched.
    """
    s_inc = g.s_inc if isinstance(g, Guidance) else frozenset(g)
    mask = np.zeros(len(t), dtype=bool)
    for name in s_inc:
        mask[t.index(name)] = True
    boost = mask[:, None] | mask[None, :]
    return ChoiceTable(t.syscalls, t.weights + boost, t.generation + 1)


def sample_next(
    t: ChoiceTable,
    prev: str | None,
    rng: random.Random,
    random_prob: float = RANDOM_INSERT_PROB,
) -> str:
    """Draw the syscall to emit after ``prev``.

    Uniform when there is no context or with probability ``random_prob``;
    otherwise inverse-CDF over ``probs[prev]``.
    """
    n = len(t.syscalls)
    if prev is None or rng.random() < random_prob:
        return t.syscalls[rng.randrange(n)]
    cdf = t.cdf_row(t.index(prev))
    u = rng.random() * cdf[-1]
    return t.syscalls[min(bisect.bisect_right(cdf, u), n - 1)]
