from __future__ import annotations

import json
import random
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dirfuzz.choice import (
    ChoiceTable,
    Guidance,
    Origin,
    apply_guidance,
    init_table,
    sample_next,
)
from dirfuzz.errors import EmptySyscallSet, NegativeWeight, UnknownSyscall, ZeroRow

S3 = ["c1", "c2", "c3"]


class ForcedRng:
    """Returns scripted values from random(); the rest comes from a seeded Random."""

    def __init__(self, values, seed=0):
        self._values = list(values)
        self._rng = random.Random(seed)

    def random(self):
        return self._values.pop(0) if self._values else self._rng.random()

    def randrange(self, n):
        return self._rng.randrange(n)


def test_uniform_init():
    t = init_table(S3)
    assert np.allclose(t.probs, 1 / 3)
    assert t.generation == 0


def test_provided_row_normalizes():
    t = init_table(S3, [[1, 2, 1], [1, 1, 1], [0, 0, 5]])
    assert t.probs[0].tolist() == [0.25, 0.5, 0.25]
    assert t.probs[2].tolist() == [0.0, 0.0, 1.0]


@pytest.mark.parametrize(
    "syscalls, weights, exc",
    [
        ([], None, EmptySyscallSet),
        (S3, [[1, -1, 1], [1, 1, 1], [1, 1, 1]], NegativeWeight),
        (S3, [[1, 1, 1], [0, 0, 0], [1, 1, 1]], ZeroRow),
        (["a", "a"], None, ValueError),
        (S3, [[1, 1], [1, 1]], ValueError),
        (S3, [[1, 1, float("nan")], [1, 1, 1], [1, 1, 1]], ValueError),
    ],
)
def test_init_errors(syscalls, weights, exc):
    with pytest.raises(exc):
        init_table(syscalls, weights)


def test_guidance_example():
    t = init_table(S3)
    t2 = apply_guidance(t, Guidance(frozenset({"c2"})))
    assert t2.weights[0].tolist() == [1, 2, 1]
    assert np.allclose(t2.probs[0], [0.25, 0.5, 0.25])
    assert t2.weights[1].tolist() == [2, 2, 2]
    assert np.allclose(t2.probs[1], [1 / 3] * 3)
    assert t2.generation == 1
    # input untouched
    assert t.weights.tolist() == [[1.0] * 3] * 3 and t.generation == 0


def test_empty_and_full_guidance():
    t = init_table(S3)
    same = apply_guidance(t, frozenset())
    assert np.array_equal(same.weights, t.weights) and same.generation == 1
    full = apply_guidance(t, set(S3))
    assert np.allclose(full.weights, 2) and np.allclose(full.probs, t.probs)


def test_unknown_in_guidance():
    with pytest.raises(UnknownSyscall):
        apply_guidance(init_table(S3), {"zz"})


def test_tables_are_read_only():
    t = init_table(S3)
    with pytest.raises(ValueError):
        t.weights[0, 0] = 5
    with pytest.raises(ValueError):
        t.probs[0, 0] = 5


def test_compounding_boost():
    t = init_table(S3)
    for r in range(3):
        t = apply_guidance(t, Guidance(frozenset({"c1"}), round=r, origin=Origin.FEEDBACK))
    assert t.weights[2].tolist() == [4, 1, 1]
    assert t.generation == 3


def test_json_snapshot_roundtrip():
    t = apply_guidance(init_table(S3, [[1, 2, 1], [1, 1, 1], [3, 0, 1]]), {"c3"})
    doc = json.loads(t.dumps())
    assert doc == {
        "syscalls": S3,
        "weights": [[1.0, 2.0, 2.0], [1.0, 1.0, 2.0], [4.0, 1.0, 2.0]],
        "generation": 1,
    }
    back = ChoiceTable.from_json(doc)
    assert back.syscalls == t.syscalls and np.array_equal(back.weights, t.weights)
    assert back.generation == 1


def test_degenerate_row_forced_branch():
    t = init_table(S3, [[0, 1, 0], [1, 1, 1], [1, 1, 1]])
    for u in (0.0, 0.5, 0.999999):
        rng = ForcedRng([0.9, u])  # 0.9 >= 0.05 picks the table branch
        assert sample_next(t, "c1", rng) == "c2"


def test_uniform_branch_is_taken_with_small_draw():
    t = init_table(S3, [[0, 1, 0], [1, 1, 1], [1, 1, 1]])
    seen = Counter(sample_next(t, "c1", ForcedRng([0.01], seed=i)) for i in range(300))
    assert set(seen) == set(S3)


def test_no_context_chi_square():
    names = [f"s{i}" for i in range(10)]
    t = init_table(names, np.diag(np.arange(1, 11)) + 0.0)  # any table: prev=None ignores it
    rng = random.Random(42)
    n = 100_000
    counts = Counter(sample_next(t, None, rng) for _ in range(n))
    exp = n / 10
    chi2 = sum((counts[s] - exp) ** 2 / exp for s in names)
    assert chi2 < 27.88  # 9 dof, p = 0.001


def test_uniform_table_frequencies():
    names = [f"s{i}" for i in range(8)]
    t = init_table(names)
    rng = random.Random(3)
    n = 100_000
    prev = None
    counts = Counter()
    for _ in range(n):
        prev = sample_next(t, prev, rng)
        counts[prev] += 1
    for s in names:
        assert abs(counts[s] / n - 1 / 8) <= 0.02


def test_table_branch_matches_probs():
    t = init_table(S3, [[1, 2, 7], [1, 1, 1], [1, 1, 1]])
    rng = random.Random(11)
    n = 100_000
    counts = Counter(sample_next(t, "c1", rng, random_prob=0.0) for _ in range(n))
    for s, p in zip(S3, (0.1, 0.2, 0.7)):
        assert abs(counts[s] / n - p) <= 0.01


def test_sampling_is_reproducible():
    t = apply_guidance(init_table(S3), {"c2"})
    a = [sample_next(t, "c1", random.Random(5)) for _ in range(50)]
    r1, r2 = random.Random(9), random.Random(9)
    assert a == [sample_next(t, "c1", random.Random(5)) for _ in range(50)]
    assert [sample_next(t, "c3", r1) for _ in range(200)] == [sample_next(t, "c3", r2) for _ in range(200)]


tables = st.integers(1, 8).flatmap(
    lambda n: st.tuples(
        st.just([f"s{i}" for i in range(n)]),
        st.lists(
            st.lists(st.floats(0.01, 100.0), min_size=n, max_size=n), min_size=n, max_size=n
        ),
        st.lists(st.sets(st.sampled_from([f"s{i}" for i in range(n)])), max_size=6),
    )
)


@given(tables)
@settings(max_examples=200, deadline=None)
def test_guidance_laws(spec):
    names, weights, rounds = spec
    t = init_table(names, weights)
    for s_inc in rounds:
        nxt = apply_guidance(t, s_inc)
        assert np.allclose(nxt.probs.sum(axis=1), 1.0, atol=1e-9)
        mask = np.array([n in s_inc for n in names])
        for i in range(len(names)):
            for j in range(len(names)):
                bump = 1.0 if (mask[i] or mask[j]) else 0.0
                assert nxt.weights[i, j] == pytest.approx(t.weights[i, j] + bump)
        # order of s_inc does not matter
        again = apply_guidance(t, sorted(s_inc, reverse=True))
        assert np.array_equal(again.weights, nxt.weights)
        t = nxt
    assert t.generation == len(rounds)
