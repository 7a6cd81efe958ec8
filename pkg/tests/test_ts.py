import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symbolic_models import io
from symbolic_models.errors import ArgumentError
from symbolic_models.ts import (
    ApproxRelation,
    TransitionSystem,
    greatest_bisim,
    greatest_sim,
    is_bisimilar,
    relation_violations,
    successors,
)


def ts(outputs, edges, labels=1):
    """Scalar-output system; ``edges`` are (q, p) with label 0 or (q, l, p)."""
    tr = [e if len(e) == 3 else (e[0], 0, e[1]) for e in edges]
    return TransitionSystem(np.reshape(outputs, (-1, 1)), np.arange(labels).reshape(-1, 1), tr)


def naive_greatest(T1, T2, eps, both):
    """Full rescan until nothing changes: the textbook greatest fixed point."""
    R = {
        (a, b)
        for a in range(T1.num_states)
        for b in range(T2.num_states)
        if np.abs(T1.outputs[a] - T2.outputs[b]).max() <= eps
    }
    changed = True
    while changed:
        changed = False
        for a, b in sorted(R):
            ok = all(any((p1, p2) in R for p2 in T2.post(b)) for p1 in T1.post(a))
            if both:
                ok = ok and all(any((p1, p2) in R for p1 in T1.post(a)) for p2 in T2.post(b))
            if not ok:
                R.discard((a, b))
                changed = True
    return frozenset(R)


def random_ts(rng, n=10, labels=2, density=0.15, dim=1):
    outputs = rng.uniform(0, 1, (n, dim))
    tr = [(q, l, p) for q in range(n) for l in range(labels) for p in range(n) if rng.random() < density]
    return TransitionSystem(outputs, np.arange(labels).reshape(-1, 1), tr)


class TestTransitionSystem:
    def test_successors(self):
        T = ts([0.0], [(0, 0)])
        assert successors(T, 0, 0) == {0}
        T = ts([0, 1, 2], [(0, 0, 1), (0, 0, 2), (0, 1, 2)], labels=3)
        assert T.successors(0, 0) == {1, 2}
        assert T.successors(0, 2) == frozenset()
        assert T.successors(2, 0) == frozenset()
        assert list(T.enabled_labels(0)) == [0, 1]
        assert T.post(0) == {1, 2} and T.pre(2) == {0}

    def test_dedup_and_order(self):
        T = ts([0, 1], [(1, 0), (0, 1), (1, 0)])
        assert T.transitions.tolist() == [[0, 0, 1], [1, 0, 0]]
        assert not T.transitions.flags.writeable

    def test_invalid_indices(self):
        with pytest.raises(ArgumentError):
            ts([0, 1], [(0, 2)])
        with pytest.raises(ArgumentError):
            ts([0, 1], [(0, 3, 1)])

    def test_json_round_trip(self):
        rng = np.random.default_rng(3)
        T = random_ts(rng, dim=2)
        T.meta["eta"] = 0.4
        doc = T.to_dict()
        io.validate(doc, io.TS_SCHEMA)
        back = TransitionSystem.from_dict(json.loads(io.dumps(doc)))
        assert back == T
        assert back.meta == T.meta
        assert io.dumps(back.to_dict()) == io.dumps(doc)

    def test_from_dict_rejects_other_formats(self):
        with pytest.raises(ArgumentError):
            TransitionSystem.from_dict({"format": "nope"})

    def test_dot(self):
        T = TransitionSystem([[-0.4, 0.0], [0.0, 0.0]], [[1.5], [-1.5]], [(0, 0, 1), (1, 1, 0)], {"eta": 0.4})
        dot = T.to_dot()
        assert 'q0 [label="(-0.4, 0)", number=1, lattice="-1,0"]' in dot
        assert 'q0 -> q1 [label="1.5"]' in dot
        assert dot.count("->") == 2
        assert "inputs" in ts([0, 1], [(0, 0, 1), (0, 1, 1)], labels=2).to_dot(collapse=True)


class TestRelations:
    def test_single_loops_within_eps(self):
        R = greatest_bisim(ts([0.0], [(0, 0)]), ts([0.4], [(0, 0)]), 0.5)
        assert R.pairs == {(0, 0)}

    def test_pruning_example(self):
        T1 = ts([0, 1], [(0, 1), (1, 1)])
        T2 = ts([0], [(0, 0)])
        assert greatest_bisim(T1, T2, 0.5).pairs == frozenset()
        assert not is_bisimilar(T1, T2, 0.5)
        assert greatest_sim(T1, T2, 0.5).pairs == frozenset()

    def test_reverse_simulation_is_also_empty(self):
        # the only candidate pair (s, a) fails: s -> s must be answered by
        # a -> b, but (s, b) is 1 apart
        T1 = ts([0, 1], [(0, 1), (1, 1)])
        T2 = ts([0], [(0, 0)])
        R = greatest_sim(T2, T1, 0.5)
        assert R.pairs == naive_greatest(T2, T1, 0.5, both=False) == frozenset()

    def test_output_condition_empty(self):
        assert greatest_bisim(ts([0.0], [(0, 0)]), ts([1.0], [(0, 0)]), 0.5).pairs == frozenset()
        assert not is_bisimilar(ts([0.0], [(0, 0)]), ts([2.0], [(0, 0)]), 1.0)

    def test_identical_systems(self):
        T = random_ts(np.random.default_rng(5))
        assert is_bisimilar(T, T, 0.0)

    def test_simulation_chain(self):
        T1 = ts([0, 1], [(0, 1)])
        T2 = ts([0, 1], [(0, 1), (1, 1)])
        assert greatest_sim(T1, T2, 0.0).pairs == {(0, 0), (1, 1)}

    def test_dead_ends_are_vacuous(self):
        assert greatest_bisim(ts([0.0], []), ts([0.1], []), 0.2).pairs == {(0, 0)}

    def test_dimension_mismatch(self):
        with pytest.raises(ArgumentError):
            greatest_bisim(ts([0.0], []), TransitionSystem([[0.0, 0.0]], [[0.0]], []), 1.0)

    def test_relation_json(self):
        R = ApproxRelation(0.5, frozenset({(1, 0), (0, 2)}))
        doc = R.to_dict()
        io.validate(doc, io.RELATION_SCHEMA)
        assert doc["pairs"] == [[0, 2], [1, 0]]
        assert ApproxRelation.from_dict(doc) == R

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0, 0.6), st.booleans())
    def test_matches_naive_fixed_point(self, seed, eps, both):
        rng = np.random.default_rng(seed)
        T1, T2 = random_ts(rng), random_ts(rng, n=8)
        R = greatest_bisim(T1, T2, eps) if both else greatest_sim(T1, T2, eps)
        assert R.pairs == naive_greatest(T1, T2, eps, both)
        assert relation_violations(T1, T2, R.pairs, eps, both) == []

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0, 0.5), st.floats(0, 0.5))
    def test_monotone_in_eps(self, seed, e1, e2):
        e1, e2 = sorted((e1, e2))
        rng = np.random.default_rng(seed)
        T1, T2 = random_ts(rng), random_ts(rng)
        assert greatest_bisim(T1, T2, e1).pairs <= greatest_bisim(T1, T2, e2).pairs

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_diagonal_and_sim_containment(self, seed):
        rng = np.random.default_rng(seed)
        T = random_ts(rng)
        diag = {(q, q) for q in range(T.num_states)}
        assert diag <= greatest_bisim(T, T, 0.0).pairs
        T2 = random_ts(rng)
        assert greatest_bisim(T, T2, 0.3).pairs <= greatest_sim(T, T2, 0.3).pairs

    def test_violation_scan_detects_bad_pairs(self):
        T1 = ts([0, 1], [(0, 1), (1, 1)])
        T2 = ts([0], [(0, 0)])
        assert relation_violations(T1, T2, {(0, 0), (1, 0)}, 0.5) == [((1, 0), "output distance")]
        assert relation_violations(T1, T2, {(0, 0)}, 0.5) == [((0, 0), "unmatched move of first system")]
        assert relation_violations(T2, T1, {(0, 0)}, 0.5, both=False) == [((0, 0), "unmatched move of first system")]

    def test_exhaustive_small(self):
        # every system on 3 states with one label, against a fixed target
        T2 = ts([0.0, 0.5, 1.0], [(0, 1), (1, 2), (2, 2)])
        pairs = list(itertools.product(range(3), repeat=2))
        for mask in range(1 << 9):
            edges = [pairs[i] for i in range(9) if mask >> i & 1]
            T1 = ts([0.0, 0.5, 1.0], edges)
            for eps in (0.0, 0.5):
                assert greatest_bisim(T1, T2, eps).pairs == naive_greatest(T1, T2, eps, True)
