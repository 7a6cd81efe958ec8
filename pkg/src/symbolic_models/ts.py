"""Finite metric transition systems and greatest approximate (bi)simulation relations.

Outputs live in R^n with the infinity-norm metric.  Transition matching in the
relation engine is label-agnostic: a move of one system may be answered by a
move of the other under any label.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ArgumentError

logger = logging.getLogger(__name__)

FORMAT = "transition-system"


class TransitionSystem:
    """States with output vectors, labels with input vectors, and (q, l, p) triples.

    Instances are treated as immutable; the transition array is stored sorted
    by ``(q, l, p)`` without duplicates.
    """

    def __init__(self, outputs, labels, transitions, meta=None):
        self.outputs = np.atleast_2d(np.asarray(outputs, dtype=float))
        if self.outputs.size == 0:
            self.outputs = self.outputs.reshape(0, max(self.outputs.shape[-1], 1))
        labels = np.asarray(labels, dtype=float)
        self.labels = labels.reshape(len(labels), -1) if labels.ndim < 2 else labels
        tr = np.asarray(transitions, dtype=np.int64).reshape(-1, 3)
        nq, nl = len(self.outputs), len(self.labels)
        if len(tr) and (
            tr[:, [0, 2]].min() < 0
            or tr[:, [0, 2]].max() >= nq
            or tr[:, 1].min() < 0
            or tr[:, 1].max() >= nl
        ):
            raise ArgumentError("transition references an invalid state or label index")
        if len(tr):
            tr = np.unique(tr, axis=0)
        self.transitions = tr
        for arr in (self.outputs, self.labels, self.transitions):
            arr.flags.writeable = False
        self.meta = dict(meta or {})
        self._keys = tr[:, 0] * max(nl, 1) + tr[:, 1]
        self._post = None
        self._pre = None

    # -- basic queries ------------------------------------------------------

    @property
    def num_states(self) -> int:
        return len(self.outputs)

    @property
    def num_labels(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.outputs.shape[1]

    def successors(self, q: int, l: int) -> frozenset:
        key = q * max(self.num_labels, 1) + l
        lo, hi = np.searchsorted(self._keys, [key, key + 1])
        return frozenset(int(p) for p in self.transitions[lo:hi, 2])

    def enabled_labels(self, q: int) -> np.ndarray:
        lo, hi = np.searchsorted(self.transitions[:, 0], [q, q + 1])
        return np.unique(self.transitions[lo:hi, 1])

    def post(self, q: int) -> frozenset:
        """Label-agnostic successor set."""
        if self._post is None:
            self._build_adjacency()
        return self._post[q]

    def pre(self, p: int) -> frozenset:
        if self._pre is None:
            self._build_adjacency()
        return self._pre[p]

    def _build_adjacency(self):
        post = [set() for _ in range(self.num_states)]
        pre = [set() for _ in range(self.num_states)]
        pairs = np.unique(self.transitions[:, [0, 2]], axis=0) if len(self.transitions) else []
        for q, p in pairs:
            post[q].add(int(p))
            pre[p].add(int(q))
        self._post = [frozenset(s) for s in post]
        self._pre = [frozenset(s) for s in pre]

    def adjacency(self) -> np.ndarray:
        """Boolean ``A[q, p]``: some label leads from q to p."""
        A = np.zeros((self.num_states, self.num_states), dtype=bool)
        if len(self.transitions):
            A[self.transitions[:, 0], self.transitions[:, 2]] = True
        return A

    def edge_set(self) -> set:
        return {(int(q), int(l), int(p)) for q, l, p in self.transitions}

    def __eq__(self, other):
        if not isinstance(other, TransitionSystem):
            return NotImplemented
        return (
            np.array_equal(self.outputs, other.outputs)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.transitions, other.transitions)
        )

    def __repr__(self):
        return (
            f"TransitionSystem(states={self.num_states}, labels={self.num_labels}, "
            f"transitions={len(self.transitions)})"
        )

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": 1,
            "n": self.dim,
            "m": self.labels.shape[1],
            "outputs": self.outputs.tolist(),
            "labels": self.labels.tolist(),
            "transitions": self.transitions.tolist(),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TransitionSystem":
        if d.get("format") != FORMAT:
            raise ArgumentError(f"not a transition-system document (format={d.get('format')!r})")
        outputs = np.asarray(d["outputs"], dtype=float).reshape(-1, d["n"])
        labels = np.asarray(d["labels"], dtype=float).reshape(-1, d["m"])
        return cls(outputs, labels, d["transitions"], d.get("meta"))

    def to_dot(self, collapse: bool = False, fmt: str = "{:.6g}") -> str:
        """Graphviz text.  Node attributes carry 1-based ``number`` and, when the
        system came from a lattice, the integer lattice coordinates.

        With ``collapse`` one edge is emitted per state pair, labelled with the
        number of inputs and their range.
        """
        step = self.meta.get("eta")
        lines = ["digraph T {", "  node [shape=circle];"]
        for i, y in enumerate(self.outputs):
            coords = ", ".join(fmt.format(v) for v in y)
            attrs = [f'label="({coords})"', f"number={i + 1}"]
            if step:
                k = ",".join(str(int(round(v / step))) for v in y)
                attrs.append(f'lattice="{k}"')
            lines.append(f"  q{i} [{', '.join(attrs)}];")

        def lab(li):
            vals = self.labels[li]
            return fmt.format(vals[0]) if len(vals) == 1 else "(" + ", ".join(fmt.format(v) for v in vals) + ")"

        if collapse:
            pairs = {}
            for q, l, p in self.transitions:
                pairs.setdefault((int(q), int(p)), []).append(int(l))
            for (q, p), ls in sorted(pairs.items()):
                text = lab(ls[0]) if len(ls) == 1 else f"{len(ls)} inputs [{lab(min(ls))} .. {lab(max(ls))}]"
                lines.append(f'  q{q} -> q{p} [label="{text}"];')
        else:
            for q, l, p in self.transitions:
                lines.append(f'  q{q} -> q{p} [label="{lab(l)}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def successors(T: TransitionSystem, q: int, l: int) -> frozenset:
    return T.successors(q, l)


# --- relations ---------------------------------------------------------------


@dataclass(frozen=True)
class ApproxRelation:
    eps: float
    pairs: frozenset

    def to_dict(self):
        return {"eps": self.eps, "pairs": sorted([int(a), int(b)] for a, b in self.pairs)}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["eps"]), frozenset((int(a), int(b)) for a, b in d["pairs"]))

    def __len__(self):
        return len(self.pairs)

    def __contains__(self, pair):
        return tuple(pair) in self.pairs


def _initial(T1, T2, eps):
    if T1.dim != T2.dim:
        raise ArgumentError(f"output dimensions differ: {T1.dim} vs {T2.dim}")
    d = np.abs(T1.outputs[:, None, :] - T2.outputs[None, :, :]).max(axis=-1, initial=0.0)
    return d <= eps


def _prune(T1, T2, eps, both):
    R = _initial(T1, T2, eps)
    A1 = T1.adjacency().astype(np.int64)
    A2 = T2.adjacency().astype(np.int64)
    Ri = R.astype(np.int64)
    # cnt2[p1, q2]: successors p2 of q2 with (p1, p2) in R
    cnt2 = Ri @ A2.T
    # cnt1[q1, p2]: successors p1 of q1 with (p1, p2) in R
    cnt1 = A1 @ Ri
    bad = (A1 @ (cnt2 == 0)) > 0
    if both:
        bad |= ((cnt1 == 0).astype(np.int64) @ A2.T) > 0
    queue = deque(zip(*np.nonzero(R & bad)))
    pre1 = [T1.pre(p) for p in range(T1.num_states)]
    pre2 = [T2.pre(p) for p in range(T2.num_states)]
    removed = 0
    while queue:
        a, b = queue.popleft()
        if not R[a, b]:
            continue
        R[a, b] = False
        removed += 1
        for q2 in pre2[b]:
            cnt2[a, q2] -= 1
            if cnt2[a, q2] == 0:
                queue.extend((q1, q2) for q1 in pre1[a] if R[q1, q2])
        if both:
            for q1 in pre1[a]:
                cnt1[q1, b] -= 1
                if cnt1[q1, b] == 0:
                    queue.extend((q1, q2) for q2 in pre2[b] if R[q1, q2])
    logger.debug("relation pruning removed %d pairs", removed)
    pairs = frozenset((int(a), int(b)) for a, b in zip(*np.nonzero(R)))
    return ApproxRelation(float(eps), pairs)


def greatest_bisim(T1: TransitionSystem, T2: TransitionSystem, eps: float) -> ApproxRelation:
    """Largest eps-approximate bisimulation relation between T1 and T2 (possibly empty)."""
    return _prune(T1, T2, eps, both=True)


def greatest_sim(T1: TransitionSystem, T2: TransitionSystem, eps: float) -> ApproxRelation:
    """Largest eps-approximate simulation relation: T1's moves are answered by T2."""
    return _prune(T1, T2, eps, both=False)


def is_bisimilar(T1: TransitionSystem, T2: TransitionSystem, eps: float) -> bool:
    R = greatest_bisim(T1, T2, eps)
    left = {a for a, _ in R.pairs}
    right = {b for _, b in R.pairs}
    return len(left) == T1.num_states and len(right) == T2.num_states


def relation_violations(
    T1: TransitionSystem, T2: TransitionSystem, pairs: Iterable, eps: float, both: bool = True
) -> list:
    """Direct re-scan of the relation conditions; returns ``(pair, reason)`` tuples."""
    pairs = set(map(tuple, pairs))
    out = []
    for a, b in sorted(pairs):
        if np.abs(T1.outputs[a] - T2.outputs[b]).max() > eps:
            out.append(((a, b), "output distance"))
            continue
        if any(not any((p1, p2) in pairs for p2 in T2.post(b)) for p1 in T1.post(a)):
            out.append(((a, b), "unmatched move of first system"))
            continue
        if both and any(not any((p1, p2) in pairs for p1 in T1.post(a)) for p2 in T2.post(b)):
            out.append(((a, b), "unmatched move of second system"))
    return out
