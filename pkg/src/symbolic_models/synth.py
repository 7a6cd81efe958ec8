"""Reachability controllers on finite transition systems and their refinement.

Nondeterminism is resolved adversarially: a label is usable from q only if
every one of its successors lies in the current winning set.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ArgumentError, PreconditionError, SynthesisError
from .integrate import DEFAULT_STEPS, flow
from .lattice import AbstractionParams
from .sysmodel import ControlSystem
from .ts import TransitionSystem

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SequenceSpec:
    """Visit the target sets ``legs`` in order while staying inside ``safe``."""

    legs: tuple
    safe: Optional[frozenset] = None

    def __post_init__(self):
        if not self.legs:
            raise ArgumentError("a sequence spec needs at least one leg")
        object.__setattr__(self, "legs", tuple(frozenset(int(q) for q in leg) for leg in self.legs))
        if self.safe is not None:
            object.__setattr__(self, "safe", frozenset(int(q) for q in self.safe))

    def validate(self, T: TransitionSystem):
        for i, leg in enumerate(self.legs):
            if not leg:
                raise ArgumentError(f"leg {i} is empty")
            if any(q < 0 or q >= T.num_states for q in leg):
                raise ArgumentError(f"leg {i} references an invalid state index")
        if self.safe is not None and any(q < 0 or q >= T.num_states for q in self.safe):
            raise ArgumentError("safe set references an invalid state index")


@dataclass
class ReachLeg:
    """One solved reachability game: ``policy`` maps state -> label index."""

    target: frozenset
    winning: frozenset
    policy: dict
    rank: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "target": sorted(self.target),
            "winning": sorted(self.winning),
            "policy": {str(q): int(l) for q, l in sorted(self.policy.items())},
            "rank": {str(q): int(r) for q, r in sorted(self.rank.items())},
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            frozenset(d["target"]),
            frozenset(d["winning"]),
            {int(q): int(l) for q, l in d["policy"].items()},
            {int(q): int(r) for q, r in d.get("rank", {}).items()},
        )


@dataclass
class Controller:
    legs: list

    def to_dict(self):
        return {"legs": [leg.to_dict() for leg in self.legs]}

    @classmethod
    def from_dict(cls, d):
        return cls([ReachLeg.from_dict(x) for x in d["legs"]])


@dataclass
class SequencePlan:
    start: int
    labels: list
    waypoints: list
    inputs: np.ndarray
    controller: Controller
    leg_ends: list = field(default_factory=list)

    def to_dict(self):
        return {
            "start": self.start,
            "labels": list(self.labels),
            "waypoints": list(self.waypoints),
            "inputs": np.asarray(self.inputs).tolist(),
            "leg_ends": list(self.leg_ends),
        }


def _group_ok(T: TransitionSystem, W: np.ndarray):
    """Per (q, l) group with at least one transition: (q, l, all successors in W)."""
    tr = T.transitions
    if len(tr) == 0:
        e = np.empty(0, dtype=np.int64)
        return e, e, np.empty(0, dtype=bool)
    keys = T._keys
    starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
    bad = (~W[tr[:, 2]]).astype(np.int64)
    nbad = np.add.reduceat(bad, starts)
    return tr[starts, 0], tr[starts, 1], nbad == 0


def _mask(T, states):
    W = np.zeros(T.num_states, dtype=bool)
    W[list(states)] = True
    return W


def controllable_pre(T: TransitionSystem, W) -> frozenset:
    """States with some label whose (non-empty) successor set lies inside ``W``."""
    q, _, ok = _group_ok(T, _mask(T, W))
    return frozenset(int(s) for s in np.unique(q[ok]))


def solve_reach(T: TransitionSystem, target, safe=None) -> ReachLeg:
    """Backward fixed point ``W_{k+1} = W_k | (cpre(W_k) & safe)``.

    Each newly won state keeps the smallest label index that works at the round
    it is first included, so ranks strictly decrease along controlled moves.
    """
    target = frozenset(int(q) for q in target)
    safe_mask = np.ones(T.num_states, dtype=bool) if safe is None else _mask(T, safe)
    if not all(safe_mask[q] for q in target):
        raise ArgumentError("target must be contained in the safe set")
    W = _mask(T, target)
    policy, rank = {}, {q: 0 for q in target}
    k = 0
    while True:
        k += 1
        qs, ls, ok = _group_ok(T, W)
        sel = ok & ~W[qs] & safe_mask[qs]
        # groups are sorted by (q, l): the first hit per state has the smallest label
        uq, first = np.unique(qs[sel], return_index=True)
        if len(uq) == 0:
            break
        new = dict(zip(uq.tolist(), ls[sel][first].tolist()))
        for q, l in new.items():
            W[q] = True
            policy[q] = l
            rank[q] = k
    winning = frozenset(int(q) for q in np.flatnonzero(W))
    logger.debug("reach %s: %d winning states after %d rounds", sorted(target), len(winning), k - 1)
    return ReachLeg(target, winning, policy, rank)


def synth_sequence(T: TransitionSystem, spec: SequenceSpec, start: int) -> SequencePlan:
    """Solve every leg and execute the controllers from ``start``.

    Where a controlled label has several successors, execution follows the
    one with the smallest index; arrival is guaranteed either way.
    """
    spec.validate(T)
    legs = [solve_reach(T, leg, spec.safe) for leg in spec.legs]
    q = int(start)
    labels, waypoints, ends = [], [], []
    for i, leg in enumerate(legs):
        if q not in leg.winning:
            raise SynthesisError(f"leg {i}: state {q} cannot be driven to {sorted(leg.target)}", leg=i)
        guard = 0
        while q not in leg.target:
            l = leg.policy[q]
            succ = T.successors(q, l)
            nxt = min(succ)
            if leg.rank[nxt] >= leg.rank[q] or guard > T.num_states:
                raise SynthesisError(f"leg {i}: controller made no progress at state {q}", leg=i)
            labels.append(l)
            waypoints.append(nxt)
            q = nxt
            guard += 1
        ends.append(len(labels))
    inputs = T.labels[labels] if labels else np.empty((0, T.labels.shape[1]))
    return SequencePlan(int(start), labels, waypoints, inputs, Controller(legs), ends)


# --- refinement to the continuous system -----------------------------------


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray  # one row per sampling interval

    def rows(self):
        """(t, x, u) rows; each sample carries the input applied from it onward."""
        per = (len(self.times) - 1) // max(len(self.inputs), 1) if len(self.inputs) else 1
        for i, (t, x) in enumerate(zip(self.times, self.states)):
            if len(self.inputs):
                u = self.inputs[min(i // per, len(self.inputs) - 1)]
            else:
                u = np.full(0, np.nan)
            yield t, x, u

    def to_csv(self, m: int) -> str:
        n = self.states.shape[1]
        head = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{j + 1}" for j in range(m)]
        lines = [",".join(head)]
        for t, x, u in self.rows():
            vals = [t, *x, *(u if len(u) else [float("nan")] * m)]
            lines.append(",".join(repr(float(v)) for v in vals))
        return "\n".join(lines) + "\n"


@dataclass
class TubeReport:
    eps: float
    distances: list
    waypoints: list
    passed: bool

    @property
    def violations(self):
        return [i + 1 for i, d in enumerate(self.distances) if d > self.eps]

    def to_dict(self):
        return {
            "eps": self.eps,
            "passed": self.passed,
            "distances": [float(d) for d in self.distances],
            "waypoints": [int(w) for w in self.waypoints],
            "violations": self.violations,
        }


def simulate_closed_loop(
    sys: ControlSystem,
    T: TransitionSystem,
    inputs: Sequence,
    x0,
    p: AbstractionParams,
    start: int,
    waypoints: Sequence[int],
    steps: int = DEFAULT_STEPS,
    substeps: int = 10,
):
    """Apply ``inputs`` open loop, each held for tau, and check the eps-tube.

    At instant ``i * tau`` the state is compared with abstract state
    ``waypoints[i-1]``.  Returns ``(Trajectory, TubeReport)``.
    """
    x = np.asarray(x0, dtype=float)
    inputs = np.asarray(inputs, dtype=float).reshape(len(inputs), -1) if len(inputs) else np.empty((0, sys.m))
    if len(inputs) != len(waypoints):
        raise ArgumentError("need one waypoint per input")
    if np.abs(x - T.outputs[start]).max() > p.eps:
        raise PreconditionError(f"x0={x.tolist()} is not within eps={p.eps} of the start state {start}")
    if not np.all(sys.in_U(inputs)):
        raise ArgumentError("an input lies outside U")
    times, states, dists = [0.0], [x.copy()], []
    for i, (u, w) in enumerate(zip(inputs, waypoints)):
        x, samples = flow(sys, x, u, p.tau, steps, record=substeps)
        t0 = i * p.tau
        times.extend(t0 + p.tau * np.arange(1, substeps + 1) / substeps)
        states.extend(samples[1:])
        dists.append(float(np.abs(x - T.outputs[w]).max()))
    report = TubeReport(p.eps, dists, list(waypoints), all(d <= p.eps for d in dists))
    return Trajectory(np.array(times), np.array(states), inputs), report


def simulate_feedback(
    sys: ControlSystem,
    T: TransitionSystem,
    controller: Controller,
    x0,
    p: AbstractionParams,
    steps: int = DEFAULT_STEPS,
    substeps: int = 10,
):
    """Re-quantize the state at each instant and look up the current leg's controller.

    The quantized state is the winning lattice state within eta/2 of x with the
    lowest rank.  After each move the waypoint is the successor of the abstract
    move closest to x, and the leg ends once that waypoint is in its target.
    """
    x = np.asarray(x0, dtype=float)
    times, states, inputs, dists, wps = [0.0], [x.copy()], [], [], []
    leg_i = 0
    limit = T.num_states * len(controller.legs) + 1
    for _ in range(limit):
        if leg_i == len(controller.legs):
            break
        leg = controller.legs[leg_i]
        d = np.abs(T.outputs - x).max(axis=1)
        cands = [int(q) for q in np.flatnonzero(d <= p.eta / 2 * (1 + 1e-12)) if int(q) in leg.winning]
        if not cands:
            raise SynthesisError(f"leg {leg_i}: state {x.tolist()} left the winning set", leg=leg_i)
        q = min(cands, key=lambda s: (leg.rank[s], s))
        if q in leg.target:
            leg_i += 1
            continue
        l = leg.policy[q]
        u = T.labels[l]
        t0 = times[-1]
        x, samples = flow(sys, x, u, p.tau, steps, record=substeps)
        times.extend(t0 + p.tau * np.arange(1, substeps + 1) / substeps)
        states.extend(samples[1:])
        inputs.append(u)
        succ = sorted(T.successors(q, l))
        dd = np.abs(T.outputs[succ] - x).max(axis=1)
        w = succ[int(np.argmin(dd))]
        wps.append(w)
        dists.append(float(dd.min()))
        if w in leg.target:
            leg_i += 1
    else:
        raise SynthesisError("feedback execution did not finish within the step budget")
    report = TubeReport(p.eps, dists, wps, all(d <= p.eps for d in dists))
    traj = Trajectory(np.array(times), np.array(states), np.array(inputs).reshape(-1, sys.m))
    return traj, report
