"""Finite symbolic models of sampled-data systems and an empirical relation check.

States are the eta-lattice of the working box X, labels the mu-lattice of the
input box U.  From state q under label l the sampled flow x~(tau, q, l) is
computed with RK4 and every lattice state p of X with
``||p - x~||_inf <= eta/2 - nu`` becomes a successor.  Candidates outside X
are dropped; when none remain the label is blocking at q.
"""

from __future__ import annotations

import itertools
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    ArgumentError,
    ConditionViolatedError,
    DivergenceError,
    EmptyLatticeError,
)
from .integrate import DEFAULT_STEPS, flow
from .lattice import REL_TOL, AbstractionParams, check_iss_condition, lattice_indices, lattice_points
from .sysmodel import ControlSystem, StabilityCertificate
from .ts import TransitionSystem

logger = logging.getLogger(__name__)

CHUNK = 1 << 16


def _successor_triples(xt, q_idx, l_idx, ranges, eta, radius):
    """Lattice successors of a batch of flow end points, as (q, l, p) rows."""
    n = xt.shape[1]
    kmin = np.array([a for a, _ in ranges])
    kmax = np.array([b for _, b in ranges])
    sizes = kmax - kmin + 1
    strides = np.array([int(np.prod(sizes[i + 1 :])) for i in range(n)])
    lo = np.ceil((xt - radius) / eta - REL_TOL).astype(np.int64)
    hi = np.floor((xt + radius) / eta + REL_TOL).astype(np.int64)
    rows = []
    for off in itertools.product((0, 1), repeat=n):
        k = lo + np.array(off)
        ok = np.all((k <= hi) & (k >= kmin) & (k <= kmax), axis=1)
        if not ok.any():
            continue
        p = ((k[ok] - kmin) * strides).sum(axis=1)
        rows.append(np.stack([q_idx[ok], l_idx[ok], p], axis=1))
    if not rows:
        return np.empty((0, 3), dtype=np.int64)
    return np.concatenate(rows)


def _flow_chunks(sys, states, labels, tau, steps, threads):
    """Yield ``(q_idx, l_idx, x~)`` over all (state, label) pairs in index order.

    Chunks are integrated on a thread pool; ``map`` keeps the output order
    fixed so results do not depend on scheduling.
    """
    total = len(states) * len(labels)
    M = len(labels)

    def work(s):
        idx = np.arange(s, min(s + CHUNK, total))
        q_idx, l_idx = idx // M, idx % M
        try:
            xt = flow(sys, states[q_idx], labels[l_idx], tau, steps)
        except DivergenceError as err:
            q, l = int(q_idx[err.index or 0]), int(l_idx[err.index or 0])
            raise DivergenceError(
                err.step, None, f"state {states[q].tolist()} under input {labels[l].tolist()}"
            ) from err
        return q_idx, l_idx, xt

    starts = range(0, total, CHUNK)
    workers = threads or os.cpu_count() or 1
    if workers == 1 or len(starts) == 1:
        yield from map(work, starts)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(work, starts)


def sampled_flows(sys: ControlSystem, states, labels, tau, steps=DEFAULT_STEPS, threads=None):
    """End points ``x~(tau, q, l)`` for all pairs, shape ``(len(states) * len(labels), n)``."""
    parts = [xt for _, _, xt in _flow_chunks(sys, states, labels, tau, steps, threads)]
    return np.concatenate(parts) if parts else np.empty((0, sys.n))


def build(
    sys: ControlSystem,
    cert: Optional[StabilityCertificate],
    p: AbstractionParams,
    steps: int = DEFAULT_STEPS,
    unsafe: bool = False,
    threads: Optional[int] = None,
) -> TransitionSystem:
    """Construct the symbolic model for ``sys`` at parameters ``p``.

    The precision condition is enforced unless ``unsafe`` is set, in which
    case ``cert`` may be None.
    """
    if not unsafe:
        if cert is None:
            raise ConditionViolatedError("no certificate given; pass unsafe=True to build anyway")
        rep = check_iss_condition(cert, p)
        if not rep.holds:
            raise ConditionViolatedError(
                f"precision condition violated: lhs={rep.lhs:.6g} > eps={p.eps:.6g}"
            )
    p.require_buildable()

    t0 = time.perf_counter()
    states = lattice_points(sys.X, p.eta)
    labels = lattice_points(sys.U, p.mu)
    if len(labels) == 0:
        raise EmptyLatticeError(f"input lattice of U with mu={p.mu} is empty")
    if len(states) == 0:
        raise EmptyLatticeError(f"state lattice of X with eta={p.eta} is empty")
    ranges = lattice_indices(sys.X, p.eta)
    t1 = time.perf_counter()
    logger.info("lattice: %d states, %d labels (%.3fs)", len(states), len(labels), t1 - t0)

    radius = p.eta / 2 - p.nu
    chunks = [
        _successor_triples(xt, q_idx, l_idx, ranges, p.eta, radius)
        for q_idx, l_idx, xt in _flow_chunks(sys, states, labels, p.tau, steps, threads)
    ]
    t2 = time.perf_counter()
    logger.info("integrate: %d flows (%.3fs)", len(states) * len(labels), t2 - t1)

    tr = np.concatenate(chunks) if chunks else np.empty((0, 3), dtype=np.int64)
    meta = {
        "tau": p.tau,
        "eta": p.eta,
        "mu": p.mu,
        "eps": p.eps,
        "nu": p.nu,
        "steps": steps,
        "X": sys.X.tolist(),
        "U": sys.U.tolist(),
        "unsafe": bool(unsafe),
    }
    T = TransitionSystem(states, labels, tr, meta)
    logger.info("merge: %d transitions (%.3fs)", len(T.transitions), time.perf_counter() - t2)
    return T


# --- empirical relation check ----------------------------------------------


@dataclass
class VerifyReport:
    passed: bool
    runs: int
    rounds_checked: int
    violation: Optional[dict] = None
    stats: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "passed": self.passed,
            "runs": self.runs,
            "rounds_checked": self.rounds_checked,
            "violation": self.violation,
            "stats": self.stats,
        }


def _subgrid(M, size):
    if size >= M:
        return np.arange(M)
    return np.unique(np.round(np.linspace(0, M - 1, size)).astype(np.int64))


def verify_relation_empirical(
    sys: ControlSystem,
    T2: TransitionSystem,
    p: AbstractionParams,
    init_samples: int = 50,
    horizon: int = 3,
    seed: int = 0,
    label_samples: int = 21,
    steps: int = DEFAULT_STEPS,
) -> VerifyReport:
    """Sample the candidate relation ``||x - q|| <= eps`` along concrete and abstract runs.

    Each uniformly drawn ``x0`` in X is paired with every abstract state within
    eps.  In each of ``horizon`` rounds every run checks:

    * concrete moves: for each sampled input (a sub-grid of the abstract labels
      plus as many uniform draws from U) whose concrete successor stays in X,
      some abstract move of q ends within eps of it;
    * abstract moves: for each sub-grid label, every abstract successor of q is
      within eps of the concrete successor under the same input.

    Runs then advance along a random sub-grid label and abstract successor.
    """
    if init_samples < 1:
        raise ArgumentError("need at least one initial sample")
    p.require_buildable()
    rng = np.random.default_rng(seed)
    eps = p.eps
    out = T2.outputs
    lo, hi = sys.X[:, 0], sys.X[:, 1]
    x0s = rng.uniform(lo, hi, size=(init_samples, sys.n))

    xs, qs, origin = [], [], []
    for i, x0 in enumerate(x0s):
        near = np.flatnonzero(np.abs(out - x0).max(axis=1) <= eps)
        if len(near) == 0:
            return VerifyReport(
                False,
                0,
                0,
                {"condition": "pairing", "x0": x0.tolist(), "detail": "no abstract state within eps"},
            )
        for q in near:
            xs.append(x0)
            qs.append(int(q))
            origin.append(i)
    xs = np.array(xs)
    qs = np.array(qs)
    gaps = np.abs(xs - out[qs]).max(axis=1)
    runs = len(qs)
    alive = np.ones(runs, dtype=bool)
    sub = _subgrid(T2.num_labels, label_samples)
    sub_vals = T2.labels[sub]
    stats = {"concrete_checks": 0, "abstract_checks": 0, "max_distance": 0.0}

    def fail(r, k, cond, dist, label):
        return VerifyReport(
            False,
            runs,
            k,
            {
                "condition": cond,
                "round": k,
                "run": int(r),
                "x0": x0s[origin[r]].tolist(),
                "q0": int(qs0[r]),
                "initial_gap": float(gaps[r]),
                "distance": float(dist),
                "label": np.atleast_1d(label).tolist(),
                "growth_bound": float(np.exp(p.tau * k) * gaps[r]),
            },
            stats,
        )

    qs0 = qs.copy()
    for k in range(1, horizon + 1):
        idx = np.flatnonzero(alive)
        if len(idx) == 0:
            return VerifyReport(True, runs, k - 1, None, stats)
        rand_vals = rng.uniform(sys.U[:, 0], sys.U[:, 1], size=(len(sub), sys.m))
        conc_vals = np.concatenate([sub_vals, rand_vals])
        L = len(conc_vals)
        X0 = np.repeat(xs[idx], L, axis=0)
        Y = flow(sys, X0, np.tile(conc_vals, (len(idx), 1)), p.tau, steps).reshape(len(idx), L, sys.n)
        inX = sys.in_X(Y)
        for j, r in enumerate(idx):
            q = qs[r]
            post = sorted(T2.post(q))
            # abstract moves answered by the same input
            for a, l in enumerate(sub):
                succ = T2.successors(q, int(l))
                if not succ:
                    continue
                d = np.abs(out[sorted(succ)] - Y[j, a]).max(axis=1)
                stats["abstract_checks"] += len(succ)
                stats["max_distance"] = max(stats["max_distance"], float(d.max()))
                if d.max() > eps:
                    return fail(r, k, "abstract move unmatched", d.max(), sub_vals[a])
            # concrete moves answered by some abstract move
            for c in range(L):
                if not inX[j, c]:
                    continue
                stats["concrete_checks"] += 1
                dmin = np.abs(out[post] - Y[j, c]).max(axis=1).min() if post else np.inf
                if dmin > eps:
                    return fail(r, k, "concrete move unmatched", dmin, conc_vals[c])
        # advance along a random abstract move
        for j, r in enumerate(idx):
            q = qs[r]
            choices = [a for a, l in enumerate(sub) if T2.successors(q, int(l))]
            if not choices:
                alive[r] = False
                continue
            a = choices[rng.integers(len(choices))]
            succ = sorted(T2.successors(q, int(sub[a])))
            qs[r] = succ[rng.integers(len(succ))]
            xs[r] = Y[j, a]
            if not sys.in_X(xs[r]):
                alive[r] = False
    return VerifyReport(True, runs, horizon, None, stats)
