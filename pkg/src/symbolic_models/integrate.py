"""Fixed-step RK4 under piecewise-constant inputs."""

from __future__ import annotations

import numpy as np

from .errors import ArgumentError, DivergenceError
from .sysmodel import ControlSystem

DEFAULT_STEPS = 100
NU_SAFETY = 10.0


def _check(x, step):
    ok = np.isfinite(x)
    if not ok.all():
        if x.ndim > 1:
            bad = int(np.flatnonzero(~ok.all(axis=-1))[0])
            raise DivergenceError(step, bad)
        raise DivergenceError(step)


def flow(sys: ControlSystem, x0, u, tau: float, steps: int = DEFAULT_STEPS, record: int = 0):
    """Integrate ``dx/dt = f(x, u)`` from ``x0`` for time ``tau`` with constant ``u``.

    ``x0`` has shape ``(n,)`` or ``(N, n)``; ``u`` broadcasts against it.  With
    ``record > 0`` the state is also sampled ``record`` times at uniform
    sub-intervals and ``(x_final, samples)`` is returned, ``samples`` having
    shape ``(record + 1, ..., n)`` including ``x0``.
    """
    if steps < 1:
        raise ArgumentError("steps must be >= 1")
    if tau < 0:
        raise ArgumentError("tau must be >= 0")
    x = np.array(x0, dtype=float)
    u = np.asarray(u, dtype=float)
    if u.ndim == 0:
        u = u.reshape(1)
    if record and steps % record:
        raise ArgumentError(f"steps={steps} must be a multiple of record={record}")
    out = [x.copy()] if record else None
    every = steps // record if record else 0
    if tau == 0:
        return (x, np.stack([x] * (record + 1))) if record else x
    h = tau / steps
    f = sys.field_raw
    with np.errstate(all="ignore"):
        for k in range(steps):
            k1 = f(x, u)
            k2 = f(x + (h / 2) * k1, u)
            k3 = f(x + (h / 2) * k2, u)
            k4 = f(x + h * k3, u)
            x = x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            _check(x, k)
            if record and (k + 1) % every == 0:
                out.append(x.copy())
    if record:
        return x, np.stack(out)
    return x


def estimate_nu(sys: ControlSystem, states, labels, tau: float, steps: int = DEFAULT_STEPS) -> float:
    """Advisory integration-error budget from step halving.

    Integrates every (state, label) pair with ``steps`` and ``2*steps`` RK4
    steps; the Richardson estimate of the coarse error is ``16/15`` times their
    difference, and the result is inflated by a safety factor of 10.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    labels = np.atleast_2d(np.asarray(labels, dtype=float))
    if len(states) == 0 or len(labels) == 0:
        raise ArgumentError("need non-empty state and label samples")
    if tau == 0:
        return 0.0
    x0 = np.repeat(states, len(labels), axis=0)
    u = np.tile(labels, (len(states), 1))
    coarse = flow(sys, x0, u, tau, steps)
    fine = flow(sys, x0, u, tau, 2 * steps)
    raw = float(np.abs(coarse - fine).max())
    return NU_SAFETY * raw * 16.0 / 15.0
