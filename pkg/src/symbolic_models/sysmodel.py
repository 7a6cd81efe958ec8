"""Control systems, incremental stability gains and Lyapunov spot-checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import expm

from . import expr as ex
from .errors import ArgumentError, CertificateError

BOX_TOL = 1e-12
FD_STEP = 1e-6
LYAP_TOL = 1e-7


def _box(bounds, dim, what):
    arr = np.asarray(bounds, dtype=float).reshape(-1, 2)
    if arr.shape != (dim, 2):
        raise ArgumentError(f"{what} must have {dim} [lo, hi] rows, got shape {arr.shape}")
    if not np.all(arr[:, 0] < arr[:, 1]):
        raise ArgumentError(f"{what} is degenerate: {arr.tolist()}")
    return arr


@dataclass(frozen=True)
class ControlSystem:
    """``dx/dt = f(x, u)`` with ``u`` in the box ``U`` and working region ``X``."""

    n: int
    m: int
    f: tuple
    U: np.ndarray
    X: np.ndarray
    source: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if len(self.f) != self.n:
            raise ArgumentError(f"need {self.n} field components, got {len(self.f)}")
        object.__setattr__(self, "U", _box(self.U, self.m, "input box U"))
        object.__setattr__(self, "X", _box(self.X, self.n, "state box X"))
        if not np.all((self.U[:, 0] <= 0) & (self.U[:, 1] >= 0)):
            raise ArgumentError("input box U must contain the origin")
        for comp in self.f:
            if ex.uses_y(comp):
                raise ArgumentError("vector field may not reference y-variables")
            ex.bind(comp, self.n, self.m)

    @classmethod
    def from_strings(cls, f: Sequence[str], U, X):
        U = np.asarray(U, dtype=float).reshape(-1, 2)
        X = np.asarray(X, dtype=float).reshape(-1, 2)
        return cls(len(X), len(U), tuple(ex.parse(s) for s in f), U, X, tuple(f))

    def field_raw(self, x, u):
        """Batched field evaluation, no checks. Shapes ``(..., n)`` and ``(..., m)``."""
        env = {"x": x, "u": u}
        shape = np.broadcast_shapes(np.shape(x)[:-1], np.shape(u)[:-1])
        comps = [np.broadcast_to(ex.evaluate_raw(c, env), shape) for c in self.f]
        return np.stack(comps, axis=-1)

    def in_U(self, u, tol=BOX_TOL):
        u = np.asarray(u, dtype=float)
        return np.all((u >= self.U[:, 0] - tol) & (u <= self.U[:, 1] + tol), axis=-1)

    def in_X(self, x, tol=BOX_TOL):
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.X[:, 0] - tol) & (x <= self.X[:, 1] + tol), axis=-1)


def eval_field(sys: ControlSystem, x, u) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if x.shape[-1] != sys.n or u.shape[-1] != sys.m:
        raise ArgumentError("state/input vector length does not match the system")
    if not np.all(sys.in_U(u)):
        raise ArgumentError(f"input {u.tolist()} outside U = {sys.U.tolist()}")
    out = np.stack([np.broadcast_to(ex.evaluate(c, x, u), x.shape[:-1]) for c in sys.f], -1)
    return out


# --- gains -----------------------------------------------------------------


@dataclass(frozen=True)
class KLGain:
    """beta(r, s) = c * exp(-lam * s) * r**p."""

    c: float
    lam: float
    p: float = 1.0

    def __post_init__(self):
        if not (self.c > 0 and self.lam > 0 and self.p > 0):
            raise ArgumentError(f"KL gain needs c, lambda, p > 0: {self}")

    def __call__(self, r, s):
        return beta_eval(self, r, s)


@dataclass(frozen=True)
class KinfGain:
    """gamma(r) = k * r**p."""

    k: float
    p: float = 1.0

    def __post_init__(self):
        if not (self.k >= 0 and self.p > 0):
            raise ArgumentError(f"K-infinity gain needs k >= 0, p > 0: {self}")

    def __call__(self, r):
        return gamma_eval(self, r)

    def inverse(self, v: float) -> float:
        if self.k == 0:
            raise ArgumentError("zero gain has no inverse")
        return (v / self.k) ** (1.0 / self.p)


@dataclass(frozen=True)
class StabilityCertificate:
    beta: KLGain
    gamma: Optional[KinfGain] = None


def _scalar(v):
    return float(v) if np.ndim(v) == 0 else v


def beta_eval(g: KLGain, r, s):
    if np.any(np.asarray(r) < 0) or np.any(np.asarray(s) < 0):
        raise ArgumentError("beta needs r >= 0 and s >= 0")
    return _scalar(g.c * np.exp(-g.lam * np.asarray(s, dtype=float)) * np.asarray(r, dtype=float) ** g.p)


def gamma_eval(g: KinfGain, r):
    if np.any(np.asarray(r) < 0):
        raise ArgumentError("gamma needs r >= 0")
    return _scalar(g.k * np.asarray(r, dtype=float) ** g.p)


def inf_norm(M) -> float:
    """Induced infinity norm: maximum absolute row sum."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return float(np.abs(M).sum(axis=1).max())


def linear_gains(A, B, s_max: float = 20.0, samples: int = 2001) -> StabilityCertificate:
    """Exponential envelope of ``||exp(A s)||`` and the matching linear input gain.

    The decay rate is the chord slope ``-ln||exp(A s_max)|| / s_max``; ``c`` is
    then the smallest constant dominating the sampled norms.  The input gain is
    ``||B||`` times the trapezoid integral of the norms on ``[0, s_max]`` plus the
    envelope's tail beyond ``s_max``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    if samples < 2 or s_max <= 0:
        raise ArgumentError("need s_max > 0 and at least 2 samples")
    s = np.linspace(0.0, s_max, samples)
    norms = np.array([inf_norm(expm(A * si)) for si in s])
    if not norms[-1] < 1.0:
        raise CertificateError(
            f"A is not Hurwitz on the sampled horizon: ||exp(A*{s_max})|| = {norms[-1]:.6g}"
        )
    lam = -np.log(norms[-1]) / s_max
    c = float(np.max(norms * np.exp(lam * s)))
    integral = np.trapezoid(norms, s) if hasattr(np, "trapezoid") else np.trapz(norms, s)
    tail = c * np.exp(-lam * s_max) / lam
    k = inf_norm(B) * (integral + tail)
    return StabilityCertificate(KLGain(c, float(lam), 1.0), KinfGain(float(k), 1.0))


# --- Lyapunov certificates -------------------------------------------------


@dataclass(frozen=True)
class LyapunovCertificate:
    V: ex.Expression
    alpha1: KinfGain
    alpha2: KinfGain
    rho: KinfGain
    sigma: Optional[KinfGain] = None
    norm2: bool = False


@dataclass
class LyapReport:
    passed: bool
    max_violation: float
    points: int
    worst_point: Optional[dict] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        d = {
            "passed": bool(self.passed),
            "max_violation": float(self.max_violation),
            "points": int(self.points),
            "worst_point": self.worst_point,
        }
        d.update(self.extra)
        return d


def _axis_grid(box, density):
    return [np.linspace(lo, hi, density) for lo, hi in box]


def _grid(boxes, density):
    axes = []
    for box in boxes:
        axes.extend(_axis_grid(box, density))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def _grad(V, x, y, wrt):
    """Central difference gradient of V along x (wrt='x') or y, batched."""
    n = x.shape[-1]
    out = np.empty_like(x)
    for i in range(n):
        e = np.zeros(n)
        e[i] = FD_STEP
        if wrt == "x":
            hi = ex.evaluate(V, x + e, (), y)
            lo = ex.evaluate(V, x - e, (), y)
        else:
            hi = ex.evaluate(V, x, (), y + e)
            lo = ex.evaluate(V, x, (), y - e)
        out[..., i] = (hi - lo) / (2 * FD_STEP)
    return out


def lyap_check_dissipation(sys: ControlSystem, cert: LyapunovCertificate, density: int = 9) -> LyapReport:
    """Sampled check of ``dV/dx f(x,u) + dV/dy f(y,v) <= -rho(|x-y|) + sigma(|u-v|)``.

    The grid is uniform with ``density`` points on every axis of X x X x U x U.
    """
    n, m = sys.n, sys.m
    pts = _grid([sys.X, sys.X, sys.U, sys.U], density)
    x, y = pts[:, :n], pts[:, n : 2 * n]
    u, v = pts[:, 2 * n : 2 * n + m], pts[:, 2 * n + m :]
    vdot = np.sum(_grad(cert.V, x, y, "x") * eval_field(sys, x, u), axis=-1) + np.sum(
        _grad(cert.V, x, y, "y") * eval_field(sys, y, v), axis=-1
    )
    d = x - y
    dist = np.linalg.norm(d, axis=-1) if cert.norm2 else np.abs(d).max(axis=-1)
    bound = -gamma_eval(cert.rho, dist)
    if cert.sigma is not None:
        bound = bound + gamma_eval(cert.sigma, np.abs(u - v).max(axis=-1))
    viol = vdot - bound
    worst = int(np.argmax(viol))
    return LyapReport(
        passed=bool(viol[worst] <= LYAP_TOL),
        max_violation=float(viol[worst]),
        points=len(pts),
        worst_point={
            "x": x[worst].tolist(),
            "y": y[worst].tolist(),
            "u": u[worst].tolist(),
            "v": v[worst].tolist(),
        },
    )


def lyap_check_bounds(sys: ControlSystem, cert: LyapunovCertificate, density: int = 9) -> LyapReport:
    """Sampled check of ``alpha1(|x-y|) <= V(x,y) <= alpha2(|x-y|)`` in the inf-norm.

    Also reports the sampled minimum and maximum of ``V / |x-y|**p`` (p taken
    from alpha1 and alpha2) over pairs with ``x != y``.
    """
    n = sys.n
    pts = _grid([sys.X, sys.X], density)
    x, y = pts[:, :n], pts[:, n:]
    V = np.broadcast_to(ex.evaluate(cert.V, x, (), y), (len(pts),))
    r = np.abs(x - y).max(axis=-1)
    viol = np.maximum(gamma_eval(cert.alpha1, r) - V, V - gamma_eval(cert.alpha2, r))
    worst = int(np.argmax(viol))
    nz = r > 0
    extra = {}
    if np.any(nz):
        extra["min_ratio"] = float(np.min(V[nz] / r[nz] ** cert.alpha1.p))
        extra["max_ratio"] = float(np.max(V[nz] / r[nz] ** cert.alpha2.p))
    return LyapReport(
        passed=bool(viol[worst] <= LYAP_TOL),
        max_violation=float(viol[worst]),
        points=len(pts),
        worst_point={"x": x[worst].tolist(), "y": y[worst].tolist()},
        extra=extra,
    )
