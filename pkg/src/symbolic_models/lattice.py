"""Quantization lattices and the precision inequalities linking them to stability gains."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, CertificateError, SuggestionError
from .sysmodel import StabilityCertificate, beta_eval, gamma_eval

logger = logging.getLogger(__name__)

REL_TOL = 1e-12


@dataclass(frozen=True)
class AbstractionParams:
    """Sampling time, state/input quantization, target precision, integration-error budget.

    ``eta`` and ``mu`` may be zero so that limit cases of the precision
    conditions can be evaluated, and ``eta/2 >= eps`` is accepted so that a
    failing condition can be reported as such.  Building an abstraction needs
    ``eta, mu > 0`` and ``eta/2 < eps`` (see ``require_buildable``).
    """

    tau: float
    eta: float
    mu: float
    eps: float
    nu: float = 0.0

    def __post_init__(self):
        if not self.tau >= 0:
            raise ArgumentError("tau must be >= 0")
        if not (self.eta >= 0 and self.mu >= 0 and self.eps > 0 and self.nu >= 0):
            raise ArgumentError(f"invalid abstraction parameters: {self}")
        if self.eta > 0 and not self.nu < self.eta / 2:
            raise ArgumentError(f"nu={self.nu} must be below eta/2={self.eta / 2}")

    def require_buildable(self):
        if not (self.eta > 0 and self.mu > 0 and self.tau > 0):
            raise ArgumentError("building needs tau, eta and mu > 0")
        if not self.eta / 2 < self.eps:
            raise ArgumentError(f"eta/2={self.eta / 2} must be below eps={self.eps}")


@dataclass(frozen=True)
class ConditionReport:
    holds: bool
    lhs: float
    slack: float

    def to_dict(self):
        return {"holds": self.holds, "lhs": self.lhs, "slack": self.slack}


def _axis_range(lo, hi, step):
    tol = REL_TOL
    kmin = math.ceil(lo / step - tol)
    kmax = math.floor(hi / step + tol)
    return kmin, kmax


def lattice_indices(box, step: float) -> list[tuple[int, int]]:
    """Per-axis inclusive integer ranges ``(kmin, kmax)`` of the lattice inside ``box``."""
    if not step > 0:
        raise ArgumentError("lattice step must be positive")
    box = np.asarray(box, dtype=float).reshape(-1, 2)
    return [_axis_range(lo, hi, step) for lo, hi in box]


def lattice_points(box, step: float) -> np.ndarray:
    """All points of ``box`` whose coordinates are integer multiples of ``step``.

    Rows are in lexicographic order (first coordinate slowest).  An empty
    lattice is returned as a ``(0, k)`` array and logged as a warning.
    """
    ranges = lattice_indices(box, step)
    axes = [np.arange(a, b + 1) * step for a, b in ranges]
    if any(len(a) == 0 for a in axes):
        logger.warning("empty lattice for box %s with step %g", np.asarray(box).tolist(), step)
        return np.empty((0, len(ranges)))
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def nearest_points(x, step: float) -> np.ndarray:
    """All lattice points within inf-distance ``step/2`` of ``x`` (closed ball).

    Half-step ties on several axes give up to ``2**n`` points, in lexicographic order.
    """
    if not step > 0:
        raise ArgumentError("lattice step must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    per_axis = []
    for xi in x:
        lo = math.ceil(xi / step - 0.5 - REL_TOL)
        hi = math.floor(xi / step + 0.5 + REL_TOL)
        per_axis.append(np.arange(lo, hi + 1) * step)
    mesh = np.meshgrid(*per_axis, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def _report(lhs: float, eps: float) -> ConditionReport:
    holds = lhs <= eps * (1 + REL_TOL)
    return ConditionReport(bool(holds), float(lhs), float(eps - lhs))


def check_iss_condition(cert: StabilityCertificate, p: AbstractionParams) -> ConditionReport:
    """``beta(eps, tau) + gamma(mu) + eta/2 <= eps``."""
    if cert.gamma is None:
        raise CertificateError("the input-quantized condition needs a gamma gain")
    lhs = beta_eval(cert.beta, p.eps, p.tau) + gamma_eval(cert.gamma, p.mu) + p.eta / 2
    return _report(lhs, p.eps)


def check_gas_condition(cert: StabilityCertificate, p: AbstractionParams) -> ConditionReport:
    """``beta(eps, tau) + mu + eta/2 <= eps``."""
    lhs = beta_eval(cert.beta, p.eps, p.tau) + p.mu + p.eta / 2
    return _report(lhs, p.eps)


def min_feasible_tau(cert: StabilityCertificate, eps: float) -> float:
    """Smallest tau with ``beta(eps, tau) <= eps``; 0 when every tau works."""
    b = cert.beta
    arg = b.c * eps ** (b.p - 1)
    return max(0.0, math.log(arg) / b.lam)


def suggest_params(cert: StabilityCertificate, eps: float, tau: float, gas: bool = False) -> AbstractionParams:
    """Split the residual ``eps - beta(eps, tau)`` evenly between ``eta/2`` and the input term."""
    if not eps > 0 or not tau > 0:
        raise ArgumentError("eps and tau must be positive")
    resid = eps - beta_eval(cert.beta, eps, tau)
    if not resid > 0:
        t = min_feasible_tau(cert, eps)
        raise SuggestionError(
            f"no split exists for tau={tau}: beta(eps, tau) >= eps; need tau > {t:.6g}",
            min_tau=t,
        )
    eta = resid
    if gas or cert.gamma is None or cert.gamma.k == 0:
        mu = resid / 2
    else:
        mu = cert.gamma.inverse(resid / 2)
    return AbstractionParams(tau=tau, eta=eta, mu=mu, eps=eps, nu=0.0)
