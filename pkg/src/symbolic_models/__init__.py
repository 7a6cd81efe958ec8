"""Finite symbolic models of incrementally stable control systems."""

from .abstraction import VerifyReport, build, sampled_flows, verify_relation_empirical
from .errors import (
    ArgumentError,
    BindError,
    CertificateError,
    ConditionViolatedError,
    ConfigError,
    DivergenceError,
    EmptyLatticeError,
    ExprDomainError,
    ExprSyntaxError,
    PreconditionError,
    SuggestionError,
    SymbolicModelError,
    SynthesisError,
    UnknownFunctionError,
    UnknownVariableError,
)
from .integrate import estimate_nu, flow
from .lattice import (
    AbstractionParams,
    ConditionReport,
    check_gas_condition,
    check_iss_condition,
    lattice_points,
    min_feasible_tau,
    nearest_points,
    suggest_params,
)
from .synth import (
    Controller,
    SequencePlan,
    SequenceSpec,
    controllable_pre,
    simulate_closed_loop,
    simulate_feedback,
    solve_reach,
    synth_sequence,
)
from .sysmodel import (
    ControlSystem,
    KinfGain,
    KLGain,
    LyapunovCertificate,
    StabilityCertificate,
    beta_eval,
    eval_field,
    gamma_eval,
    linear_gains,
    lyap_check_bounds,
    lyap_check_dissipation,
)
from .ts import (
    ApproxRelation,
    TransitionSystem,
    greatest_bisim,
    greatest_sim,
    is_bisimilar,
    relation_violations,
)

__version__ = "0.1.0"
