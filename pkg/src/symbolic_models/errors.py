"""Exception hierarchy shared by every module of the package."""


class SymbolicModelError(Exception):
    """Base class for all errors raised by this package."""

    kind = "error"

    def to_dict(self):
        return {"error": self.kind, "message": str(self)}


class ExprSyntaxError(SymbolicModelError):
    """Malformed expression text. ``offset`` is a UTF-8 byte offset."""

    kind = "syntax_error"

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset

    def to_dict(self):
        d = super().to_dict()
        d["offset"] = self.offset
        return d


class UnknownFunctionError(ExprSyntaxError):
    kind = "unknown_function"


class UnknownVariableError(ExprSyntaxError):
    kind = "unknown_variable"


class BindError(SymbolicModelError):
    """Expression references a variable outside the declared dimensions."""

    kind = "bind_error"


class ExprDomainError(SymbolicModelError):
    """Evaluation produced a non-finite value."""

    kind = "domain_error"

    def __init__(self, subexpr):
        super().__init__(f"non-finite value in sub-expression {subexpr!r}")
        self.subexpr = subexpr


class ArgumentError(SymbolicModelError, ValueError):
    kind = "argument_error"


class CertificateError(SymbolicModelError):
    kind = "certificate_error"


class SuggestionError(SymbolicModelError):
    kind = "suggestion_error"

    def __init__(self, message, min_tau=None):
        super().__init__(message)
        self.min_tau = min_tau

    def to_dict(self):
        d = super().to_dict()
        d["min_tau"] = self.min_tau
        return d


class DivergenceError(SymbolicModelError):
    """Integration hit a non-finite state.

    ``step`` is the RK4 sub-step index, ``index`` the first offending row of a
    batched integration (None for single trajectories).
    """

    kind = "divergence"

    def __init__(self, step, index=None, detail=""):
        msg = f"integration diverged at step {step}"
        if index is not None:
            msg += f" (batch row {index})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.step = step
        self.index = index

    def to_dict(self):
        d = super().to_dict()
        d["step"] = self.step
        return d


class ConditionViolatedError(SymbolicModelError):
    kind = "condition_violated"


class EmptyLatticeError(SymbolicModelError):
    kind = "empty_lattice"


class SynthesisError(SymbolicModelError):
    kind = "synthesis_error"

    def __init__(self, message, leg=None):
        super().__init__(message)
        self.leg = leg

    def to_dict(self):
        d = super().to_dict()
        d["leg"] = self.leg
        return d


class PreconditionError(SymbolicModelError):
    kind = "precondition"


class ConfigError(SymbolicModelError):
    kind = "config_error"
