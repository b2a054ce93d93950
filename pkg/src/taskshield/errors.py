"""Exception hierarchy shared by every stage of the shielding pipeline."""

from __future__ import annotations


class ShieldError(Exception):
    """Base class. ``stage`` names the pipeline stage that failed."""

    stage = "error"


class InvalidTaskError(ShieldError):
    stage = "validate"

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid task: " + "; ".join(self.violations))


class InapplicableActionError(ShieldError):
    stage = "simulate"


class ReachabilityLimitExceeded(ShieldError):
    """Raised when the verifier cannot decide within its state cap or deadline."""

    stage = "verify-budget"

    def __init__(self, explored, message=None):
        self.explored = explored
        super().__init__(message or f"state cap exceeded after {explored} states; solvability unknown")


class PDDLParseError(ShieldError):
    stage = "parse"

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)


class UnsupportedFeatureError(PDDLParseError):
    def __init__(self, construct, line=None, column=None):
        self.construct = construct
        super().__init__(f"unsupported feature: {construct}", line, column)


class GroundingError(ShieldError):
    stage = "ground"


class TaskSchemaError(ShieldError):
    stage = "parse"

    def __init__(self, pointer, message):
        self.pointer = pointer
        super().__init__(f"{pointer or '/'}: {message}")


class EnumerationBudgetExceeded(ShieldError):
    stage = "enum-budget"

    def __init__(self, partial, message="enumeration budget exceeded"):
        self.partial = partial
        super().__init__(message)


class SolverTimeout(ShieldError):
    """The time budget ran out; ``incumbent`` is the best (non-optimal) result, if any."""

    stage = "ilp-timeout"

    def __init__(self, incumbent=None, stats=None):
        self.incumbent = incumbent
        self.stats = stats
        super().__init__("ILP time budget exhausted" + ("" if incumbent is None else " (incumbent available)"))


class EmptyPlanSetError(ShieldError):
    stage = "model"


class UnshieldableTaskError(ShieldError):
    stage = "unshieldable"

    def __init__(self, message="unshieldable: empty plan solves task"):
        super().__init__(message)


class ModificationRangeError(ShieldError):
    stage = "apply"
