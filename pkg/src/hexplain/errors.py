"""Exception hierarchy shared across the package.

Everything user-facing derives from HexplainError so the CLI can map
library failures to a single exit code. InternalInvariantError is the
one exception reserved for "this should never happen" self-checks.
"""


class HexplainError(Exception):
    """Base class for all errors raised by this package."""


class MalformedClause(HexplainError):
    """Clause construction rejected (zero literal, duplicate, or tautology)."""


class SatisfiableInput(HexplainError):
    """An operation that requires an unsatisfiable formula got a satisfiable one."""


class EmptySetMember(HexplainError):
    """A hitting-set instance contained an empty set."""


class MalformedInput(HexplainError):
    """A symbolic input violates its task's well-formedness rules."""


class InconsistentDecision(HexplainError):
    """The decision passed to an explainer does not match the task evaluation."""


class UnsupportedMode(HexplainError):
    """The requested explanation mode is not available for this task."""


class DimensionMismatch(HexplainError):
    """Vector/matrix shapes do not chain."""


class EmptyDataset(HexplainError):
    """Training was invoked with no examples."""


class InvalidEpsilon(HexplainError):
    """Robustness radius outside (0, 1]."""


class TooLarge(HexplainError):
    """A brute-force guard was exceeded."""


class PredictionMismatch(HexplainError):
    """The model does not predict the class an explanation was requested for."""


class DegenerateSystem(HexplainError):
    """The sampled regression system is rank-deficient."""


class TooManyFeatures(HexplainError):
    """Exact Shapley enumeration was asked for too many features."""


class BadMagic(HexplainError):
    """An IDX file does not start with the expected magic number."""


class TruncatedFile(HexplainError):
    """An IDX file ended before the declared payload."""


class CountMismatch(HexplainError):
    """Image and label files disagree on the number of items."""


class EmptyInput(HexplainError):
    """A summary was requested over zero reports."""


class SchemaError(HexplainError):
    """A serialized artifact does not match its declared schema."""


class InternalInvariantError(HexplainError):
    """A self-check the package guarantees has failed; indicates a bug."""
