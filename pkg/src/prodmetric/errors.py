"""Exception hierarchy.

Two families: :class:`InputError` for anything the caller can fix (bad text,
wrong arity, invalid space), and :class:`EvaluationError` for numeric failures
while evaluating a user-supplied function. The CLI maps them to exit codes 1
and 2 respectively.
"""

from __future__ import annotations


class ProdMetricError(Exception):
    """Base class for all errors raised by this package."""


class InputError(ProdMetricError):
    """Malformed or inconsistent input."""


class ArityError(InputError):
    """Vector length does not match the declared arity."""


class ParseError(InputError):
    """Expression text could not be parsed.

    ``offset`` is a byte offset into the UTF-8 encoded source text.
    """

    def __init__(self, message: str, offset: int, expected: tuple[str, ...] = ()):
        self.offset = offset
        self.expected = tuple(expected)
        if expected:
            message = f"{message} (expected one of: {', '.join(expected)})"
        super().__init__(f"{message} at offset {offset}")


class ExprSyntaxError(ParseError):
    pass


class UnknownIdentifier(ParseError):
    pass


class ExprArityError(ParseError):
    pass


class InvalidCondition(InputError):
    """Semi-triangle condition text or parameters are invalid."""


class InvalidCombiner(InputError):
    pass


class InvalidTriplet(InputError):
    """Zero pattern of a triplet is not a permutation of (0, l, l)."""


class InvalidSpace(InputError):
    """Distance matrix violates the semimetric axioms."""

    def __init__(self, violations):
        self.violations = list(violations)
        shown = "; ".join(str(v) for v in self.violations[:5])
        super().__init__(f"invalid semimetric space: {shown}")


class LabelClash(InputError):
    pass


class TooSmall(InputError):
    pass


class TooLarge(InputError):
    pass


class DegenerateCriterion(InputError):
    pass


class NotAmenableOnThisInstance(ProdMetricError):
    """A product distance vanished between distinct points (or not on the diagonal).

    ``pair`` holds the two offending point labels and ``value`` the distance.
    """

    def __init__(self, pair, value: float):
        self.pair = pair
        self.value = value
        super().__init__(
            f"product distance violates (S1) at {pair[0]!r}, {pair[1]!r}: D = {value!r}"
        )


class EvaluationError(ProdMetricError):
    """Numeric failure (domain error, division by zero, overflow, NaN)."""

    def __init__(self, message: str, span: tuple[int, int] | None = None):
        self.span = span
        if span is not None:
            message = f"{message} [span {span[0]}:{span[1]}]"
        super().__init__(message)


class SamplerUnsupported(ProdMetricError):
    """The triplet sampler cannot handle a non-monotone generator."""


class LatticeInconsistency(ProdMetricError):
    """Internal verdicts contradict the class inclusions; indicates a bug."""
