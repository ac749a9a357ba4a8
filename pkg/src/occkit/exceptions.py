"""Exception hierarchy shared by every occkit module."""


class OCCError(Exception):
    """Base class for all occkit errors."""


class ParseError(OCCError, ValueError):
    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class DimensionMismatch(OCCError, ValueError):
    pass


class EmptyDataset(OCCError, ValueError):
    pass


class NoTargetSamples(OCCError, ValueError):
    pass


class DomainError(OCCError, ValueError):
    """A parameter lies outside its mathematical domain."""


class InfeasibleQP(OCCError, ValueError):
    pass


class InfeasibleParams(OCCError, ValueError):
    pass


class SolverDidNotConverge(OCCError, RuntimeWarning):
    """Issued as a warning; the partially optimized model is still returned."""


class ModelDegenerate(OCCError, ValueError):
    pass


class DegenerateNorm(OCCError, ValueError):
    pass


class SchemaVersionError(OCCError, ValueError):
    pass


class LengthMismatch(OCCError, ValueError):
    pass


class SingleClassError(OCCError, ValueError):
    pass


class RangeError(OCCError, ValueError):
    pass


class AllMasked(OCCError, ValueError):
    pass


class NonPositivePixels(OCCError, ValueError):
    pass


class DivergenceDetected(OCCError, RuntimeError):
    pass


class MissingDataset(OCCError, FileNotFoundError):
    pass


class IndexOrderError(ParseError, IndexError):
    """Sparse feature indices are not strictly increasing."""
