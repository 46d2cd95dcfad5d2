"""Exception hierarchy.

``DataError`` subclasses describe bad inputs (CLI exit code 2),
``NumericalError`` subclasses describe numerical failures (exit code 3).
"""


class HDQTestError(Exception):
    pass


class DataError(HDQTestError, ValueError):
    pass


class NumericalError(HDQTestError, ArithmeticError):
    pass


class TauOutOfRange(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class TooFewRows(DataError):
    pass


class DimensionTooSmall(DataError):
    pass


class SparsityOutOfRange(DataError):
    pass


class DegeneratePValue(DataError):
    pass


class MissingColumn(DataError):
    def __init__(self, name):
        super().__init__(f"column {name!r} not found in file")
        self.name = name


class BadValue(DataError):
    def __init__(self, row, column, bad_rows=None):
        msg = f"non-numeric or missing value at row {row}, column {column!r}"
        if bad_rows and len(bad_rows) > 1:
            msg += f" (rows with bad values: {', '.join(map(str, bad_rows))})"
        super().__init__(msg)
        self.row = row
        self.column = column
        self.bad_rows = list(bad_rows or [row])


class EmptyAfterFiltering(DataError):
    pass


class SubsampleTooLarge(DataError):
    pass


class InconsistentConfigs(DataError):
    pass


class NotSymmetric(NumericalError):
    pass


class NotPSD(NumericalError):
    pass


class RankDeficientZ(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class NonpositiveTrace(NumericalError):
    pass


class AllColumnsDegenerate(NumericalError):
    pass


class AllReplicationsFailed(NumericalError):
    pass
