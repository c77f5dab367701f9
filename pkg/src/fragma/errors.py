"""Exception types shared across the package."""


class DataError(ValueError):
    """Malformed or inconsistent input data (CSV, sidecar, dataset invariants)."""


class NumericalError(RuntimeError):
    """A numerical procedure could not produce a usable result."""


class RankDeficientError(NumericalError):
    """Design matrix is rank deficient.

    Parameters
    ----------
    columns : list of str
        Names of the offending (linearly dependent) columns.
    """

    def __init__(self, message, columns=None):
        super().__init__(message)
        self.columns = list(columns) if columns is not None else []
