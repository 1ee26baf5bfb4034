"""Exception types shared across the package."""


class NsfError(Exception):
    """Base class for all package errors."""


class PauliPhaseError(NsfError):
    """A Pauli product came out anti-Hermitian (odd power of i)."""


class MeasurementError(NsfError):
    """Invalid measurement request (contradictory forced outcome, bad observable)."""


class ZeroProbabilityError(MeasurementError):
    """A forced outcome has probability below the zero threshold."""


class FactorError(NsfError):
    """A qubit was expected to factor out of the reference state but does not."""


class FragmentError(NsfError):
    """The requested operation falls outside the supported circuit fragment."""


class BudgetError(NsfError):
    """A term or branch budget would be exceeded."""


class CircuitParseError(NsfError):
    """Circuit text could not be parsed.  Carries 1-based line and column."""

    def __init__(self, message, line, column=None):
        self.line = line
        self.column = column
        where = f"line {line}" if column is None else f"line {line}, column {column}"
        super().__init__(f"{where}: {message}")


class OracleError(NsfError):
    """Dense reference simulation rejected an input (size cap, invalid state)."""
