"""Exception types raised across the package."""


class PilotforgeError(Exception):
    """Base class for all package-specific errors."""


class NotHermitian(PilotforgeError):
    """Input matrix fails the Hermitian symmetry check."""


class NotPSD(PilotforgeError):
    """Hermitian input has an eigenvalue below the PSD tolerance."""


class Singular(PilotforgeError):
    """Linear system is singular or too ill-conditioned to solve."""


class SingularGram(Singular):
    """Received-signal Gram matrix is not invertible (degenerate pilots or combiner)."""


class SingularReducedGram(Singular):
    """Reduced combiner Gram W Q W* is not invertible."""


class SingularB(Singular):
    """Per-cell transmit assembly is not invertible."""


class DimMismatch(PilotforgeError):
    """Operands have inconsistent dimensions."""


class RowDependent(PilotforgeError):
    """Appended row lies in the row space of the existing stack."""


class DictionaryExhausted(PilotforgeError):
    """No dictionary row can extend the greedy combiner further."""


class NoFeasibleRow(PilotforgeError):
    """No dictionary row satisfies the positivity constraint."""


class UnknownPreset(PilotforgeError):
    """Requested scenario preset does not exist."""
