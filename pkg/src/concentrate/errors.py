"""Exception types raised across the package."""


class ConcentrationError(Exception):
    """Base class for every error raised by this package."""


class LabelError(ConcentrationError, ValueError):
    """Duplicate, unknown or colliding qubit labels."""


class CapacityError(ConcentrationError, ValueError):
    """A state would exceed the supported number of qubits."""


class NormalizationError(ConcentrationError, ValueError):
    """Amplitudes are not finite or not normalized."""


class UnsupportedPartitionError(ConcentrationError, ValueError):
    """Requested bipartition is outside what the Schmidt oracle handles."""


class DegenerateInputError(ConcentrationError, ValueError):
    """Input Schmidt pair has nothing to discriminate or concentrate."""


class DimensionError(ConcentrationError, ValueError):
    """Operator dimension does not match the measured qubits."""


class PreconditionError(ConcentrationError, ValueError):
    """State does not satisfy the support a measurement requires."""


class NotProductError(ConcentrationError, ValueError):
    """Qubits asked to be factored out are entangled with the rest."""
