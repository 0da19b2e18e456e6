"""Exception hierarchy shared by all modules."""


class PhaseLatchError(Exception):
    """Base class for every error raised by this package."""


class DegenerateSum(PhaseLatchError):
    """MAJ input phasors cancel to (almost) zero amplitude."""


class MetastablePhase(PhaseLatchError):
    """Phase lies inside the guard band around a decision threshold."""


class AmplitudeTooSmall(PhaseLatchError):
    """Amplitude below epsilon; no phase can be assigned."""


class ConfigInvalid(PhaseLatchError):
    """A circuit or experiment configuration violates its invariants."""


class UnknownComponent(PhaseLatchError):
    pass


class StepUnderflow(PhaseLatchError):
    """Adaptive step fell below the floor."""


class NonFiniteState(PhaseLatchError):
    """NaN or Inf in the state vector."""

    def __init__(self, t, message=None):
        self.t = float(t)
        super().__init__(message or f"non-finite state at t = {self.t:.9g} s")


class WindowOutOfRange(PhaseLatchError):
    pass


class LockNotFound(PhaseLatchError):
    pass


class DegenerateStates(PhaseLatchError):
    pass


class MissingColumns(PhaseLatchError):
    pass


class TooShort(PhaseLatchError):
    pass


class FlipNotInTrace(PhaseLatchError):
    pass


class CyclicNetwork(PhaseLatchError):
    pass


class UnassignedInput(PhaseLatchError):
    pass


class ParseError(PhaseLatchError):
    """Diagnostic with a source location.

    ``kind`` is one of SyntaxError, UnknownKey, MissingRequired, UnitMismatch,
    CombinationalCycle, Undriven, MultipleDrivers, EmptyNetwork.
    """

    def __init__(self, kind, message, line=None, column=None, token=None):
        self.kind = kind
        self.line = line
        self.column = column
        self.token = token
        loc = ""
        if line is not None:
            loc = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        tok = f" (at {token!r})" if token is not None else ""
        super().__init__(f"{kind}: {loc}{message}{tok}")


class LatchContractViolation(PhaseLatchError):
    """Gate-level latch disagrees with its behavioral contract."""
