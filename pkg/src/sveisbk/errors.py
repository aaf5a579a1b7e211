"""Exception types shared across the package."""


class SveisError(Exception):
    """Base class for all errors raised by this package."""


class NonPositiveParameter(SveisError):
    """A model parameter violates its positivity constraint."""

    def __init__(self, name: str, value: float):
        self.name = name
        self.value = value
        super().__init__(f"parameter {name!r} must be positive, got {value!r}")


class DegenerateR0(SveisError):
    """The reproduction number is zero, so R0-derived quantities are undefined."""


class DegenerateStationary(SveisError):
    """delta = 0: the stationary law is a point mass at 0 and cannot be sampled."""


class StepProducedNegative(SveisError):
    """An integrator step drove a compartment below the negativity floor.

    Signals that the step size is too large for the current state; the
    caller should shrink dt rather than clamp.
    """

    def __init__(self, component: str, value: float, time: float | None = None):
        self.component = component
        self.value = value
        self.time = time
        at = f" at t={time:g}" if time is not None else ""
        super().__init__(f"step produced negative {component}={value!r}{at}")


class EmptyFitWindow(SveisError):
    """Too few usable nodes in the requested time window."""


class IncompatibleBinning(SveisError):
    """Two histograms cannot be compared (malformed or non-finite edges)."""


class SchemaError(SveisError):
    """A configuration document violates the config schema."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"config field {path!r}: {message}")
