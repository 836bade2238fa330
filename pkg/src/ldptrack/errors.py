"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Derived protocol parameters are inconsistent or outside the supported regime."""


class CapacityError(ValueError):
    """Requested exact enumeration exceeds the supported problem size."""


class ProtocolError(RuntimeError):
    """Client or server was driven outside the protocol's state machine."""


class SparsityError(ProtocolError):
    """Input stream produced more non-zero partial sums than its declared bound."""
