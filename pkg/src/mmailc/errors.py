class MmailcError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(MmailcError, ValueError):
    """Invalid experiment configuration. ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class HorizonError(MmailcError, IndexError):
    pass


class ContractViolation(MmailcError, ValueError):
    """A caller broke an operation's precondition (shapes, missing samples)."""


class InvariantViolation(MmailcError, RuntimeError):
    """A runtime invariant failed. Carries the (k, t, j) coordinates when known."""

    def __init__(self, name, message, k=None, t=None, j=None):
        loc = ", ".join(f"{n}={v}" for n, v in (("k", k), ("t", t), ("j", j)) if v is not None)
        super().__init__(f"{name}: {message}" + (f" at ({loc})" if loc else ""))
        self.name = name
        self.k = k
        self.t = t
        self.j = j
