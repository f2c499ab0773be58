"""Exception hierarchy shared by every partlab module."""


class PartlabError(Exception):
    """Base class for all library errors."""


class DomainError(PartlabError, ValueError):
    """A parameter lies outside the domain where the quantity is defined."""


class TruncationError(PartlabError, ValueError):
    """A series is truncated below the order an operation needs."""


class WorkLimitError(PartlabError, RuntimeError):
    """A computation would exceed the configured work or memory budget."""


class InexactSpecError(PartlabError, TypeError):
    """A floating-valued weight spec was handed to an exact pipeline."""


class ReducibleChainError(PartlabError, RuntimeError):
    """The coagulation-fragmentation chain does not connect its state space."""
