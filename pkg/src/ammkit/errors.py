"""Exception hierarchy shared across the package."""


class AmmError(Exception):
    """Base class for all package errors."""


class TopologyError(AmmError):
    """Invalid or disconnected graph."""


class InvalidMatrixError(AmmError):
    """A weight or surrogate matrix violates a structural requirement."""


class ConfigurationError(AmmError):
    """Parameters violate an algorithm precondition."""


class UnsupportedProblemError(ConfigurationError):
    """The engine cannot handle the problem class (e.g. nonzero h for smooth engines)."""


class InnerSolverError(AmmError):
    """An inner iterative solve did not reach its tolerance.

    Attributes
    ----------
    residual : float
        Residual at the returned point.
    node : int or None
        Node whose subproblem failed, if known.
    """

    def __init__(self, message, residual=float("nan"), node=None):
        super().__init__(message)
        self.residual = residual
        self.node = node


class LocalityViolation(AmmError):
    """A node tried to read state it has no channel to."""

    def __init__(self, reader, target, round_index, tag=None):
        msg = f"node {reader} read {tag or 'state'} of non-neighbor {target} in round {round_index}"
        super().__init__(msg)
        self.reader = reader
        self.target = target
        self.round_index = round_index
        self.tag = tag


class CertificateError(AmmError):
    """The linear-rate certificate cannot be established."""


class RegimeError(AmmError):
    """Inputs fall outside the regime where a bound is valid."""


class ConfigError(AmmError):
    """Malformed experiment configuration file.

    Attributes
    ----------
    line : int or None
        1-indexed line of the offending entry, when known.
    field : str or None
        Dotted path of the offending field.
    """

    def __init__(self, message, line=None, field=None):
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.line = line
        self.field = field
