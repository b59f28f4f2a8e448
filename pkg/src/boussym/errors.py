"""Exception hierarchy shared by every module of the package."""


class BoussymError(Exception):
    """Base class for all package errors."""


class ParseError(BoussymError):
    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.text = text
        if text:
            pointer = " " * position + "^"
            message = f"{message} at position {position}\n  {text}\n  {pointer}"
        else:
            message = f"{message} at position {position}"
        super().__init__(message)


class SymbolClassError(ParseError):
    """An identifier does not belong to any known symbol class."""


class ExpansionLimitError(BoussymError):
    """Normalization would exceed the configured node limit."""

    def __init__(self, size: int, limit: int):
        self.size = size
        self.limit = limit
        super().__init__(f"expansion produced {size} terms, limit is {limit}")


class EvalDomainError(BoussymError, ArithmeticError):
    """Numeric evaluation left the real domain (log of x <= 0, even root of x < 0, ...)."""


class UnboundSymbolError(BoussymError, KeyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"no numeric binding for {name!r}")

    def __str__(self) -> str:
        return self.args[0]


class SamplingError(BoussymError):
    """No admissible random sample point was found."""


class JetOrderError(BoussymError):
    """A total derivative would push a jet variable past the maximum order."""


class SeparationError(BoussymError):
    """A similarity ansatz does not separate into t-factor times a z-only ODE."""


class UnresolvedBranchError(BoussymError):
    """Classification branch that needs information we refuse to guess."""


class UnboundParameterError(BoussymError):
    """A candidate generator uses parameters unknown to the system."""


class DomainViolationError(BoussymError):
    """Closed-form evaluation requested outside the region where it is defined."""


class PoleProximityError(DomainViolationError):
    """Weierstrass evaluation too close to a lattice point."""


class BlowUpError(BoussymError):
    """A trajectory escaped to infinity inside the requested interval."""

    def __init__(self, message: str, location: float):
        self.location = location
        super().__init__(message)


class IntegrationError(BoussymError):
    """Adaptive integration failed (step-size underflow, non-finite state, ...)."""

    def __init__(self, message: str, location: float):
        self.location = location
        super().__init__(message)
