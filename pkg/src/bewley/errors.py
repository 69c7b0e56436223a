"""Exception types shared across the solver stack."""


class BewleyError(Exception):
    """Base class for all package errors."""


class ValidationError(BewleyError):
    """Raised at construction time; carries every violated constraint."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NonPositiveState(ValidationError):
    """An endowment level is not strictly positive."""


class ReducibleChain(ValidationError):
    """The income chain has more than one communicating class."""


class NonPositiveMarginal(BewleyError):
    """Marginal value handed to the Hamiltonian is not strictly positive."""


class UnsupportedBorrowingLimit(BewleyError):
    """Operation requires the no-borrowing limit a_min = 0."""


class RateBelowNegDepreciation(BewleyError):
    """Interest rate at or below -delta has no firm-side counterpart."""


class InvalidRate(BewleyError):
    """Household problem is ill-posed for r >= rho."""


class NonConvergence(BewleyError):
    """Policy iteration did not reach the residual tolerance."""

    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"no convergence after {iterations} iterations "
            f"(Bellman residual {residual:.3e})"
        )


class TruncationTooSmall(BewleyError):
    """Wealth grid truncation does not contain the dissaving region."""


class GridMismatch(BewleyError):
    """Two objects expected to share a wealth grid do not."""


class DegenerateNullSpace(BewleyError):
    """Stationary balance equations do not have a one-dimensional kernel."""


class OutOfSweepRange(BewleyError):
    """Requested rate lies outside the tabulated sweep."""


class ScanTooCoarse(BewleyError):
    """Two roots were resolved within a single scan step."""


class ZeroAssetDemand(BewleyError):
    """Fixed-point map tau/A is undefined because A = 0."""


class RootLost(BewleyError):
    """Root continuation failed between consecutive parameter values."""

    def __init__(self, alpha_prev, alpha_next, message=""):
        self.alpha_prev = alpha_prev
        self.alpha_next = alpha_next
        detail = message or "tracked root disappeared"
        super().__init__(f"{detail} between alpha={alpha_prev} and alpha={alpha_next}")


class NonMonetary(BewleyError):
    """Price level undefined: equilibrium has zero real debt."""


class ConfigError(BewleyError):
    """Base class for configuration problems (CLI exit code 2)."""


class ConfigSyntax(ConfigError):
    """Malformed configuration text."""

    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class ConfigDomain(ConfigError):
    """Configuration value outside its admissible domain."""

    def __init__(self, key, reason):
        self.key = key
        self.reason = reason
        super().__init__(f"{key}: {reason}")
