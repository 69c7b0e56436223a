"""Domain types and closed forms: income chain, CRRA utility, firm side.

Everything here is immutable after construction and safe to share across
threads or processes.  Validation happens eagerly and reports *all*
violated constraints, not just the first.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import (
    NonPositiveMarginal,
    NonPositiveState,
    RateBelowNegDepreciation,
    ReducibleChain,
    UnsupportedBorrowingLimit,
    ValidationError,
)


@dataclass(frozen=True)
class IncomeChain:
    """Finite-state continuous-time Markov chain of endowments.

    `states` are strictly increasing and normalized so that the stationary
    mean equals one.  `rates[i, j]` is the jump intensity from state i to
    state j (diagonal entries are zero); `stationary_law` solves the
    balance equations.
    """

    states: np.ndarray = field(repr=False)
    rates: np.ndarray = field(repr=False)
    stationary_law: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("states", "rates", "stationary_law"):
            getattr(self, name).setflags(write=False)

    @property
    def d(self) -> int:
        return self.states.size

    @property
    def generator(self) -> np.ndarray:
        """d x d generator matrix (zero row sums)."""
        gen = self.rates.copy()
        np.fill_diagonal(gen, 0.0)
        np.fill_diagonal(gen, -gen.sum(axis=1))
        return gen


def _stationary_law(rates: np.ndarray) -> np.ndarray:
    """Solve nu' Q = 0, sum(nu) = 1 by replacing one balance equation."""
    d = rates.shape[0]
    if d == 1:
        return np.ones(1)
    gen = rates.copy()
    np.fill_diagonal(gen, 0.0)
    np.fill_diagonal(gen, -gen.sum(axis=1))
    system = gen.T.copy()
    system[0, :] = 1.0
    rhs = np.zeros(d)
    rhs[0] = 1.0
    nu = np.linalg.solve(system, rhs)
    nu[np.abs(nu) < 1e-15] = 0.0
    return nu / nu.sum()


def build_income_chain(states, rates) -> IncomeChain:
    """Validate a chain, compute its stationary law, normalize the mean to one.

    States are rescaled (dynamics untouched) so that sum(nu * z) == 1.
    Raises NonPositiveState / ReducibleChain / ValidationError with every
    violated constraint listed.
    """
    states = np.asarray(states, dtype=float).ravel().copy()
    rates = np.atleast_2d(np.asarray(rates, dtype=float)).copy()
    d = states.size

    violations = []
    if np.any(states <= 0):
        raise NonPositiveState([f"states must be > 0, got {states[states <= 0]}"])
    if np.any(np.diff(states) <= 0):
        violations.append("states must be strictly increasing")
    if rates.shape != (d, d):
        violations.append(f"rates must be {d}x{d}, got {rates.shape}")
    else:
        off = rates.copy()
        np.fill_diagonal(off, 0.0)
        if np.any(off < 0) or not np.all(np.isfinite(off)):
            violations.append("off-diagonal rates must be finite and >= 0")
    if violations:
        raise ValidationError(violations)

    np.fill_diagonal(rates, 0.0)
    if d > 1:
        n_comp, _ = connected_components(
            sp.csr_matrix(rates > 0), directed=True, connection="strong"
        )
        if n_comp != 1:
            raise ReducibleChain(
                [f"chain has {n_comp} communicating classes, expected 1"]
            )

    nu = _stationary_law(rates)
    mean = float(nu @ states)
    states = states / mean
    return IncomeChain(states=states, rates=rates, stationary_law=nu)


@dataclass(frozen=True)
class Utility:
    """CRRA utility: power with relative risk aversion gamma, log at gamma=1.

    The logarithmic branch is explicit, not a gamma->1 limit of the power
    form, which would cancel catastrophically near gamma=1.
    """

    gamma: float

    def __post_init__(self):
        if not (self.gamma > 0 and np.isfinite(self.gamma)):
            raise ValidationError([f"gamma must be > 0, got {self.gamma}"])

    @property
    def kind(self) -> str:
        return "log" if self.gamma == 1.0 else "power"

    def u(self, c):
        c = np.asarray(c, dtype=float)
        if self.gamma == 1.0:
            return np.log(c)
        return c ** (1.0 - self.gamma) / (1.0 - self.gamma)

    def u_prime(self, c):
        c = np.asarray(c, dtype=float)
        return c ** -self.gamma

    def u_prime_inv(self, p):
        p = np.asarray(p, dtype=float)
        return p ** (-1.0 / self.gamma)

    def u_second(self, c):
        c = np.asarray(c, dtype=float)
        return -self.gamma * c ** (-self.gamma - 1.0)


def hamiltonian(utility: Utility, p):
    """Return (H(p), maximizing consumption) for H(p) = sup_c u(c) - c p.

    Closed form under CRRA: H = gamma/(1-gamma) * p^((gamma-1)/gamma) for
    gamma != 1 and H = -log(p) - 1 at gamma = 1; the maximizer is
    p^(-1/gamma) in both branches.
    """
    p_arr = np.asarray(p, dtype=float)
    if np.any(p_arr <= 0) or not np.all(np.isfinite(p_arr)):
        raise NonPositiveMarginal(f"marginal value must be > 0, got {p}")
    c = utility.u_prime_inv(p_arr)
    g = utility.gamma
    if g == 1.0:
        h = -np.log(p_arr) - 1.0
    else:
        h = g / (1.0 - g) * p_arr ** ((g - 1.0) / g)
    if np.isscalar(p) or p_arr.ndim == 0:
        return float(h), float(c)
    return h, c


@dataclass(frozen=True)
class HouseholdParams:
    """Prices and policy faced by a single household."""

    rho: float
    r: float
    w: float = 1.0
    tau: float = 0.0
    a_min: float = 0.0

    def __post_init__(self):
        violations = []
        if not self.rho > 0:
            violations.append(f"rho must be > 0, got {self.rho}")
        if not self.w > 0:
            violations.append(f"w must be > 0, got {self.w}")
        if not self.tau < 1:
            violations.append(f"tau must be < 1, got {self.tau}")
        if self.a_min > 0:
            violations.append(f"a_min must be <= 0, got {self.a_min}")
        if violations:
            raise ValidationError(violations)

    @property
    def net_wage(self) -> float:
        return self.w * (1.0 - self.tau)

    def income(self, states: np.ndarray) -> np.ndarray:
        return self.net_wage * np.asarray(states)

    def validate_against(self, chain: IncomeChain):
        """Checks that need the chain: feasibility at the constraint."""
        violations = []
        z_lo = float(chain.states[0])
        if self.r > 0 and self.a_min < 0 and self.a_min <= -z_lo * self.net_wage / self.r:
            violations.append(
                f"a_min={self.a_min} must exceed -z_min*w*(1-tau)/r for r > 0"
            )
        if self.r * self.a_min + self.net_wage * z_lo <= 0:
            violations.append(
                "infeasible at the constraint: r*a_min + w*(1-tau)*z_min <= 0"
            )
        if violations:
            raise ValidationError(violations)


@dataclass(frozen=True)
class FirmParams:
    """Cobb-Douglas technology: capital elasticity alpha, depreciation delta."""

    alpha: float
    delta: float

    def __post_init__(self):
        violations = []
        if not (0 < self.alpha < 1):
            violations.append(f"alpha must be in (0, 1), got {self.alpha}")
        if not self.delta > 0:
            violations.append(f"delta must be > 0, got {self.delta}")
        if violations:
            raise ValidationError(violations)


def firm_side(firm: FirmParams, r: float) -> tuple[float, float]:
    """Capital and wage consistent with profit maximization at rate r.

    K(r) = (alpha/(r+delta))^(1/(1-alpha)), w(r) = (1-alpha) K(r)^alpha.
    """
    if r <= -firm.delta:
        raise RateBelowNegDepreciation(f"need r > -delta, got r={r}, delta={firm.delta}")
    k = (firm.alpha / (r + firm.delta)) ** (1.0 / (1.0 - firm.alpha))
    w = (1.0 - firm.alpha) * k**firm.alpha
    return k, w


@dataclass(frozen=True)
class WealthGrid:
    """Ordered wealth nodes a_min = a_0 < ... < a_{N-1} = a_max."""

    nodes: np.ndarray = field(repr=False)
    spacing: str = "uniform"

    def __post_init__(self):
        self.nodes.setflags(write=False)
        violations = []
        if self.nodes.size < 50:
            violations.append(f"grid needs >= 50 nodes, got {self.nodes.size}")
        if np.any(np.diff(self.nodes) <= 0):
            violations.append("grid nodes must be strictly increasing")
        if violations:
            raise ValidationError(violations)

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def a_min(self) -> float:
        return float(self.nodes[0])

    @property
    def a_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.nodes)

    @classmethod
    def uniform(cls, a_min: float, a_max: float, n: int) -> "WealthGrid":
        return cls(nodes=np.linspace(a_min, a_max, n), spacing="uniform")

    @classmethod
    def geometric(cls, a_min: float, a_max: float, n: int, stretch: float) -> "WealthGrid":
        """Cell widths grow by `stretch` per cell, clustering nodes at a_min."""
        if stretch <= 0:
            raise ValidationError([f"stretch must be > 0, got {stretch}"])
        if stretch == 1.0:
            return cls.uniform(a_min, a_max, n)
        widths = stretch ** np.arange(n - 1)
        widths *= (a_max - a_min) / widths.sum()
        nodes = np.concatenate(([a_min], a_min + np.cumsum(widths)))
        nodes[-1] = a_max
        return cls(nodes=nodes, spacing="geometric")


@dataclass(frozen=True)
class Economy:
    """Bundle of primitives shared by every household solve: chain, utility,
    discount rate and the borrowing limit."""

    chain: IncomeChain
    utility: Utility
    rho: float
    a_min: float = 0.0

    def __post_init__(self):
        if not self.rho > 0:
            raise ValidationError([f"rho must be > 0, got {self.rho}"])

    def household_params(self, r: float, w: float = 1.0, tau: float = 0.0) -> HouseholdParams:
        params = HouseholdParams(rho=self.rho, r=r, w=w, tau=tau, a_min=self.a_min)
        params.validate_against(self.chain)
        return params


def lower_interest_bound(chain: IncomeChain, utility: Utility, params: HouseholdParams) -> float:
    """Rate below which the stationary law collapses onto the constraint.

    rho - max_z sum_{y != z} lambda(z,y) (u'(w(1-tau)y)/u'(w(1-tau)z) - 1),
    evaluated at the no-borrowing limit a_min = 0, where the bound does not
    depend on the wage or the tax rate under CRRA.
    """
    if params.a_min != 0.0:
        raise UnsupportedBorrowingLimit(
            f"closed form implemented for a_min = 0 only, got {params.a_min}"
        )
    income = params.income(chain.states)
    marg = utility.u_prime(income)
    d = chain.d
    worst = -np.inf
    for j in range(d):
        total = 0.0
        for y in range(d):
            if y != j:
                total += chain.rates[j, y] * (marg[y] / marg[j] - 1.0)
        worst = max(worst, total)
    if d == 1:
        worst = 0.0
    return params.rho - worst
