"""Household problem: implicit upwind finite differences with Howard iteration.

The dynamic programming equation

    rho v(a,z) = H(v_a) + v_a [r a + w(1-tau) z] + L v(a,.)(z)
    v_a(a_min, z) >= u'(r a_min + w(1-tau) z)

is discretized on a truncated wealth grid.  Policy improvement inverts u'
on the upwind one-sided difference; policy evaluation solves one sparse
linear system over all grid nodes and income states jointly.  The state
constraint is imposed exactly by replacing the backward difference at the
bottom node with u'(income flow); the forward difference at the top node
is replaced the same way, consistent with guaranteed dissaving above the
threshold returned by `dissaving_threshold`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import spsolve

from .errors import (
    InvalidRate,
    NonConvergence,
    TruncationTooSmall,
    UnsupportedBorrowingLimit,
    ValidationError,
)
from .model import HouseholdParams, IncomeChain, Utility, WealthGrid

_VA_FLOOR = 1e-12  # clamp on marginal values before inverting u'
_AUTO_DOUBLINGS = 6


@dataclass(frozen=True)
class SolverSettings:
    """Numerical knobs for `solve_household`.

    `a_max="auto"` grows the truncation until every income state dissaves
    at the top node.  `max_iter=0` is allowed and makes the solver raise
    NonConvergence immediately (useful for failure-path tests); successful
    solves need at least one iteration.
    """

    tol: float = 1e-8
    max_iter: int = 300
    n: int = 1000
    a_max: float | str = "auto"
    stretch: float = 1.0

    def __post_init__(self):
        violations = []
        if not self.tol > 0:
            violations.append(f"tol must be > 0, got {self.tol}")
        if self.max_iter < 0:
            violations.append(f"max_iter must be >= 0, got {self.max_iter}")
        if self.n < 50:
            violations.append(f"n must be >= 50, got {self.n}")
        if isinstance(self.a_max, str) and self.a_max != "auto":
            violations.append(f"a_max must be a number or 'auto', got {self.a_max!r}")
        if self.stretch <= 0:
            violations.append(f"stretch must be > 0, got {self.stretch}")
        if violations:
            raise ValidationError(violations)


@dataclass(frozen=True)
class HouseholdSolution:
    """Solved household problem on a truncated grid.

    Arrays are (n_nodes, n_states): value `v`, marginal value `v_a`
    (strictly positive), consumption `c = (u')^{-1}(v_a)` and savings
    drift `s = r a + w(1-tau) z - c`.  `generator` is the sparse
    generator of the optimally controlled state process; its transpose
    drives the stationary Kolmogorov forward solve.
    """

    grid: WealthGrid
    v: np.ndarray = field(repr=False)
    v_a: np.ndarray = field(repr=False)
    c: np.ndarray = field(repr=False)
    s: np.ndarray = field(repr=False)
    iterations: int
    bellman_residual: float
    params: HouseholdParams
    chain: IncomeChain
    utility: Utility
    generator: sp.csr_matrix = field(repr=False)

    def __post_init__(self):
        for name in ("v", "v_a", "c", "s"):
            getattr(self, name).setflags(write=False)

    @property
    def income_flow(self) -> np.ndarray:
        """r a + w(1-tau) z at every node."""
        return (
            self.params.r * self.grid.nodes[:, None]
            + self.params.income(self.chain.states)[None, :]
        )


def _chain_operator(chain: IncomeChain, n: int) -> sp.csr_matrix:
    """Generator of the income chain lifted to the full grid."""
    return sp.kron(sp.identity(n, format="csr"), sp.csr_matrix(chain.generator)).tocsr()


def _improve(v, nodes, steps, flow, utility, c_cap):
    """One policy-improvement sweep: upwind consumption, drift and masks.

    Candidate consumption is capped at a generous linear bound that stays
    slack at any converged solution; without it, transiently non-monotone
    iterates push the clamped marginal value to the floor and the implied
    drift poisons the policy evaluation.
    """
    dv_f = np.empty_like(v)
    dv_f[:-1] = np.diff(v, axis=0) / steps[:, None]
    dv_f[-1] = 1.0  # placeholder, top row never saves
    dv_b = np.empty_like(v)
    dv_b[1:] = np.diff(v, axis=0) / steps[:, None]
    dv_b[0] = utility.u_prime(flow[0])  # state constraint, exact

    dv_f = np.maximum(dv_f, _VA_FLOOR)
    dv_b = np.maximum(dv_b, _VA_FLOOR)

    c_f = np.minimum(utility.u_prime_inv(dv_f), c_cap)
    c_b = np.minimum(utility.u_prime_inv(dv_b), c_cap)
    s_f = flow - c_f
    s_b = flow - c_b
    s_f[-1] = -1.0  # cannot save past the truncation

    fwd = s_f > 0
    bwd = (s_b < 0) & ~fwd
    rest = ~(fwd | bwd)
    # Zero-drift nodes consume the income flow exactly; flow > 0 is
    # guaranteed there because flow <= 0 forces s_b < 0.
    c = np.where(fwd, c_f, np.where(bwd, c_b, np.where(rest, flow, 1.0)))
    s = flow - c
    s[rest] = 0.0
    v_a = utility.u_prime(c)
    adv = np.where(fwd, s_f * dv_f, np.where(bwd, s_b * dv_b, 0.0))
    return c, s, v_a, adv, fwd, bwd


def _advection_operator(s, fwd, bwd, steps) -> sp.csr_matrix:
    """Sparse upwind advection generator for a fixed policy."""
    n, d = s.shape
    up = np.zeros_like(s)
    lo = np.zeros_like(s)
    up[:-1][fwd[:-1]] = (s[:-1] / steps[:, None])[fwd[:-1]]
    lo[1:][bwd[1:]] = (-s[1:] / steps[:, None])[bwd[1:]]
    diag = -(up + lo)
    nd = n * d
    return sp.diags(
        [diag.ravel(), up.ravel()[: nd - d], lo.ravel()[d:]],
        [0, d, -d],
        shape=(nd, nd),
        format="csr",
    )


def _evaluate(c, s, fwd, bwd, steps, chain_op, rho, utility):
    """Exact policy evaluation: solve (rho I - generator) v = u(c)."""
    n, d = c.shape
    gen = _advection_operator(s, fwd, bwd, steps) + chain_op
    lhs = (sp.identity(n * d, format="csr") * rho - gen).tocsc()
    v = spsolve(lhs, utility.u(c).ravel())
    return v.reshape(n, d), gen


def _initial_policy(flow, floor):
    """Zero-savings policy where feasible, floored consumption elsewhere."""
    c = np.maximum(flow, floor)
    s = flow - c
    fwd = np.zeros_like(c, dtype=bool)
    bwd = s < 0
    return c, s, fwd, bwd


def _solve_on_grid(grid, chain, utility, params, settings):
    nodes = grid.nodes
    steps = grid.steps
    income = params.income(chain.states)
    flow = params.r * nodes[:, None] + income[None, :]
    chain_op = _chain_operator(chain, grid.n)
    rho = params.rho

    c, s, fwd, bwd = _initial_policy(flow, 0.5 * income.min())
    # Slack at any optimum: optimal consumption never exceeds the income
    # flow plus the wealth that could be run down within unit time.
    c_cap = np.maximum(flow, 0.0) + (nodes[:, None] - nodes[0]) + income.max()
    residual = np.inf
    for it in range(1, settings.max_iter + 1):
        v, _ = _evaluate(c, s, fwd, bwd, steps, chain_op, rho, utility)
        if not np.all(np.isfinite(v)):
            raise NonConvergence(it, float("inf"))
        c_new, s_new, v_a, adv, fwd, bwd = _improve(v, nodes, steps, flow, utility, c_cap)
        chain_term = v @ np.asarray(chain.generator).T
        residual = float(
            np.abs(rho * v - utility.u(c_new) - adv - chain_term).max()
        )
        c, s = c_new, s_new
        if residual <= settings.tol:
            gen = _advection_operator(s, fwd, bwd, steps) + chain_op
            return HouseholdSolution(
                grid=grid,
                v=v,
                v_a=v_a,
                c=c,
                s=s,
                iterations=it,
                bellman_residual=residual,
                params=params,
                chain=chain,
                utility=utility,
                generator=gen.tocsr(),
            )
    raise NonConvergence(settings.max_iter, residual)


def _auto_a_start(params, chain) -> float:
    top_income = params.income(chain.states).max()
    return 4.0 * max(1.0, top_income / (params.rho - params.r))


def _build_grid(a_min, a_max, settings) -> WealthGrid:
    if settings.stretch == 1.0:
        return WealthGrid.uniform(a_min, a_max, settings.n)
    return WealthGrid.geometric(a_min, a_max, settings.n, settings.stretch)


def solve_household(
    chain: IncomeChain,
    utility: Utility,
    params: HouseholdParams,
    settings: SolverSettings = SolverSettings(),
) -> HouseholdSolution:
    """Solve the household problem for given prices and policy.

    Requires r < rho.  With `a_max="auto"` the truncation starts at
    4*max(1, top income/(rho-r)) and doubles (at most six times) until the
    top node dissaves in every income state; an explicit truncation that
    fails the dissaving test raises TruncationTooSmall.
    """
    if params.r >= params.rho:
        raise InvalidRate(f"need r < rho, got r={params.r}, rho={params.rho}")
    params.validate_against(chain)

    if isinstance(settings.a_max, str):
        a_hi = max(_auto_a_start(params, chain), params.a_min + 1.0)
        for _ in range(_AUTO_DOUBLINGS + 1):
            sol = _solve_on_grid(
                _build_grid(params.a_min, a_hi, settings),
                chain, utility, params, settings,
            )
            if sol.s[-1].max() < 0:
                return sol
            a_hi *= 2.0
        raise TruncationTooSmall(
            f"top node still accumulates after {_AUTO_DOUBLINGS} doublings "
            f"(a_max={a_hi / 2})"
        )
    sol = _solve_on_grid(
        _build_grid(params.a_min, float(settings.a_max), settings),
        chain, utility, params, settings,
    )
    if sol.s[-1].max() >= 0:
        raise TruncationTooSmall(
            f"savings non-negative at a_max={settings.a_max} in some income state"
        )
    return sol


def drift_tolerance(sol: HouseholdSolution) -> float:
    """Threshold below which a drift counts as zero in diagnostics."""
    return 1e-10 * (1.0 + abs(sol.params.r) * sol.grid.a_max)


def euler_residual(sol: HouseholdSolution) -> np.ndarray:
    """Node-wise residual of (rho - r) v_a - v_aa s - L v_a.

    Central second differences of v in the interior; the product v_aa*s is
    set to zero wherever |s| is below the drift tolerance, matching the
    convention of the continuous-time first-order condition.  At boundary
    nodes with zero drift the returned value is the one-sided inequality
    slack (rho - r) v_a - L v_a, expected to be positive at the lowest
    income state.
    """
    rho, r = sol.params.rho, sol.params.r
    v, v_a, s = sol.v, sol.v_a, sol.s
    steps = sol.grid.steps
    h_lo = steps[:-1][:, None]
    h_hi = steps[1:][:, None]
    v_aa = np.zeros_like(v)
    v_aa[1:-1] = 2.0 * (
        h_lo * v[2:] - (h_lo + h_hi) * v[1:-1] + h_hi * v[:-2]
    ) / (h_lo * h_hi * (h_lo + h_hi))
    v_aa[0] = v_aa[1]
    v_aa[-1] = v_aa[-2]

    prod = np.where(np.abs(s) < drift_tolerance(sol), 0.0, v_aa * s)
    chain_term = v_a @ np.asarray(sol.chain.generator).T
    return (rho - r) * v_a - prod - chain_term


def dissaving_threshold(sol: HouseholdSolution) -> float:
    """Largest grid node where some income state still saves.

    Above the returned level every income state strictly dissaves, which
    bounds the support of the stationary distribution.  Raises
    TruncationTooSmall when the threshold hits the truncation itself.
    """
    holds = np.where(sol.s.max(axis=1) >= 0)[0]
    idx = int(holds[-1]) if holds.size else 0
    if idx == sol.grid.n - 1:
        raise TruncationTooSmall("no dissaving band below a_max")
    return float(sol.grid.nodes[idx])


def scaled_consumption(base: HouseholdSolution, w: float, tau: float) -> HouseholdSolution:
    """Map a (w=1, tau=0) solution to parameters (w, tau) by CRRA scaling.

    c(a, z; w, tau) = w(1-tau) c_base(a / (w(1-tau)), z) on the grid scaled
    by w(1-tau); exact node-wise, no interpolation involved.
    """
    if base.params.a_min != 0.0:
        raise UnsupportedBorrowingLimit("scaling requires a_min = 0")
    if base.params.w != 1.0 or base.params.tau != 0.0:
        raise ValidationError(["base solution must be solved at (w=1, tau=0)"])
    if not (w > 0 and tau < 1):
        raise ValidationError([f"need w > 0 and tau < 1, got w={w}, tau={tau}"])

    kappa = w * (1.0 - tau)
    gamma = base.utility.gamma
    grid = WealthGrid(nodes=base.grid.nodes * kappa, spacing=base.grid.spacing)
    if gamma == 1.0:
        v = base.v + np.log(kappa) / base.params.rho
    else:
        v = kappa ** (1.0 - gamma) * base.v
    params = replace(base.params, w=w, tau=tau)
    return HouseholdSolution(
        grid=grid,
        v=v,
        v_a=base.v_a * kappa**-gamma,
        c=base.c * kappa,
        s=base.s * kappa,
        iterations=base.iterations,
        bellman_residual=base.bellman_residual,
        params=params,
        chain=base.chain,
        utility=base.utility,
        # Advection weights s/da and the chain part are scale invariant,
        # so the generator carries over unchanged.
        generator=base.generator,
    )


@dataclass(frozen=True)
class SimulatedPath:
    """Sampled trajectory of one household."""

    t: np.ndarray = field(repr=False)
    a: np.ndarray = field(repr=False)
    z_index: np.ndarray = field(repr=False)
    c: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("t", "a", "z_index", "c"):
            getattr(self, name).setflags(write=False)


def simulate_path(
    sol: HouseholdSolution,
    a0: float,
    z0: int,
    horizon: float,
    seed: int,
    n_samples: int = 1001,
) -> SimulatedPath:
    """Simulate the piecewise-deterministic optimal wealth path.

    Income jump times are exponential with the chain rates; between jumps
    wealth follows the interpolated drift, integrated with an adaptive
    4th-order Runge-Kutta scheme.  Deterministic for a fixed seed.
    """
    if a0 < sol.grid.a_min:
        raise ValidationError([f"a0 must be >= {sol.grid.a_min}, got {a0}"])
    if horizon <= 0:
        raise ValidationError([f"horizon must be > 0, got {horizon}"])
    nodes = sol.grid.nodes
    rates = sol.chain.rates
    total_rate = rates.sum(axis=1)
    rng = np.random.default_rng(seed)

    t_out = np.linspace(0.0, horizon, n_samples)
    a_out = np.empty(n_samples)
    z_out = np.empty(n_samples, dtype=int)

    t_cur, a_cur, j = 0.0, float(a0), int(z0)
    filled = 0
    while t_cur < horizon:
        t_jump = (
            t_cur + rng.exponential(1.0 / total_rate[j])
            if total_rate[j] > 0
            else np.inf
        )
        t_end = min(t_jump, horizon)
        take = slice(filled, int(np.searchsorted(t_out, t_end, side="right")))
        drift = sol.s[:, j]

        def rhs(_t, y):
            return [np.interp(y[0], nodes, drift)]

        ivp = solve_ivp(
            rhs, (t_cur, t_end), [a_cur],
            method="RK45", dense_output=True,
            rtol=1e-8, atol=1e-10, max_step=1.0,
        )
        if t_out[take].size:
            a_out[take] = np.clip(ivp.sol(t_out[take])[0], nodes[0], nodes[-1])
            z_out[take] = j
            filled = take.stop
        a_cur = float(np.clip(ivp.y[0, -1], nodes[0], nodes[-1]))
        t_cur = t_end
        if t_jump <= horizon:
            probs = rates[j] / total_rate[j]
            j = int(rng.choice(sol.chain.d, p=probs))
    if filled < n_samples:
        a_out[filled:] = a_cur
        z_out[filled:] = j

    c_out = np.empty(n_samples)
    for state in range(sol.chain.d):
        mask = z_out == state
        if mask.any():
            c_out[mask] = np.interp(a_out[mask], nodes, sol.c[:, state])
    return SimulatedPath(t=t_out, a=a_out, z_index=z_out, c=c_out)
