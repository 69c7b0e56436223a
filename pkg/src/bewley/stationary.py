"""Invariant distribution of the controlled state and aggregate sweeps.

The stationary law is the null vector of the transpose of the exact
discrete generator stored on the household solution.  Because the same
operator drives both the value solve and the forward solve, the
stationarity identity C = r A + w(1-tau) holds to linear-solver precision
with no tuning; `aggregates` checks it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from .errors import DegenerateNullSpace, GridMismatch, NonConvergence, TruncationTooSmall
from .hjb import HouseholdSolution, SolverSettings, solve_household
from .model import Economy, IncomeChain

_MASS_EPS = 1e-12
_RESID_TOL = 1e-9


@dataclass(frozen=True)
class StationaryDistribution:
    """Probability masses over grid nodes x income states.

    Masses, not densities: the atom at the borrowing constraint is mass
    sitting at node 0.
    """

    g: np.ndarray = field(repr=False)
    boundary_mass: float
    support_upper: float

    def __post_init__(self):
        self.g.setflags(write=False)

    def wealth_marginal(self) -> np.ndarray:
        return self.g.sum(axis=1)

    def income_marginal(self) -> np.ndarray:
        return self.g.sum(axis=0)


def _forward_null_vector(adjoint: sp.csr_matrix, nd: int, dt: float = 1e6):
    """Null vector via implicit forward steps g <- (I - dt T)^{-1} g.

    The resolvent damps every non-stationary mode while leaving the
    kernel untouched, and it maps nonnegative vectors to nonnegative
    vectors.  Running it from two different starts flags a kernel of
    dimension > 1: the limits then disagree.
    """
    lhs = (sp.identity(nd, format="csr") - dt * adjoint).tocsc()
    try:
        lu = sp.linalg.splu(lhs)
    except RuntimeError:
        return None
    point = np.zeros(nd)
    point[0] = 1.0
    limits = []
    for g in (np.full(nd, 1.0 / nd), point):
        for _ in range(60):
            g_next = lu.solve(g)
            g_next = np.clip(g_next, 0.0, None)
            total = g_next.sum()
            if not np.isfinite(total) or total <= 0:
                return None
            g_next /= total
            if np.abs(g_next - g).max() < 1e-16:
                g = g_next
                break
            g = g_next
        limits.append(g)
    if np.abs(limits[0] - limits[1]).max() > 1e-8:
        return None
    return limits[0]


def stationary_kfe(sol: HouseholdSolution, chain: IncomeChain | None = None) -> StationaryDistribution:
    """Stationary law from the adjoint of the solution's generator.

    Solves g' T = 0 with T the exact transpose of the policy-evaluation
    operator, pinning the one-dimensional null space by replacing one
    balance equation with the normalization row.  Raises
    DegenerateNullSpace when the kernel is not one-dimensional (broken
    irreducibility or truncation artifacts).
    """
    chain = chain if chain is not None else sol.chain
    n, d = sol.v.shape
    nd = n * d
    adjoint = sol.generator.T.tocsr()

    # Primary path: replace the balance equation at the constraint in the
    # lowest income state (charged under r < rho) by the normalization
    # row.  Deep in the explosion regime that node's mass underflows and
    # the anchored system degenerates; fall back to damped implicit
    # forward iteration, which also detects multi-dimensional kernels.
    scale = max(1.0, np.abs(adjoint.diagonal()).max())
    g = None
    system = adjoint.tolil()
    system[0, :] = 1.0
    rhs = np.zeros(nd)
    rhs[0] = 1.0
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", MatrixRankWarning)
            cand = spsolve(system.tocsc(), rhs)
        if np.all(np.isfinite(cand)) and cand.min() > -1e-9:
            resid = np.abs(adjoint @ cand).max()
            if resid <= _RESID_TOL * scale * max(1.0, np.abs(cand).max()):
                g = cand
    except (MatrixRankWarning, RuntimeError, ValueError):
        pass
    if g is None:
        g = _forward_null_vector(adjoint, nd)
        if g is not None:
            resid = np.abs(adjoint @ g).max()
            if resid > _RESID_TOL * scale * max(1.0, np.abs(g).max()):
                g = None
    if g is None:
        raise DegenerateNullSpace(
            "stationary balance equations have no clean one-dimensional kernel"
        )
    g = np.clip(g, 0.0, None)
    g = (g / g.sum()).reshape(n, d)

    wealth = g.sum(axis=1)
    charged = np.where(wealth > _MASS_EPS)[0]
    support_upper = float(sol.grid.nodes[charged[-1]]) if charged.size else sol.grid.a_min
    return StationaryDistribution(
        g=g,
        boundary_mass=float(g[0].sum()),
        support_upper=support_upper,
    )


def aggregates(g: StationaryDistribution, sol: HouseholdSolution) -> tuple[float, float]:
    """Aggregate asset demand A and consumption C under the stationary law."""
    if g.g.shape != sol.v.shape:
        raise GridMismatch(
            f"distribution shape {g.g.shape} does not match solution {sol.v.shape}"
        )
    a_agg = float((g.g.sum(axis=1) * sol.grid.nodes).sum())
    c_agg = float((g.g * sol.c).sum())
    return a_agg, c_agg


def _bin_to_nodes(a, z, nodes, d, weights=None):
    """Linear (cloud-in-cell) deposit of samples onto grid nodes."""
    n = nodes.size
    idx = np.clip(np.searchsorted(nodes, a, side="right") - 1, 0, n - 2)
    frac = (a - nodes[idx]) / (nodes[idx + 1] - nodes[idx])
    frac = np.clip(frac, 0.0, 1.0)
    w = np.ones_like(a) if weights is None else weights
    flat_lo = idx * d + z
    flat_hi = (idx + 1) * d + z
    out = np.bincount(flat_lo, weights=w * (1.0 - frac), minlength=n * d)
    out += np.bincount(flat_hi, weights=w * frac, minlength=n * d)
    return out.reshape(n, d)


def _rk4_step(a, drift_of, dt):
    k1 = drift_of(a)
    k2 = drift_of(a + 0.5 * dt * k1)
    k3 = drift_of(a + 0.5 * dt * k2)
    k4 = drift_of(a + dt * k3)
    return a + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _make_drift_evaluator(nodes, s_nodes):
    """Vectorized (a, z) -> s lookup over an ensemble.

    Uniform grids take an index-arithmetic shortcut; anything else falls
    back to per-state np.interp.
    """
    n = nodes.size
    steps = np.diff(nodes)
    uniform = np.allclose(steps, steps[0], rtol=1e-12, atol=0.0)
    d = s_nodes.shape[1]
    flat = np.ascontiguousarray(s_nodes).ravel()
    if uniform:
        h = steps[0]
        a0 = nodes[0]

        def evaluate(pos, z):
            rel = np.clip((pos - a0) / h, 0.0, n - 1.000001)
            idx = rel.astype(np.int64)
            frac = rel - idx
            flat_lo = idx * d + z
            return flat[flat_lo] * (1.0 - frac) + flat[flat_lo + d] * frac

        return evaluate

    def evaluate(pos, z):
        out = np.empty_like(pos)
        for state in range(d):
            mask = z == state
            if mask.any():
                out[mask] = np.interp(pos[mask], nodes, s_nodes[:, state])
        return out

    return evaluate


def _simulate_ensemble(
    sol: HouseholdSolution,
    chain: IncomeChain,
    n_paths: int,
    seed: int,
    dt: float,
    snapshot_times=(),
    average_window=None,
    start_wealth: float | None = None,
):
    """Lockstep ensemble simulation of the optimal state process.

    Wealth advances by one RK4 step per dt on the interpolated drift; the
    income state moves with the exact dt-transition matrix expm(Q dt), so
    the chain marginal carries no time-stepping bias.  Returns node-binned
    snapshots at `snapshot_times` and, when `average_window=(t0, t1)` is
    given, the time-averaged node occupation over that window.
    """
    nodes = sol.grid.nodes
    n, d = sol.v.shape
    rng = np.random.default_rng(seed)
    trans = expm(np.asarray(chain.generator) * dt)
    trans_cum = np.cumsum(trans, axis=1)
    trans_cum[:, -1] = 1.0

    a = np.full(n_paths, sol.grid.a_min if start_wealth is None else start_wealth)
    z = rng.choice(d, size=n_paths, p=chain.stationary_law)
    drift = _make_drift_evaluator(nodes, np.asarray(sol.s))

    def drift_of(pos):
        return drift(pos, z)

    t_end = max(
        [t for t in snapshot_times] + ([average_window[1]] if average_window else [0.0])
    )
    n_steps = int(np.ceil(t_end / dt - 1e-12))
    snap_steps = {int(round(t / dt)): t for t in snapshot_times}
    snapshots = {}
    accum = np.zeros((n, d))
    accum_count = 0

    def deposit_snapshots(step, t):
        nonlocal accum_count
        if step in snap_steps:
            snapshots[snap_steps[step]] = _bin_to_nodes(a, z, nodes, d) / n_paths
        if average_window and average_window[0] <= t <= average_window[1] + 1e-12:
            accum[:] += _bin_to_nodes(a, z, nodes, d)
            accum_count += 1

    deposit_snapshots(0, 0.0)
    for step in range(1, n_steps + 1):
        a = np.clip(_rk4_step(a, drift_of, dt), nodes[0], nodes[-1])
        u = rng.random(n_paths)
        z = (trans_cum[z] < u[:, None]).sum(axis=1)
        deposit_snapshots(step, step * dt)

    averaged = accum / max(accum_count, 1) / n_paths if average_window else None
    return snapshots, averaged


def stationary_montecarlo(
    sol: HouseholdSolution,
    n_paths: int,
    burn_in: float,
    horizon: float,
    seed: int,
    dt: float = 0.05,
    chain: IncomeChain | None = None,
) -> StationaryDistribution:
    """Empirical stationary distribution, used only as a simulation oracle.

    Paths start at the constraint with income drawn from the chain's
    stationary law; occupation is time-averaged over
    [burn_in, burn_in + horizon] and binned linearly onto the solver grid.
    Deterministic for a fixed seed.
    """
    if n_paths < 1 or burn_in <= 0 or horizon <= 0:
        raise ValueError("need n_paths >= 1 and positive burn_in, horizon")
    chain = chain if chain is not None else sol.chain
    _, averaged = _simulate_ensemble(
        sol, chain, n_paths, seed, dt,
        average_window=(burn_in, burn_in + horizon),
    )
    g = averaged / averaged.sum()
    wealth = g.sum(axis=1)
    charged = np.where(wealth > _MASS_EPS)[0]
    support_upper = float(sol.grid.nodes[charged[-1]]) if charged.size else sol.grid.a_min
    return StationaryDistribution(
        g=g, boundary_mass=float(g[0].sum()), support_upper=support_upper
    )


def total_variation_wealth(
    p: StationaryDistribution,
    q: StationaryDistribution,
    nodes_p: np.ndarray,
    nodes_q: np.ndarray | None = None,
    n_bins: int = 50,
) -> float:
    """TV distance between wealth marginals, rebinned to n_bins cells."""
    nodes_q = nodes_p if nodes_q is None else nodes_q
    lo = min(nodes_p[0], nodes_q[0])
    hi = max(nodes_p[-1], nodes_q[-1])
    edges = np.linspace(lo, hi + 1e-12, n_bins + 1)
    hist_p = np.zeros(n_bins)
    hist_q = np.zeros(n_bins)
    ip = np.clip(np.searchsorted(edges, nodes_p, side="right") - 1, 0, n_bins - 1)
    iq = np.clip(np.searchsorted(edges, nodes_q, side="right") - 1, 0, n_bins - 1)
    np.add.at(hist_p, ip, p.wealth_marginal())
    np.add.at(hist_q, iq, q.wealth_marginal())
    return 0.5 * float(np.abs(hist_p - hist_q).sum())


@dataclass(frozen=True)
class SweepTable:
    """Rows of (r, A, C, boundary mass, converged flag), sorted by r."""

    r: np.ndarray = field(repr=False)
    A: np.ndarray = field(repr=False)
    C: np.ndarray = field(repr=False)
    boundary_mass: np.ndarray = field(repr=False)
    converged: np.ndarray = field(repr=False)
    w: float = 1.0
    tau: float = 0.0

    def __post_init__(self):
        for name in ("r", "A", "C", "boundary_mass", "converged"):
            getattr(self, name).setflags(write=False)
        if np.any(np.diff(self.r) <= 0):
            raise ValueError("sweep rows must be strictly increasing in r")

    @property
    def n_rows(self) -> int:
        return self.r.size

    def interp_A(self, r: float) -> float:
        """Linear interpolation of A(r), skipping non-converged rows."""
        from .errors import OutOfSweepRange

        ok = np.isfinite(self.A)
        r_ok, a_ok = self.r[ok], self.A[ok]
        if r_ok.size == 0 or not (r_ok[0] <= r <= r_ok[-1]):
            lo = r_ok[0] if r_ok.size else np.nan
            hi = r_ok[-1] if r_ok.size else np.nan
            raise OutOfSweepRange(f"r={r} outside sweep range [{lo}, {hi}]")
        return float(np.interp(r, r_ok, a_ok))


def solve_at_rate(
    economy: Economy,
    r: float,
    settings: SolverSettings = SolverSettings(),
    w: float = 1.0,
    tau: float = 0.0,
) -> tuple[HouseholdSolution, StationaryDistribution, float, float]:
    """One household solve plus forward solve; returns (sol, g, A, C)."""
    params = economy.household_params(r, w=w, tau=tau)
    sol = solve_household(economy.chain, economy.utility, params, settings)
    g = stationary_kfe(sol)
    a_agg, c_agg = aggregates(g, sol)
    return sol, g, a_agg, c_agg


def sweep_A(
    economy: Economy,
    r_values,
    w: float = 1.0,
    tau: float = 0.0,
    settings: SolverSettings = SolverSettings(),
) -> SweepTable:
    """Tabulate r -> (A, C, boundary mass) over sorted rates below rho.

    Under CRRA with the no-borrowing limit each row is solved once at
    (w=1, tau=0) and rescaled by w(1-tau); rows where the solver fails are
    retained with NaN entries and converged=False so equilibrium scans can
    distinguish 'no root' from 'solver failure'.
    """
    r_values = np.asarray(r_values, dtype=float)
    if np.any(np.diff(r_values) <= 0):
        raise ValueError("r_values must be sorted strictly increasing")
    if np.any(r_values >= economy.rho):
        raise ValueError("all swept rates must satisfy r < rho")

    scale = w * (1.0 - tau)
    n_rows = r_values.size
    a_col = np.full(n_rows, np.nan)
    c_col = np.full(n_rows, np.nan)
    bmass = np.full(n_rows, np.nan)
    ok = np.zeros(n_rows, dtype=bool)
    for i, r in enumerate(r_values):
        try:
            sol, g, a_agg, c_agg = solve_at_rate(economy, r, settings)
        except (NonConvergence, TruncationTooSmall, DegenerateNullSpace):
            continue
        a_col[i] = scale * a_agg
        c_col[i] = scale * c_agg
        bmass[i] = g.boundary_mass
        ok[i] = True
    return SweepTable(
        r=r_values.copy(), A=a_col, C=c_col, boundary_mass=bmass,
        converged=ok, w=w, tau=tau,
    )
