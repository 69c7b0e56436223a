"""Stationary equilibrium location for Huggett and Aiyagari economies.

Everything runs off one base sweep of A(r) at (w=1, tau=0): CRRA scaling
makes asset demand affine in (1-tau), so scanning a new tax rate costs no
additional household solves until final root refinement, which bisects on
exact re-solves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    NonMonetary,
    OutOfSweepRange,
    RateBelowNegDepreciation,
    RootLost,
    ScanTooCoarse,
    ZeroAssetDemand,
)
from .hjb import SolverSettings
from .model import Economy, FirmParams, firm_side, lower_interest_bound
from .stationary import SweepTable, solve_at_rate, sweep_A

_EXCESS_TOL = 1e-10
_SCAN_EDGE = 1e-4
_ZERO_GAP = 1e-5  # keep scan nodes away from the r=0 singularity
_MAX_BISECT = 200


@dataclass(frozen=True)
class EquilibriumResult:
    """One located stationary equilibrium with its clearing residuals."""

    kind: str  # "huggett" | "aiyagari"
    tau_star: float
    r_star: float
    B_star: float
    K_star: float
    w_star: float
    A_star: float
    C_star: float
    residuals: tuple[float, float, float]  # (asset, goods, budget)
    bracket: tuple[float, float]


@dataclass(frozen=True)
class EquilibriumScan:
    """Root-scan outcome for one tax rate."""

    tau: float
    roots: tuple[EquilibriumResult, ...]
    rejected: tuple[EquilibriumResult, ...]
    excess_r: np.ndarray = field(repr=False)
    excess: np.ndarray = field(repr=False)
    accepted_region: np.ndarray = field(repr=False)
    verdict: str  # none | unique | two | family | tangent
    family_interval: tuple[float, float] | None = None

    def __post_init__(self):
        for name in ("excess_r", "excess", "accepted_region"):
            getattr(self, name).setflags(write=False)


def default_scan_grid(r_lo: float, r_hi: float, n_linear: int = 280, n_log: int = 60) -> np.ndarray:
    """Mixed linear/log scan nodes on (r_lo, r_hi), refined near r = 0.

    The refinement matters because the bond supply curve tau/r is singular
    at zero; nodes inside (-1e-5, 1e-5) are dropped.
    """
    nodes = [np.linspace(r_lo, r_hi, n_linear)]
    if r_lo < -_ZERO_GAP:
        lo_mag = min(-r_lo, 0.05)
        nodes.append(-np.geomspace(_ZERO_GAP, lo_mag, n_log))
    if r_hi > _ZERO_GAP:
        hi_mag = min(r_hi, 0.05)
        nodes.append(np.geomspace(_ZERO_GAP, hi_mag, n_log))
    grid = np.unique(np.concatenate(nodes))
    grid = grid[(grid >= r_lo) & (grid <= r_hi) & (np.abs(grid) >= _ZERO_GAP)]
    return grid


def base_sweep(
    economy: Economy,
    scan: tuple[float, float, float] | None = None,
    settings: SolverSettings = SolverSettings(),
    firm: FirmParams | None = None,
) -> SweepTable:
    """A(r, 1, 0) table used by every excess function and root finder."""
    r_bound = lower_interest_bound(
        economy.chain, economy.utility, economy.household_params(r=0.0)
    )
    lo_default = r_bound + _SCAN_EDGE
    if firm is not None:
        lo_default = max(lo_default, -firm.delta + _SCAN_EDGE)
    hi_default = economy.rho - _SCAN_EDGE
    if scan is None:
        grid = default_scan_grid(lo_default, hi_default)
    else:
        r_min, r_max, step = scan
        grid = np.arange(r_min, r_max + 0.5 * step, step)
        grid = grid[np.abs(grid) >= _ZERO_GAP]
    return sweep_A(economy, grid, settings=settings)


def huggett_excess(r: float, tau: float, base: SweepTable) -> float:
    """r A(r,1,0) - tau/(1-tau): zero exactly at Huggett equilibria.

    Linear interpolation between sweep nodes; exact re-solves happen in
    the finders' bisection stage, not here.
    """
    if r == 0:
        raise ZeroDivisionError("huggett excess is defined for r != 0")
    return r * base.interp_A(r) - tau / (1.0 - tau)


def aiyagari_excess(r: float, tau: float, firm: FirmParams, base: SweepTable) -> float:
    """A(r,1,tau) - S(r) with S(r) = alpha/((1-alpha)(r+delta)) + tau/r."""
    if r <= -firm.delta:
        raise RateBelowNegDepreciation(f"need r > -delta, got {r}")
    if r == 0:
        raise ZeroDivisionError("aiyagari excess is defined for r != 0")
    supply = firm.alpha / ((1.0 - firm.alpha) * (r + firm.delta)) + tau / r
    return (1.0 - tau) * base.interp_A(r) - supply


def _bisect(f, lo, hi, f_lo, f_hi):
    """Bisection to |f| < _EXCESS_TOL; returns (root, f(root), bracket)."""
    for _ in range(_MAX_BISECT):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if abs(f_mid) < _EXCESS_TOL or (hi - lo) < 1e-15 * max(1.0, abs(mid)):
            return mid, f_mid, (lo, hi)
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    return mid, f_mid, (lo, hi)


def _sign_change_brackets(grid, values):
    ok = np.isfinite(values)
    grid, values = grid[ok], values[ok]
    out = []
    for i in range(grid.size - 1):
        if values[i] == 0.0:
            out.append((grid[i], grid[i]))
        elif np.sign(values[i]) != np.sign(values[i + 1]):
            out.append((grid[i], grid[i + 1]))
    return out, grid, values


def _check_scan_resolution(root_rates, step):
    """Two refined roots inside a single scan step mean the scan cannot
    certify the count; the caller must rescan with a finer step."""
    for first, second in zip(root_rates, root_rates[1:]):
        if second - first < step:
            raise ScanTooCoarse(
                f"roots {first} and {second} within one scan step ({step})"
            )


def _tangency_candidate(grid, values):
    """Interior local minimum of |excess| that never crosses zero."""
    mag = np.abs(values)
    if mag.size < 3:
        return None
    i = int(np.argmin(mag[1:-1])) + 1
    if mag[i] < mag[i - 1] and mag[i] < mag[i + 1]:
        return float(grid[i]), float(values[i])
    return None


def walras_check(
    candidate: EquilibriumResult,
    economy: Economy,
    firm: FirmParams | None = None,
) -> tuple[float, float, float]:
    """Residuals of the three clearing conditions, scaled by 1 + |A*|.

    Asset: |A - B - K|.  Goods: |C + delta K - F(K, 1)| with F(K, 1) = 1
    and K = 0 in the Huggett model.  Budget: |r B - w tau|.  Any two of
    them vanishing forces the third.  Aiyagari candidates need the firm
    parameters for the goods market.
    """
    scale = 1.0 + abs(candidate.A_star)
    asset = abs(candidate.A_star - candidate.B_star - candidate.K_star)
    if candidate.kind == "huggett":
        output = 1.0
        depreciation = 0.0
    else:
        if firm is None:
            raise ValueError("walras_check needs firm parameters for aiyagari candidates")
        output = candidate.K_star**firm.alpha
        depreciation = firm.delta * candidate.K_star
    goods = abs(candidate.C_star + depreciation - output)
    budget = abs(candidate.r_star * candidate.B_star - candidate.w_star * candidate.tau_star)
    return (asset / scale, goods / scale, budget / scale)


def _result_huggett(economy, tau, r_star, bracket, settings) -> EquilibriumResult:
    _, _, a_base, c_base = solve_at_rate(economy, r_star, settings)
    a_star = (1.0 - tau) * a_base
    c_star = (1.0 - tau) * c_base
    res = EquilibriumResult(
        kind="huggett",
        tau_star=tau,
        r_star=r_star,
        B_star=a_star,
        K_star=0.0,
        w_star=1.0,
        A_star=a_star,
        C_star=c_star,
        residuals=(0.0, 0.0, 0.0),
        bracket=bracket,
    )
    object.__setattr__(res, "residuals", walras_check(res, economy))
    return res


def _result_aiyagari(economy, tau, r_star, bracket, firm, settings) -> EquilibriumResult:
    _, _, a_base, c_base = solve_at_rate(economy, r_star, settings)
    k_star, w_star = firm_side(firm, r_star)
    a_star = w_star * (1.0 - tau) * a_base
    c_star = w_star * (1.0 - tau) * c_base
    b_star = 0.0 if tau == 0.0 else w_star * tau / r_star
    res = EquilibriumResult(
        kind="aiyagari",
        tau_star=tau,
        r_star=r_star,
        B_star=b_star,
        K_star=k_star,
        w_star=w_star,
        A_star=a_star,
        C_star=c_star,
        residuals=(0.0, 0.0, 0.0),
        bracket=bracket,
    )
    object.__setattr__(res, "residuals", walras_check(res, economy, firm))
    return res


def _verdict(n_roots: int) -> str:
    return {0: "none", 1: "unique", 2: "two"}.get(n_roots, f"{n_roots}-roots")


def find_huggett_equilibria(
    economy: Economy,
    tau: float,
    scan: tuple[float, float, float] | None = None,
    settings: SolverSettings = SolverSettings(),
    base: SweepTable | None = None,
) -> EquilibriumScan:
    """Locate all Huggett equilibria at primary surplus tau.

    Sign changes of the interpolated excess are refined by bisection on
    exact re-solves.  tau = 0 returns the family verdict: the non-monetary
    continuum on (-inf, lower bound) plus the representative r* = 0 root.
    """
    if not tau < 1:
        raise ValueError(f"tau must be < 1, got {tau}")
    base = base if base is not None else base_sweep(economy, scan, settings)
    r_bound = lower_interest_bound(
        economy.chain, economy.utility, economy.household_params(r=0.0)
    )

    if tau == 0.0:
        root = _result_huggett(economy, 0.0, 0.0, (0.0, 0.0), settings)
        grid = base.r
        excess = np.array([r * a for r, a in zip(base.r, base.A)])
        return EquilibriumScan(
            tau=0.0,
            roots=(root,),
            rejected=(),
            excess_r=grid.copy(),
            excess=excess,
            accepted_region=np.ones_like(grid, dtype=bool),
            verdict="family",
            family_interval=(-np.inf, r_bound),
        )

    grid = base.r
    coarse = np.array([r * a - tau / (1.0 - tau) for r, a in zip(base.r, base.A)])
    accepted_region = (grid * tau) >= 0

    def exact_excess(r):
        _, _, a_base, _ = solve_at_rate(economy, r, settings)
        return r * a_base - tau / (1.0 - tau)

    brackets, fin_grid, fin_vals = _sign_change_brackets(grid, coarse)
    roots = []
    for lo, hi in brackets:
        if lo == hi:
            r_star, bracket = lo, (lo, hi)
        else:
            r_star, _, bracket = _bisect(exact_excess, lo, hi, exact_excess(lo), exact_excess(hi))
        roots.append(_result_huggett(economy, tau, r_star, bracket, settings))
    roots.sort(key=lambda res: res.r_star)
    step = np.min(np.diff(grid)) if grid.size > 1 else np.inf
    _check_scan_resolution([res.r_star for res in roots], step)

    verdict = _verdict(len(roots))
    if not roots:
        tangent = _tangency_candidate(fin_grid, fin_vals)
        if tangent is not None and abs(tangent[1]) < 1e-6:
            verdict = "tangent"
    return EquilibriumScan(
        tau=tau,
        roots=tuple(roots),
        rejected=(),
        excess_r=grid.copy(),
        excess=coarse,
        accepted_region=accepted_region,
        verdict=verdict,
    )


def find_aiyagari_equilibria(
    economy: Economy,
    tau: float,
    firm: FirmParams,
    scan: tuple[float, float, float] | None = None,
    settings: SolverSettings = SolverSettings(),
    base: SweepTable | None = None,
) -> EquilibriumScan:
    """Locate Aiyagari equilibria at primary surplus tau.

    Intersections of A(r,1,tau) with S(r) are accepted only when the
    implied debt w*(r) tau/r is non-negative; budget-infeasible
    intersections are kept in `rejected` for figure parity.
    """
    if not tau < 1:
        raise ValueError(f"tau must be < 1, got {tau}")
    base = base if base is not None else base_sweep(economy, scan, settings, firm=firm)
    grid = base.r[base.r > -firm.delta + 0.5 * _SCAN_EDGE]
    if grid.size == 0:
        raise ValueError("scan grid lies entirely below -delta")

    def coarse_excess(r):
        try:
            return aiyagari_excess(r, tau, firm, base)
        except (OutOfSweepRange, ZeroDivisionError):
            return np.nan

    def exact_excess(r):
        _, _, a_base, _ = solve_at_rate(economy, r, settings)
        supply = firm.alpha / ((1.0 - firm.alpha) * (r + firm.delta)) + (
            tau / r if tau != 0.0 else 0.0
        )
        return (1.0 - tau) * a_base - supply

    coarse = np.array([
        (1.0 - tau) * a - (firm.alpha / ((1.0 - firm.alpha) * (r + firm.delta))
                           + (tau / r if tau != 0.0 else 0.0))
        if np.isfinite(a) else np.nan
        for r, a in zip(grid, base.A[base.r > -firm.delta + 0.5 * _SCAN_EDGE])
    ])
    accepted_region = np.ones_like(grid, dtype=bool) if tau == 0.0 else (grid * tau) >= 0

    # The supply curve jumps across r = 0 (tau/r singularity); do not
    # treat the sign flip across the gap as a bracket.
    segments = [grid < 0, grid > 0] if tau != 0.0 else [np.ones_like(grid, dtype=bool)]
    roots, rejected = [], []
    for seg in segments:
        if seg.sum() < 2:
            continue
        brackets, _, _ = _sign_change_brackets(grid[seg], coarse[seg])
        for lo, hi in brackets:
            if lo == hi:
                r_star, bracket = lo, (lo, hi)
            else:
                r_star, _, bracket = _bisect(
                    exact_excess, lo, hi, exact_excess(lo), exact_excess(hi)
                )
            result = _result_aiyagari(economy, tau, r_star, bracket, firm, settings)
            feasible = tau == 0.0 or tau / r_star >= 0
            (roots if feasible else rejected).append(result)
    roots.sort(key=lambda res: res.r_star)
    rejected.sort(key=lambda res: res.r_star)
    step = np.min(np.diff(grid)) if grid.size > 1 else np.inf
    _check_scan_resolution([res.r_star for res in roots], step)

    verdict = _verdict(len(roots))
    return EquilibriumScan(
        tau=tau,
        roots=tuple(roots),
        rejected=tuple(rejected),
        excess_r=grid.copy(),
        excess=coarse,
        accepted_region=accepted_region,
        verdict=verdict,
    )


@dataclass(frozen=True)
class FixedPointTrace:
    """Outcome of the damped fixed-point iteration on the interest rate."""

    converged: bool
    r_star: float | None
    trace: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.trace.setflags(write=False)


def fixed_point_iteration(
    economy: Economy,
    tau: float,
    r0: float,
    damping: float = 0.5,
    max_iter: int = 100,
    settings: SolverSettings = SolverSettings(),
    tol: float = 1e-9,
) -> FixedPointTrace:
    """Iterate r <- (1-theta) r + theta tau/A(r,1,tau) in the Huggett model.

    Divergence (iterates leaving (-inf, rho) or the cap binding) is a
    legitimate outcome near unstable equilibria and is reported with the
    trace rather than raised.
    """
    if not (0 < damping <= 1):
        raise ValueError(f"damping must be in (0, 1], got {damping}")
    if r0 >= economy.rho:
        raise ValueError(f"r0 must be < rho, got {r0}")
    trace = [r0]
    r = r0
    for _ in range(max_iter):
        _, _, a_base, _ = solve_at_rate(economy, r, settings)
        a_tau = (1.0 - tau) * a_base
        if a_tau == 0.0:
            raise ZeroAssetDemand(f"A({r}, 1, tau) = 0: fixed-point map undefined")
        r_next = (1.0 - damping) * r + damping * tau / a_tau
        trace.append(r_next)
        if abs(r_next - r) < tol:
            return FixedPointTrace(True, r_next, np.asarray(trace))
        if r_next >= economy.rho or not np.isfinite(r_next):
            return FixedPointTrace(False, None, np.asarray(trace))
        r = r_next
    return FixedPointTrace(False, None, np.asarray(trace))


@dataclass(frozen=True)
class LimitTable:
    """Aiyagari equilibrium rates along a vanishing capital share."""

    alphas: np.ndarray = field(repr=False)
    aiyagari_roots: tuple[tuple[float, ...], ...]
    huggett_roots: tuple[float, ...]

    def __post_init__(self):
        self.alphas.setflags(write=False)

    def gaps(self) -> np.ndarray:
        """|r*(alpha) - nearest Huggett root| per alpha (single-root case)."""
        out = np.empty(self.alphas.size)
        for i, roots in enumerate(self.aiyagari_roots):
            out[i] = min(
                abs(r - h) for r in roots for h in self.huggett_roots
            ) if roots else np.nan
        return out


def huggett_limit_experiment(
    economy: Economy,
    tau: float,
    alpha_sequence,
    delta: float,
    scan: tuple[float, float, float] | None = None,
    settings: SolverSettings = SolverSettings(),
    base: SweepTable | None = None,
) -> LimitTable:
    """Track Aiyagari equilibria as the capital share vanishes.

    For tau in (0,1) the unique root converges to the unique Huggett rate;
    for tau < 0 both roots are tracked by continuity across consecutive
    alphas, raising RootLost when the continuation breaks.
    """
    alphas = np.asarray(list(alpha_sequence), dtype=float)
    if np.any(np.diff(alphas) >= 0):
        raise ValueError("alpha_sequence must be strictly decreasing")
    base = base if base is not None else base_sweep(
        economy, scan, settings, firm=FirmParams(alpha=float(alphas[0]), delta=delta)
    )
    huggett = find_huggett_equilibria(economy, tau, scan, settings, base=base)
    huggett_roots = tuple(res.r_star for res in huggett.roots)

    rows = []
    prev_roots: tuple[float, ...] | None = None
    prev_alpha = None
    for alpha in alphas:
        firm = FirmParams(alpha=float(alpha), delta=delta)
        scan_result = find_aiyagari_equilibria(
            economy, tau, firm, scan, settings, base=base
        )
        roots = tuple(res.r_star for res in scan_result.roots)
        if prev_roots is not None and len(roots) < len(prev_roots):
            raise RootLost(prev_alpha, float(alpha))
        rows.append(roots)
        prev_roots, prev_alpha = roots, float(alpha)
    return LimitTable(alphas=alphas, aiyagari_roots=tuple(rows), huggett_roots=huggett_roots)


def price_level(
    b_nominal_0: float,
    i: float,
    result: EquilibriumResult,
    t,
):
    """Price path P_t = (B_nominal/B*) exp((i - r*) t) of the monetary equilibrium."""
    if result.B_star <= 0:
        raise NonMonetary("price level undefined: equilibrium real debt is zero")
    p0 = b_nominal_0 / result.B_star
    t_arr = np.asarray(t, dtype=float)
    path = p0 * np.exp((i - result.r_star) * t_arr)
    if np.isscalar(t) or t_arr.ndim == 0:
        return float(path)
    return path
