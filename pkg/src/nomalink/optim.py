"""Goodput maximizers built on the asymptotic outage model.

Three solvers, all working on the tractable asymptote
p ~ phi * theta^-(N_r-M+1):

* ``optimal_power``  - closed-form KKT power allocation for fixed rates:
  zeta_m = L^-1 b / (M 1^T L^-1 b) with L the transposed upper-triangular
  rate matrix and b built from (d phi R / colsum)^(1/(d+1)).
* ``optimal_rate``   - per-entry bisection for the stationary SIC margin,
  then R = log2(1 + zeta / (theta + interference)).
* ``joint_optimize`` - alternate the two until the goodput gain drops
  below the stopping tolerance (the alternating objective sequence is
  nondecreasing and bounded, hence convergent).

``default_power_allocation`` provides the epsilon-recursion used as the
untuned baseline.

Per-stream subproblems are independent (the solvers loop over streams);
each solver call is deterministic and side-effect free.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DomainError, InfeasibleDefaultError, NoRootError
from .outage import PhiTable, PowerAllocation, RatePlan, ThetaTable, theta_table

_THETA_MATCH_TOL = 1e-10
_BISECT_REL_WIDTH = 1e-12
_MAX_DOUBLINGS = 200


@dataclass(frozen=True)
class TriangularSystem:
    """U_m (diag 1/(2^R - 1), -1 above), its transpose L_m, and b_m."""

    u: np.ndarray
    l: np.ndarray
    b: np.ndarray


def l_inverse_product_form(rates_row: np.ndarray) -> np.ndarray:
    """Explicit inverse of L: entries (2^Ri - 1)(2^Rj - 1) prod 2^Rt.

    All entries are nonnegative for positive rates, which is what makes
    the closed-form power allocation strictly positive.
    """
    rates_row = np.asarray(rates_row, dtype=float)
    k = rates_row.size
    gain = 2.0**rates_row - 1.0
    two_r = 2.0**rates_row
    out = np.zeros((k, k))
    for i in range(k):
        out[i, i] = gain[i]
        for j in range(i):
            out[i, j] = gain[i] * gain[j] * float(np.prod(two_r[j + 1 : i]))
    return out


def _build_triangular(rates_row: np.ndarray, phi_row: np.ndarray, d: int):
    """TriangularSystem for one stream plus the column sums e_k^T U^-1 1."""
    k = rates_row.size
    gain = 2.0**rates_row - 1.0
    u = np.triu(np.full((k, k), -1.0), 1) + np.diag(1.0 / gain)
    colsum = solve_triangular(u, np.ones(k), lower=False)
    # Positivity is guaranteed (the product-form inverse has nonnegative
    # entries); a violation here means broken inputs, not a tight case.
    if np.any(l_inverse_product_form(rates_row) < 0) or np.any(colsum <= 0):
        raise DomainError("triangular system lost positivity; invalid rates")
    b = ((d * phi_row * rates_row) / colsum) ** (1.0 / (d + 1))
    if np.any(b <= 0) or not np.all(np.isfinite(b)):
        raise DomainError("nonpositive b entries; invalid phi or rates")
    return TriangularSystem(u=u, l=u.T, b=b), colsum


def default_power_allocation(
    epsilon: float, rates: RatePlan, m_streams: int, k_clusters: int
) -> PowerAllocation:
    """Baseline recursion: from the farthest cluster inward,
    zeta_k = (1/M - sum_{l>k} zeta_l)(1 - eps 2^-R), remainder to k=1."""
    if not 0.0 <= epsilon <= 1.0:
        raise DomainError(f"epsilon must lie in [0,1], got {epsilon}")
    r = rates.rates
    if r.shape != (m_streams, k_clusters):
        raise DomainError("rate plan dimensions disagree with (M, K)")
    zeta = np.zeros((m_streams, k_clusters))
    for mi in range(m_streams):
        for ki in range(k_clusters - 1, 0, -1):
            rest = zeta[mi, ki + 1 :].sum()
            zeta[mi, ki] = (1.0 / m_streams - rest) * (
                1.0 - epsilon * 2.0 ** (-r[mi, ki])
            )
        zeta[mi, 0] = 1.0 / m_streams - zeta[mi, 1:].sum()
    if np.any(zeta <= 0):
        raise InfeasibleDefaultError(
            f"epsilon={epsilon} leaves a nonpositive coefficient"
        )
    return PowerAllocation(zeta)


def _theta_closed_form(w: np.ndarray, rates_row: np.ndarray, m_streams: int):
    """theta*_k = a_k^T w / (M 1^T w) with a_k = (-1,...,-1, 1/(2^Rk - 1), 0...)."""
    gain = 2.0**rates_row - 1.0
    denom = m_streams * w.sum()
    k = w.size
    theta = np.empty(k)
    for ki in range(k):
        theta[ki] = (w[ki] / gain[ki] - w[:ki].sum()) / denom
    return theta


def optimal_power(rates: RatePlan, phi: PhiTable, cfg):
    """Closed-form power allocation maximizing the asymptotic goodput.

    Returns (PowerAllocation, ThetaTable); the closed-form margins are
    cross-checked against the generic table and the fairness ordering
    zeta_k/(2^Rk - 1) strictly increasing is asserted.
    """
    m_streams, k_clusters = rates.shape
    d = phi.decay
    zeta = np.empty((m_streams, k_clusters))
    theta_star = np.empty((m_streams, k_clusters))
    for mi in range(m_streams):
        tri, _ = _build_triangular(rates.rates[mi], phi.phi[mi], d)
        w = solve_triangular(tri.l, tri.b, lower=True)
        zeta[mi] = w / (m_streams * w.sum())
        theta_star[mi] = _theta_closed_form(w, rates.rates[mi], m_streams)
    power = PowerAllocation(zeta)
    table = theta_table(power, rates)
    if not np.allclose(table.theta, theta_star, rtol=1e-10, atol=_THETA_MATCH_TOL):
        raise DomainError("closed-form margins disagree with the theta table")
    ratios = zeta / (2.0**rates.rates - 1.0)
    if np.any(np.diff(ratios, axis=1) <= 0):
        raise DomainError("fairness ordering violated; invalid inputs")
    argmin = np.tile(np.arange(k_clusters), (m_streams, 1))
    return power, ThetaTable(theta=theta_star, argmin=argmin)


def asymptotic_outage_at_optimum(
    m: int, k: int, rates: RatePlan, phi: PhiTable
) -> float:
    """M^d phi (1^T L^-1 b / a_k^T L^-1 b)^d at the optimal allocation."""
    m_streams = rates.shape[0]
    d = phi.decay
    tri, _ = _build_triangular(rates.rates[m], phi.phi[m], d)
    w = solve_triangular(tri.l, tri.b, lower=True)
    gain = 2.0 ** rates.rates[m, k] - 1.0
    a_dot = w[k] / gain - w[:k].sum()
    return float(m_streams**d * phi.phi[m, k] * (w.sum() / a_dot) ** d)


def _rate_root(
    zk: float, prefix: float, phi_mk: float, d: int, hi_factor: float = 2.0
) -> float:
    """Bisection for the stationary margin of one (m,k) rate subproblem.

    g(x) = rho(x) - ell(x) with rho the scaled goodput-stationarity
    numerator and ell(x) = (x + prefix)(x + prefix + zk). rho vanishes at
    x_lo = phi^(1/d) while ell > 0, so a sign change lies to the right;
    the upper bracket is found by doubling from hi_factor * x_lo.
    """

    def g(x: float) -> float:
        if not math.isfinite(x):
            return math.nan
        log_term = math.log1p(zk / (x + prefix))
        if log_term <= 0.0:
            return math.nan
        try:
            rho = (
                zk
                * x ** (d + 1)
                * (1.0 - phi_mk * x ** (-d))
                / (d * phi_mk * log_term)
            )
            ell = (x + prefix) * (x + prefix + zk)
            return rho - ell
        except OverflowError:
            # rho grows one polynomial order faster than ell.
            return math.inf

    x_lo = phi_mk ** (1.0 / d)
    lo = x_lo
    hi = hi_factor * x_lo
    for _ in range(_MAX_DOUBLINGS):
        val = g(hi)
        if math.isfinite(val) and val > 0:
            break
        if math.isfinite(hi):
            lo = hi
        hi *= 2.0
    else:
        raise NoRootError(
            f"no sign change within {_MAX_DOUBLINGS} doublings from {x_lo}"
        )
    while hi - lo > _BISECT_REL_WIDTH * hi:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def optimal_rate(zeta: PowerAllocation, phi: PhiTable, cfg):
    """Per-(m,k) optimal rates for fixed powers via bisection.

    Returns (RatePlan, ThetaTable) with the same cross-checks as
    optimal_power (margins consistent, fairness ordering of
    zeta_k/(2^R*_k - 1) strictly increasing).
    """
    m_streams, k_clusters = zeta.shape
    d = phi.decay
    theta_star = np.empty((m_streams, k_clusters))
    rates = np.empty((m_streams, k_clusters))
    for mi in range(m_streams):
        row = zeta.zeta[mi]
        for ki in range(k_clusters):
            prefix = float(row[:ki].sum())
            root = _rate_root(float(row[ki]), prefix, float(phi.phi[mi, ki]), d)
            theta_star[mi, ki] = root
            rates[mi, ki] = math.log2(1.0 + row[ki] / (root + prefix))
    plan = RatePlan(rates)
    table = theta_table(zeta, plan)
    if not np.allclose(table.theta, theta_star, rtol=1e-9, atol=1e-12):
        raise DomainError("rate-solver margins disagree with the theta table")
    ratios = zeta.zeta / (2.0**rates - 1.0)
    if np.any(np.diff(ratios, axis=1) <= 0):
        raise DomainError("rate ordering violated; invalid inputs")
    argmin = np.tile(np.arange(k_clusters), (m_streams, 1))
    return plan, ThetaTable(theta=theta_star, argmin=argmin)


def asymptotic_goodput(
    power: PowerAllocation, rates: RatePlan, phi: PhiTable
) -> float:
    """Unclamped objective sum (1 - phi theta^-d) R; the solver algebra
    assumes no clamping, so negative per-term contributions are kept."""
    theta = theta_table(power, rates).theta
    if np.any(theta <= 0):
        raise DomainError("infeasible plan: nonpositive SIC margin")
    p_raw = phi.phi * theta ** (-float(phi.decay))
    return float(np.sum((1.0 - p_raw) * rates.rates))


@dataclass(frozen=True)
class OptimizationResult:
    """Joint-optimization outcome with the per-iteration goodput trace."""

    zeta_star: PowerAllocation
    rates_star: RatePlan
    theta_star: ThetaTable
    goodput_star: float
    trace: tuple
    iterations: int
    converged: bool


def joint_optimize(
    rates_init: RatePlan,
    epsilon_tol: float = 1e-5,
    max_iter: int = 100,
    scenario=None,
) -> OptimizationResult:
    """Alternate closed-form power and bisection rate updates.

    Stops when the objective gain between consecutive iterations drops
    below epsilon_tol (default initialization is uniform 1 bit/s/Hz when
    rates_init is None). The trace holds the unclamped asymptotic goodput
    after each (power, rate) pair of updates and is nondecreasing.
    """
    from .outage import phi_table

    if scenario is None:
        raise DomainError("joint optimization needs a scenario")
    if epsilon_tol <= 0:
        raise DomainError("stopping tolerance must be positive")
    cfg = scenario.system
    phi = phi_table(cfg, scenario.clusters, scenario.corr)
    m_streams = cfg.n_streams
    k_clusters = scenario.clusters.k_clusters
    rates = rates_init if rates_init is not None else RatePlan.broadcast(
        1.0, m_streams, k_clusters
    )
    if rates.shape != (m_streams, k_clusters):
        raise DomainError("initial rate plan dimensions disagree with scenario")

    trace = []
    t_prev = -1.0
    converged = False
    power = None
    theta = None
    iterations = 0
    for iterations in range(1, max_iter + 1):
        power, _ = optimal_power(rates, phi, cfg)
        rates, theta = optimal_rate(power, phi, cfg)
        t_cur = asymptotic_goodput(power, rates, phi)
        trace.append(t_cur)
        if t_cur - t_prev < epsilon_tol:
            converged = True
            break
        t_prev = t_cur
    return OptimizationResult(
        zeta_star=power,
        rates_star=rates,
        theta_star=theta,
        goodput_star=trace[-1],
        trace=tuple(trace),
        iterations=iterations,
        converged=converged,
    )
