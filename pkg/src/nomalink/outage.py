"""Outage probabilities, goodput, diversity order, and DMT curves.

The per-(stream, cluster) outage event of the zero-forcing receiver under
SIC reduces to a scalar threshold test on [(Z^H Z)^-1]_mm, which maps the
whole system to F_tilde evaluated at

    x = [R_t'^-1]_mm / (gamma_bar * theta_{m,k} * path_loss_k),

where theta_{m,k} is the SIC margin: the minimum over downstream clusters
of the power-to-threshold ratio minus accumulated interference power.
The "exact" label everywhere means the F_tilde approximation, which is an
equality only for uncorrelated receive antennas; reports carry the Monte
Carlo column so the discrepancy is visible rather than hidden.

Everything here is pure and stateless over immutable inputs, so sweeps
over (m, k, snr) grids can run in any order or in parallel with
identical results.
"""

import math
from dataclasses import dataclass

import numpy as np

from .corrchan import ClusterSet, CorrelationPair, SystemConfig
from .errors import DomainError, EigenvalueDegeneracyError
from .specfun import (
    EigenSpectrum,
    FTildeParams,
    f_tilde,
    resolve_spectrum,
    vandermonde_det,
)

_ROW_SUM_TOL = 1e-10

FLAG_INFEASIBLE = "infeasible-theta"
FLAG_CLAMPED = "asymptote-clamped"
FLAG_CANCELLATION = "series-cancellation-fallback-to-mc"
FLAG_MC_DISCARDS = "mc-trial-discards"


@dataclass(frozen=True)
class PowerAllocation:
    """M x K coefficients zeta_{m,k}; each row sums to 1/M (stream fairness)."""

    zeta: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.zeta, dtype=float)
        if z.ndim != 2:
            raise DomainError("zeta must be an M x K matrix")
        if np.any(z <= 0):
            raise DomainError("power coefficients must be strictly positive")
        m = z.shape[0]
        if np.any(np.abs(z.sum(axis=1) - 1.0 / m) > _ROW_SUM_TOL):
            raise DomainError("each power row must sum to 1/M")
        z = z.copy()
        z.flags.writeable = False
        object.__setattr__(self, "zeta", z)

    @property
    def shape(self):
        return self.zeta.shape


@dataclass(frozen=True)
class RatePlan:
    """M x K target rates in bits/s/Hz, strictly positive."""

    rates: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rates, dtype=float)
        if r.ndim != 2:
            raise DomainError("rates must be an M x K matrix")
        if np.any(r <= 0):
            raise DomainError("target rates must be strictly positive")
        r = r.copy()
        r.flags.writeable = False
        object.__setattr__(self, "rates", r)

    @classmethod
    def broadcast(cls, rate: float, m: int, k: int) -> "RatePlan":
        return cls(np.full((m, k), float(rate)))

    @property
    def shape(self):
        return self.rates.shape


@dataclass(frozen=True)
class ThetaTable:
    """SIC margins theta_{m,k} with the minimizing cluster index per entry.

    theta_{m,k} = min over i in [k, K] of
        zeta_{m,i} / (2^R_{m,i} - 1) - sum_{l<i} zeta_{m,l}.
    Feasible iff the k = 1 column is positive (the min over a shrinking
    set is nondecreasing in k).
    """

    theta: np.ndarray
    argmin: np.ndarray

    def __post_init__(self):
        for name in ("theta", "argmin"):
            arr = np.array(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def feasible(self) -> bool:
        return bool(np.all(self.theta[:, 0] > 0))

    def entry_feasible(self, m: int, k: int) -> bool:
        return bool(self.theta[m, k] > 0)


def theta_table(power: PowerAllocation, rates: RatePlan) -> ThetaTable:
    """SIC margin table; infeasibility shows up as nonpositive entries."""
    if power.shape != rates.shape:
        raise DomainError(
            f"power {power.shape} and rates {rates.shape} dimensions disagree"
        )
    z = power.zeta
    r = rates.rates
    m_streams, k_clusters = z.shape
    prefix = np.concatenate(
        [np.zeros((m_streams, 1)), np.cumsum(z, axis=1)[:, :-1]], axis=1
    )
    margins = z / (2.0**r - 1.0) - prefix  # per-i terms of the min
    theta = np.empty_like(margins)
    argmin = np.empty(margins.shape, dtype=np.int64)
    for mi in range(m_streams):
        # Scan right-to-left keeping the smallest index on ties.
        best = margins[mi, -1]
        best_i = k_clusters - 1
        theta[mi, -1] = best
        argmin[mi, -1] = best_i
        for ki in range(k_clusters - 2, -1, -1):
            if margins[mi, ki] <= best:
                best = margins[mi, ki]
                best_i = ki
            theta[mi, ki] = best
            argmin[mi, ki] = best_i
    return ThetaTable(theta=theta, argmin=argmin)


def ftilde_params(cfg: SystemConfig, corr: CorrelationPair) -> FTildeParams:
    return FTildeParams(
        n_r=cfg.n_r,
        m=cfg.n_streams,
        spectrum=EigenSpectrum(tuple(corr.r_r_eigs)),
    )


def outage_argument(
    m: int, k: int, cfg: SystemConfig, clusters: ClusterSet,
    corr: CorrelationPair, theta: ThetaTable,
) -> float:
    """F_tilde argument [R_t'^-1]_mm / (gamma_bar * theta * path_loss)."""
    return corr.inv_diag[m] / (
        cfg.gamma_bar * theta.theta[m, k] * clusters.path_loss[k]
    )


def exact_outage(
    m: int, k: int, cfg: SystemConfig, clusters: ClusterSet,
    corr: CorrelationPair, theta: ThetaTable,
) -> float:
    """F_tilde-based outage for stream m of cluster k (0-based indices).

    Infeasible SIC (theta <= 0) returns certain outage 1.0; series
    cancellation errors propagate so callers can fall back to Monte Carlo.
    """
    if not theta.entry_feasible(m, k):
        return 1.0
    x = outage_argument(m, k, cfg, clusters, corr, theta)
    return f_tilde(x, ftilde_params(cfg, corr))


@dataclass(frozen=True)
class PhiTable:
    """Leading asymptotic constants phi_{m,k} and the decay order."""

    phi: np.ndarray
    decay: int

    def __post_init__(self):
        arr = np.array(self.phi, dtype=float)
        arr.flags.writeable = False
        object.__setattr__(self, "phi", arr)


def _phi_constant(lams: np.ndarray, n_r: int, m_streams: int) -> float:
    """Spectrum-dependent factor of the asymptote (before the x^d power)."""
    kind, resolved = resolve_spectrum(lams)
    d = n_r - m_streams + 1
    if kind == "equal":
        # Confluent limit: leading term of the regularized gamma.
        return 1.0 / (resolved**d * _fact(d))
    lams = resolved
    if m_streams == 1:
        det_rr = float(np.prod(lams))
        return 1.0 / (_fact(n_r) * det_rr)
    sign = -1.0 if (n_r - m_streams) % 2 else 1.0
    vdm = vandermonde_det(lams)
    n = n_r
    mat = np.empty((n, n))
    mat[:, 0] = lams ** (m_streams - 2) * np.log(lams)
    for j in range(2, n + 1):
        mat[:, j - 1] = lams ** (n - j)
    num = float(np.linalg.det(mat))
    const = (
        sign
        * _fact(n_r - 1)
        / (_fact(n_r - m_streams) * _fact(n_r - m_streams + 1) * _fact(m_streams - 2))
        * num
        / vdm
    )
    if not np.isfinite(const) or const <= 0:
        raise EigenvalueDegeneracyError(
            f"asymptotic constant degenerate for spectrum {lams}"
        )
    return const


def _fact(n: int) -> float:
    return float(math.factorial(n))


def phi_table(
    cfg: SystemConfig, clusters: ClusterSet, corr: CorrelationPair
) -> PhiTable:
    """phi_{m,k}: the two-branch constant of the unified asymptote.

    M = 1 uses 1/(N_r! det R_r) x^N_r; M > 1 the signed log-determinant
    ratio times x^(N_r-M+1), with x = [R_t'^-1]_mm / (gamma_bar * ell_k).
    """
    m_streams = cfg.n_streams
    k_clusters = clusters.k_clusters
    lams = np.asarray(corr.r_r_eigs)
    const = _phi_constant(lams, cfg.n_r, m_streams)
    # For M = 1 the decay order N_r - M + 1 equals N_r, so both branches
    # of the asymptotic constant share the same x-power.
    d = cfg.decay_order
    phi = np.empty((m_streams, k_clusters))
    for mi in range(m_streams):
        for ki in range(k_clusters):
            x_hat = corr.inv_diag[mi] / (cfg.gamma_bar * clusters.path_loss[ki])
            phi[mi, ki] = const * x_hat**d
    if np.any(phi <= 0):
        raise EigenvalueDegeneracyError("nonpositive asymptotic constant")
    return PhiTable(phi=phi, decay=cfg.decay_order)


def asymptotic_outage(
    m: int, k: int, phi: PhiTable, theta: ThetaTable, clamp: bool = True
) -> float:
    """Unified asymptote phi * theta^-(N_r-M+1); clamped to [0,1] by default."""
    if not theta.entry_feasible(m, k):
        return 1.0 if clamp else np.inf
    raw = phi.phi[m, k] * theta.theta[m, k] ** (-phi.decay)
    if clamp:
        return min(max(raw, 0.0), 1.0)
    return raw


def goodput(outages: np.ndarray, rates: RatePlan) -> float:
    """T_g = sum over (m,k) of (1 - p_{m,k}) * R_{m,k}."""
    p = np.asarray(outages, dtype=float)
    if p.shape != rates.shape:
        raise DomainError("outage table and rate plan dimensions disagree")
    if np.any((p < 0) | (p > 1)):
        raise DomainError("outage probabilities must lie in [0,1]")
    return float(np.sum((1.0 - p) * rates.rates))


def diversity_order(cfg: SystemConfig) -> int:
    """High-SNR decay exponent of the outage curve: N_r - M + 1."""
    return cfg.decay_order


def dmt_gain(r, upsilon, cfg: SystemConfig) -> np.ndarray:
    """Diversity gains (N_r-M+1)(1 - upsilon_k - r_k) per cluster.

    Validates the scaling-exponent constraints: upsilon nonincreasing with
    upsilon_K = 0, multiplexing gains r >= 0 with r_i <= upsilon_{i-1} -
    upsilon_i for i >= 2.
    """
    r = np.asarray(r, dtype=float)
    u = np.asarray(upsilon, dtype=float)
    if r.shape != u.shape or r.ndim != 1:
        raise DomainError("multiplexing gains and power exponents must match 1-D")
    if np.any(r < 0) or np.any(u < 0):
        raise DomainError("gains and exponents must be nonnegative")
    if u[-1] != 0:
        raise DomainError("the farthest cluster's power exponent must be 0")
    if np.any(np.diff(u) > 1e-12):
        raise DomainError("power exponents must be nonincreasing in k")
    if r.size > 1 and np.any(r[1:] > -np.diff(u) + 1e-12):
        raise DomainError("need r_i <= upsilon_{i-1} - upsilon_i for i >= 2")
    return cfg.decay_order * (1.0 - u - r)


def outage_lower_bound(m: int, k: int, phi: PhiTable, rates: RatePlan) -> float:
    """Floor of the optimized asymptote: M^d phi (2^R - 1)^d.

    Equals the asymptotic outage when all power goes to one cluster, so
    any fairness-constrained allocation sits at or above it.
    """
    m_streams = rates.shape[0]
    d = phi.decay
    return float(
        m_streams**d * phi.phi[m, k] * (2.0 ** rates.rates[m, k] - 1.0) ** d
    )


@dataclass(frozen=True)
class OutageReport:
    """Per-(m,k) probabilities plus goodput, with per-entry flags.

    `p_exact_approx` is the F_tilde value (NaN where the series failed),
    `p_asym` the clamped asymptote, `p_mc`/`mc_ci` filled only when a
    Monte Carlo estimate was requested. `goodput_source` names the
    probability table the scalar goodput was computed from.
    """

    p_exact_approx: np.ndarray
    p_asym: np.ndarray
    goodput_exact: float
    goodput_asym: float
    flags: tuple
    goodput_source: str = "exact"
    p_mc: np.ndarray = None
    mc_ci_low: np.ndarray = None
    mc_ci_high: np.ndarray = None
    goodput_mc: float = None


def outage_report(
    cfg: SystemConfig,
    clusters: ClusterSet,
    corr: CorrelationPair,
    power: PowerAllocation,
    rates: RatePlan,
) -> OutageReport:
    """Evaluate the analytic tables for one scenario point.

    Series failures are recorded per entry (flag carries the fallback
    marker) instead of aborting; such entries contribute rate 0 to the
    exact goodput and show as NaN.
    """
    from .errors import SeriesCancellationError

    theta = theta_table(power, rates)
    phi = phi_table(cfg, clusters, corr)
    m_streams, k_clusters = power.shape
    p_exact = np.empty((m_streams, k_clusters))
    p_asym = np.empty((m_streams, k_clusters))
    flags = {}
    for mi in range(m_streams):
        for ki in range(k_clusters):
            entry_flags = []
            if not theta.entry_feasible(mi, ki):
                entry_flags.append(FLAG_INFEASIBLE)
            try:
                p_exact[mi, ki] = exact_outage(mi, ki, cfg, clusters, corr, theta)
            except SeriesCancellationError:
                p_exact[mi, ki] = np.nan
                entry_flags.append(FLAG_CANCELLATION)
            raw = asymptotic_outage(mi, ki, phi, theta, clamp=False)
            if raw > 1.0:
                entry_flags.append(FLAG_CLAMPED)
            p_asym[mi, ki] = min(max(raw, 0.0), 1.0)
            if entry_flags:
                flags[(mi, ki)] = tuple(entry_flags)
    exact_for_goodput = np.where(np.isnan(p_exact), 1.0, p_exact)
    return OutageReport(
        p_exact_approx=p_exact,
        p_asym=p_asym,
        goodput_exact=goodput(exact_for_goodput, rates),
        goodput_asym=goodput(p_asym, rates),
        flags=tuple(sorted(flags.items())),
        goodput_source="exact",
    )
