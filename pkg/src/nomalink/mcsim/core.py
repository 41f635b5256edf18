"""Trial plans, channel sampling, and outage/goodput estimators.

Reproducibility contract: trial t of a plan with seed s lives in block
b = t // BLOCK_TRIALS, and block b draws from a Philox stream keyed by
the 128-bit integer (s << 64) | b. Partitions take blocks round-robin
and their integer tallies merge by addition, so (seed, scenario, trials)
fully determine every estimate regardless of partition count or
evaluation order.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..corrchan import CorrelationPair, SystemConfig
from ..errors import DomainError, EstimationError
from ..outage import theta_table
from . import backends

BLOCK_TRIALS = 1 << 16
_MASK64 = (1 << 64) - 1
_Z95 = 1.96


def hermitian_sqrt(mat) -> np.ndarray:
    """PSD square root via eigendecomposition (eigenvalues clipped at
    -1e-12 tolerance), so rho = 0 and near-singular spectra behave alike."""
    mat = np.asarray(mat, dtype=complex)
    w, q = np.linalg.eigh(mat)
    if np.any(w < -1e-12):
        raise DomainError("matrix is not positive semi-definite")
    w = np.clip(w.real, 0.0, None)
    return (q * np.sqrt(w)) @ q.conj().T


@dataclass(frozen=True)
class TrialPlan:
    """Trial count, 64-bit seed, partition count, antithetic toggle."""

    trials: int
    seed: int
    partitions: int = 1
    antithetic: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise DomainError("need at least one trial")
        if not 1 <= self.partitions <= self.trials:
            raise DomainError("partitions must lie in [1, trials]")
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)


@dataclass(frozen=True)
class McEstimate:
    """Binomial estimate with normal/Wilson 95% interval."""

    p_hat: float
    std_err: float
    ci95: tuple
    trials_used: int
    discarded: int = 0


def _make_estimate(successes: int, n: int, discarded: int = 0) -> McEstimate:
    p = successes / n
    se = math.sqrt(p * (1.0 - p) / n)
    if successes < 10:
        # Wilson interval; plain normal bands degenerate in the deep tail.
        z2 = _Z95 * _Z95
        denom = 1.0 + z2 / n
        center = (p + z2 / (2 * n)) / denom
        half = _Z95 * math.sqrt(p * (1.0 - p) / n + z2 / (4 * n * n)) / denom
        lo, hi = center - half, center + half
    else:
        lo, hi = p - _Z95 * se, p + _Z95 * se
    return McEstimate(
        p_hat=p,
        std_err=se,
        ci95=(max(lo, 0.0), min(hi, 1.0)),
        trials_used=n,
        discarded=discarded,
    )


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Counter-based stream for one trial block: key = (seed << 64) | block."""
    key = ((seed & _MASK64) << 64) | (block & _MASK64)
    return np.random.Generator(np.random.Philox(key=key))


def _block_draws(plan: TrialPlan, block: int, count: int, n_r: int, m: int):
    gen = block_rng(plan.seed, block)
    if plan.antithetic:
        half = (count + 1) // 2
        d = gen.standard_normal((half, n_r, m, 2))
        return np.concatenate([d, -d], axis=0)[:count]
    return gen.standard_normal((count, n_r, m, 2))


def _iter_blocks(trials: int):
    full, rem = divmod(trials, BLOCK_TRIALS)
    for b in range(full):
        yield b, BLOCK_TRIALS
    if rem:
        yield full, rem


def sample_effective_channel(
    rng: np.random.Generator, corr: CorrelationPair, cfg: SystemConfig
) -> np.ndarray:
    """One draw of Z = R_r^(1/2) Z_w R_t'^(1/2) with CN(0,1) entries in Z_w."""
    return sample_effective_channels(rng, corr, cfg, 1)[0]


def sample_effective_channels(
    rng: np.random.Generator, corr: CorrelationPair, cfg: SystemConfig, n: int
) -> np.ndarray:
    """Batched channel draws, shape (n, N_r, M)."""
    a = hermitian_sqrt(corr.r_r)
    b = hermitian_sqrt(corr.r_t_eff)
    d = rng.standard_normal((n, cfg.n_r, cfg.n_streams, 2))
    zw = (d[..., 0] + 1j * d[..., 1]) * np.sqrt(0.5)
    return np.einsum("ia,nab,bc->nic", a, zw, b)


def zf_statistic(z: np.ndarray, m: int) -> float:
    """m-th diagonal entry of (Z^H Z)^-1 (0-based stream index)."""
    z = np.asarray(z, dtype=complex)
    g = z.conj().T @ z
    if np.linalg.cond(g) > 1e14:
        raise EstimationError("numerically singular Gram matrix; discard trial")
    val = np.linalg.inv(g)[m, m].real
    if val <= 0:
        raise EstimationError("nonpositive ZF statistic; discard trial")
    return float(val)


def outage_trial(
    m: int,
    k: int,
    stat: float,
    gamma_bar: float,
    theta_mk: float,
    path_loss_k: float,
    debug: tuple = None,
) -> bool:
    """Scalar threshold test: outage iff stat > gamma_bar*theta*path_loss.

    With debug=(zeta_row, rates_row) the union of per-cluster SINR rate
    failures for i in [k, K] is evaluated from the same statistic and
    asserted equal to the scalar predicate (they are algebraically the
    same event; theta <= 0 makes both unconditionally true).
    """
    scalar = bool(stat > gamma_bar * theta_mk * path_loss_k)
    if debug is not None:
        zeta_row, rates_row = debug
        union = False
        g_ell = gamma_bar * path_loss_k
        for i in range(k, len(zeta_row)):
            sinr = g_ell * zeta_row[i] / (g_ell * float(np.sum(zeta_row[:i])) + stat)
            if math.log2(1.0 + sinr) < rates_row[i]:
                union = True
                break
        assert union == scalar, "SINR-union and threshold predicates disagree"
    return scalar


def _thresholds(scenario) -> np.ndarray:
    cfg = scenario.system
    theta = theta_table(scenario.power, scenario.rates).theta
    return cfg.gamma_bar * theta * scenario.clusters.path_loss[None, :]


def _run_tallies(plan: TrialPlan, scenario):
    """Outage counts per (m,k) plus valid/discarded totals over all blocks."""
    cfg = scenario.system
    thr = _thresholds(scenario)
    a = hermitian_sqrt(scenario.corr.r_r)
    b = hermitian_sqrt(scenario.corr.r_t_eff)
    m_streams, k_clusters = thr.shape
    counts = np.zeros((m_streams, k_clusters), dtype=np.int64)
    n_valid = 0
    n_disc = 0
    blocks = list(_iter_blocks(plan.trials))
    # Partitions take blocks round-robin; merging integer tallies makes
    # the total independent of the split and of evaluation order.
    for part in range(plan.partitions):
        for bi in range(part, len(blocks), plan.partitions):
            block, cnt = blocks[bi]
            draws = _block_draws(plan, block, cnt, cfg.n_r, cfg.n_streams)
            stats, valid = backends.stats_from_draws(draws, a, b)
            n_disc += int(np.sum(~valid))
            n_valid += int(np.sum(valid))
            sv = stats[valid]
            for mi in range(m_streams):
                counts[mi] += np.sum(sv[:, mi][:, None] > thr[mi][None, :], axis=0)
    if n_valid == 0:
        raise EstimationError("all trials discarded; cannot form an estimate")
    return counts, n_valid, n_disc


def estimate_outage(m: int, k: int, plan: TrialPlan, scenario) -> McEstimate:
    """Monte Carlo outage estimate for stream m, cluster k (0-based)."""
    counts, n_valid, n_disc = _run_tallies(plan, scenario)
    return _make_estimate(int(counts[m, k]), n_valid, n_disc)


def estimate_outage_table(plan: TrialPlan, scenario):
    """McEstimate for every (m,k) from a single shared set of draws."""
    counts, n_valid, n_disc = _run_tallies(plan, scenario)
    m_streams, k_clusters = counts.shape
    return {
        (mi, ki): _make_estimate(int(counts[mi, ki]), n_valid, n_disc)
        for mi in range(m_streams)
        for ki in range(k_clusters)
    }


def estimate_goodput(plan: TrialPlan, scenario):
    """Goodput estimate sum (1 - p_hat) * R reusing one draw per trial."""
    table = estimate_outage_table(plan, scenario)
    rates = scenario.rates.rates
    tg = float(
        sum((1.0 - est.p_hat) * rates[mi, ki] for (mi, ki), est in table.items())
    )
    return tg, table


def report_with_mc(report, plan: TrialPlan, scenario):
    """Fill the Monte Carlo columns of an analytic OutageReport.

    One shared set of draws serves every (m, k); per-entry discard counts
    add the mc-trial-discards flag.
    """
    import dataclasses

    from ..outage import FLAG_MC_DISCARDS

    table = estimate_outage_table(plan, scenario)
    m_streams, k_clusters = report.p_exact_approx.shape
    p_mc = np.empty((m_streams, k_clusters))
    ci_lo = np.empty((m_streams, k_clusters))
    ci_hi = np.empty((m_streams, k_clusters))
    flags = {mk: list(v) for mk, v in report.flags}
    for (mi, ki), est in table.items():
        p_mc[mi, ki] = est.p_hat
        ci_lo[mi, ki] = est.ci95[0]
        ci_hi[mi, ki] = est.ci95[1]
        if est.discarded:
            flags.setdefault((mi, ki), []).append(FLAG_MC_DISCARDS)
    rates = scenario.rates.rates
    tg_mc = float(np.sum((1.0 - p_mc) * rates))
    return dataclasses.replace(
        report,
        p_mc=p_mc,
        mc_ci_low=ci_lo,
        mc_ci_high=ci_hi,
        goodput_mc=tg_mc,
        flags=tuple(sorted((mk, tuple(v)) for mk, v in flags.items())),
    )
