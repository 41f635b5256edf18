"""Deterministic channel environment: geometry, path loss, correlation.

Everything downstream (outage formulas, Monte Carlo sampling, optimizers)
consumes the quantities built here: sorted cluster distances with Friis
path loss, exponential correlation matrices at both link ends, and the
per-stream diagonal of (V^H R_t V)^-1 seen by the zero-forcing receiver.
All types are immutable after construction.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateBeamformingError, DomainError

_UNIT_NORM_TOL = 1e-12


def exponential_correlation(rho: float, n: int) -> np.ndarray:
    """Correlation matrix with entries rho^|i-j| (unit diagonal, PD for rho<1)."""
    if not 0.0 <= rho < 1.0:
        raise DomainError(f"correlation coefficient must lie in [0,1), got {rho}")
    if n < 1:
        raise DomainError(f"matrix dimension must be >= 1, got {n}")
    idx = np.arange(n)
    mat = rho ** np.abs(idx[:, None] - idx[None, :])
    mat.flags.writeable = False
    return mat


def friis_path_loss(d: float, alpha: float, k_friis: float) -> float:
    """Free-space power law K * d^-alpha with reference distance 1 m."""
    if d <= 0:
        raise DomainError(f"distance must be positive, got {d}")
    return k_friis * d ** (-alpha)


def identity_selection(n_t: int, m: int) -> np.ndarray:
    """Default beamforming: first m columns of the n_t x n_t identity."""
    v = np.eye(n_t, m, dtype=complex)
    v.flags.writeable = False
    return v


@dataclass(frozen=True)
class SystemConfig:
    """Scenario root: antenna counts, stream count, propagation constants.

    n_streams is bounded by min(n_t, n_r); snr_db is the average transmit
    SNR in dB (converted once to linear via `gamma_bar`); beamforming is
    an n_t x m_streams complex matrix with unit-norm columns, defaulting
    to the identity-selection matrix.
    """

    n_t: int
    n_r: int
    n_streams: int
    alpha: float = 3.0
    k_friis: float = 1.0
    snr_db: float = 70.0
    rho_t: float = 0.0
    rho_r: float = 0.0
    beamforming: np.ndarray = None

    def __post_init__(self):
        if self.n_t < 1 or self.n_r < 1:
            raise DomainError("antenna/device counts must be >= 1")
        if not 1 <= self.n_streams <= min(self.n_t, self.n_r):
            raise DomainError(
                f"need 1 <= n_streams <= min(n_t, n_r); got M={self.n_streams}, "
                f"N_t={self.n_t}, N_r={self.n_r}"
            )
        if self.alpha < 2:
            raise DomainError(f"path-loss exponent must be >= 2, got {self.alpha}")
        if self.k_friis <= 0:
            raise DomainError("reference received power must be positive")
        for rho in (self.rho_t, self.rho_r):
            if not 0.0 <= rho < 1.0:
                raise DomainError(f"correlation coefficient must lie in [0,1), got {rho}")
        if self.beamforming is None:
            v = identity_selection(self.n_t, self.n_streams)
        else:
            v = np.array(self.beamforming, dtype=complex)
            if v.shape != (self.n_t, self.n_streams):
                raise DomainError(
                    f"beamforming must be {self.n_t}x{self.n_streams}, got {v.shape}"
                )
            norms = np.linalg.norm(v, axis=0)
            if np.any(np.abs(norms - 1.0) > _UNIT_NORM_TOL):
                raise DomainError("beamforming columns must have unit Euclidean norm")
            v.flags.writeable = False
        object.__setattr__(self, "beamforming", v)

    @property
    def gamma_bar(self) -> float:
        """Average transmit SNR on the linear scale."""
        return 10.0 ** (self.snr_db / 10.0)

    @property
    def decay_order(self) -> int:
        """High-SNR outage decay exponent N_r - M + 1."""
        return self.n_r - self.n_streams + 1


@dataclass(frozen=True)
class ClusterSet:
    """Cluster distances sorted ascending, with per-cluster Friis path loss.

    `order` maps sorted position -> index in the caller's input, so results
    can be reported against the original labelling.
    """

    distances: np.ndarray
    path_loss: np.ndarray
    positions: np.ndarray = None
    order: np.ndarray = None

    def __post_init__(self):
        d = np.asarray(self.distances, dtype=float)
        if d.ndim != 1 or d.size < 1:
            raise DomainError("need at least one cluster distance")
        if np.any(d <= 0):
            raise DomainError("cluster distances must be positive")
        if np.any(np.diff(d) < 0):
            raise DomainError("distances must be sorted ascending")
        ell = np.asarray(self.path_loss, dtype=float)
        if ell.shape != d.shape or np.any(ell <= 0):
            raise DomainError("path loss must be positive, one entry per cluster")
        for name in ("distances", "path_loss", "positions", "order"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.array(arr)  # own copy; freezing must not leak out
                arr.flags.writeable = False
                object.__setattr__(self, name, arr)

    @property
    def k_clusters(self) -> int:
        return self.distances.size


def sort_clusters(positions, alpha: float, k_friis: float) -> ClusterSet:
    """Build a ClusterSet from 2-D coordinates (base station at the origin).

    Accepts either an iterable of (x, y) coordinates in meters or a flat
    iterable of distances. Sorting is stable, so equal distances keep
    their input order.
    """
    arr = np.asarray(positions, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 2:
        dist = np.hypot(arr[:, 0], arr[:, 1])
        pos = arr
    elif arr.ndim == 1:
        dist = arr.copy()
        pos = None
    else:
        raise DomainError("positions must be (x, y) pairs or plain distances")
    if np.any(dist <= 0):
        raise DomainError("clusters must be strictly away from the base station")
    order = np.argsort(dist, kind="stable")
    dist = dist[order]
    ell = np.array([friis_path_loss(d, alpha, k_friis) for d in dist])
    return ClusterSet(
        distances=dist,
        path_loss=ell,
        positions=None if pos is None else pos[order],
        order=order,
    )


def effective_transmit_stats(v: np.ndarray, r_t: np.ndarray):
    """Return (V^H R_t V, diagonal of its inverse).

    The inverse-diagonal entries are the per-stream noise-enhancement
    factors of the zero-forcing receiver; they are real and positive for
    any nonsingular V^H R_t V.
    """
    v = np.asarray(v, dtype=complex)
    r_t = np.asarray(r_t, dtype=complex)
    r_eff = v.conj().T @ r_t @ v
    # Hermitize to kill rounding asymmetry before inverting.
    r_eff = 0.5 * (r_eff + r_eff.conj().T)
    if np.linalg.cond(r_eff) > 1e12:
        raise DegenerateBeamformingError(
            "V^H R_t V is singular or near-singular; zero-forcing undefined"
        )
    inv_diag = np.diag(np.linalg.inv(r_eff)).real
    if np.any(inv_diag <= 0):
        raise DegenerateBeamformingError("nonpositive inverse diagonal entry")
    r_eff.flags.writeable = False
    inv_diag.flags.writeable = False
    return r_eff, inv_diag


@dataclass(frozen=True)
class CorrelationPair:
    """Transmit/receive correlation and the derived per-stream scalars."""

    r_t: np.ndarray
    r_r: np.ndarray
    r_r_eigs: np.ndarray = field(init=False)
    r_t_eff: np.ndarray = field(init=False)
    inv_diag: np.ndarray = field(init=False)
    beamforming: np.ndarray = None

    def __post_init__(self):
        r_t = np.asarray(self.r_t, dtype=complex)
        r_r = np.asarray(self.r_r, dtype=complex)
        v = self.beamforming
        if v is None:
            v = identity_selection(r_t.shape[0], r_t.shape[0])
        eigs = np.linalg.eigvalsh(r_r)
        if np.any(eigs < -1e-12):
            raise DomainError("receive correlation matrix must be PSD")
        eigs = np.sort(np.clip(eigs.real, 0.0, None))[::-1].copy()
        r_eff, inv_diag = effective_transmit_stats(v, r_t)
        for name, val in (
            ("r_t", r_t),
            ("r_r", r_r),
            ("r_r_eigs", eigs),
            ("r_t_eff", r_eff),
            ("inv_diag", inv_diag),
            ("beamforming", v),
        ):
            val = np.asarray(val)
            if val.flags.writeable:
                val.flags.writeable = False
            object.__setattr__(self, name, val)


def correlation_pair(cfg: SystemConfig) -> CorrelationPair:
    """Exponential-model correlation pair for a system configuration."""
    return CorrelationPair(
        r_t=exponential_correlation(cfg.rho_t, cfg.n_t),
        r_r=exponential_correlation(cfg.rho_r, cfg.n_r),
        beamforming=cfg.beamforming,
    )
