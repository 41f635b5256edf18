"""Scalar special functions and the determinant-ratio series behind F-tilde.

F_tilde(x) is the CDF-style outage kernel: a ratio of determinants over
eigenvalue-power columns of the receive correlation matrix. Three routes
are provided and cross-validated:

* ``f_tilde_series``  - the full expansion: a finite log-term sum (only
  present for M > 1) plus an infinite power-series tail, each term a
  determinant with one replaced column over the Vandermonde denominator.
* ``f_tilde_m1``      - closed determinant form for M = 1.
* ``f_tilde_equal``   - regularized lower incomplete gamma for identical
  eigenvalues (the confluent limit).

``f_tilde`` dispatches between them. Repeated or nearly repeated
eigenvalues make the determinant ratio 0/0; fully clustered spectra are
routed to the equal-eigenvalue form and partial clusters are split by a
small symmetric relative perturbation (induced error is O(1e-5) in the
perturbed eigenvalues, far below the series tolerance at the x ranges of
interest).
"""

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import special as sps

from .errors import DomainError, SeriesCancellationError

# Relative eigenvalue gap below which a spectrum counts as clustered, and
# the relative perturbation used to split partial clusters.
CLUSTER_REL_TOL = 1e-6
CLUSTER_PERTURB = 1e-5

_SERIES_RTOL = 1e-12
_SERIES_MAX_TERMS = 500
# Lost-digit ratio beyond which the double-precision sum is re-done with
# mpmath rather than trusted.
_CANCEL_ESCALATE = 1e4


def ln_gamma(x: float) -> float:
    """Natural log of Gamma(x) for x > 0."""
    if x <= 0:
        raise DomainError(f"ln_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def reg_lower_gamma(s: float, x: float) -> float:
    """Regularized lower incomplete gamma gamma(s, x) / Gamma(s)."""
    if s <= 0:
        raise DomainError(f"reg_lower_gamma requires s > 0, got {s}")
    if x < 0:
        raise DomainError(f"reg_lower_gamma requires x >= 0, got {x}")
    return float(sps.gammainc(s, x))


def vandermonde_det(lambdas) -> float:
    """prod_{i<j} (lambda_i - lambda_j), the power-column determinant.

    Exact product form (signed); zero for repeated values, which callers
    must screen out themselves.
    """
    lams = np.asarray(lambdas, dtype=float)
    if lams.ndim != 1 or lams.size < 1:
        raise DomainError("need a nonempty 1-D eigenvalue list")
    out = 1.0
    for i in range(lams.size):
        for j in range(i + 1, lams.size):
            out *= lams[i] - lams[j]
    return out


@dataclass(frozen=True)
class EigenSpectrum:
    """Positive receive-correlation eigenvalues, descending."""

    lambdas: tuple

    def __post_init__(self):
        lams = tuple(float(v) for v in self.lambdas)
        if len(lams) < 1:
            raise DomainError("spectrum must contain at least one eigenvalue")
        if any(v <= 0 for v in lams):
            raise DomainError("eigenvalues must be strictly positive")
        if any(lams[i] < lams[i + 1] for i in range(len(lams) - 1)):
            raise DomainError("eigenvalues must be sorted descending")
        object.__setattr__(self, "lambdas", lams)

    @property
    def spread(self) -> float:
        return (self.lambdas[0] - self.lambdas[-1]) / self.lambdas[0]


@dataclass(frozen=True)
class FTildeParams:
    """Shape parameters of F_tilde: device count, stream count, spectrum."""

    n_r: int
    m: int
    spectrum: EigenSpectrum

    def __post_init__(self):
        if not 1 <= self.m <= self.n_r:
            raise DomainError(f"need 1 <= m <= n_r, got m={self.m}, n_r={self.n_r}")
        if len(self.spectrum.lambdas) != self.n_r:
            raise DomainError("spectrum length must equal n_r")


def resolve_spectrum(lambdas, rel_tol: float = CLUSTER_REL_TOL):
    """Classify a spectrum for the determinant-ratio formulas.

    Returns ("equal", lambda0) when all eigenvalues coincide within
    rel_tol, else ("distinct", lams) where nearly coincident neighbours
    have been split by a symmetric relative perturbation.
    """
    lams = np.asarray(lambdas, dtype=float)
    if (lams[0] - lams[-1]) / lams[0] < rel_tol:
        return "equal", float(lams.mean())
    out = lams.copy()
    i = 0
    while i < lams.size:
        j = i
        while j + 1 < lams.size and (lams[j] - lams[j + 1]) < rel_tol * lams[j]:
            j += 1
        if j > i:
            g = j - i + 1
            offsets = np.linspace(1.0, -1.0, g)
            out[i : j + 1] = lams[i : j + 1] * (1.0 + CLUSTER_PERTURB * offsets)
        i = j + 1
    return "distinct", out


def _det_replaced(col, lams, n) -> float:
    """Determinant with first column replaced; power columns lam^(n-j), j>=2.

    Partial-pivoted LU via numpy; the 1x1 case degenerates to col[0].
    """
    if n == 1:
        return float(col[0])
    mat = np.empty((n, n), dtype=float)
    mat[:, 0] = col
    for j in range(2, n + 1):
        mat[:, j - 1] = lams ** (n - j)
    return float(np.linalg.det(mat))


def _det_replaced_mp(col, lams, n):
    if n == 1:
        return col[0]
    mat = mpmath.matrix(n, n)
    for i in range(n):
        mat[i, 0] = col[i]
        for j in range(2, n + 1):
            mat[i, j - 1] = lams[i] ** (n - j)
    return mpmath.det(mat)


def f_tilde_equal(x: float, lambda0: float, n_r: int, m: int) -> float:
    """F_tilde when all eigenvalues equal lambda0: gamma(n_r-m+1, x/lambda0)
    regularized. Exact, not an approximation, in this case."""
    if x < 0:
        raise DomainError("x must be nonnegative")
    if lambda0 <= 0:
        raise DomainError("lambda0 must be positive")
    return reg_lower_gamma(n_r - m + 1, x / lambda0)


def f_tilde_m1(x: float, lambdas) -> float:
    """Closed M = 1 form: first column lam^(n-1) (1 - exp(-x/lam)).

    Clustered spectra are routed to the equal-eigenvalue / perturbation
    path rather than evaluated at a 0/0 determinant ratio.
    """
    if x < 0:
        raise DomainError("x must be nonnegative")
    lams = np.asarray(lambdas, dtype=float)
    n = lams.size
    if x == 0.0:
        return 0.0
    kind, resolved = resolve_spectrum(lams)
    if kind == "equal":
        return f_tilde_equal(x, resolved, n, 1)
    lams = resolved
    col = lams ** (n - 1) * (-np.expm1(-x / lams))
    val = _det_replaced(col, lams, n) / vandermonde_det(lams)
    return min(max(val, 0.0), 1.0)


def _series_terms_double(x, lams, n, m):
    """One pass of the expansion in double precision.

    Returns (total, max_running_mag, converged). Terms are accumulated
    with Kahan compensation; the tail is advanced by the term recurrence
    w_i <- w_i * x * (nu-n+1) / (lam_i * (nu+1) * (nu-n+m)) so that huge
    powers and factorials never appear separately.
    """
    vdm = vandermonde_det(lams)
    pref = float(math.factorial(n - 1) // math.factorial(n - m)) / vdm

    total = 0.0
    comp = 0.0
    max_mag = 0.0

    def add(term):
        nonlocal total, comp, max_mag
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t
        max_mag = max(max_mag, abs(total))

    # Log-term block, present only for m > 1: nu in [n-m+1, n-1].
    sign_log = -1.0 if (n - m) % 2 else 1.0
    log_lams = np.log(lams)
    for nu in range(n - m + 1, n):
        denom = (
            math.factorial(nu)
            * math.factorial(nu - (n - m + 1))
            * math.factorial(n - 1 - nu)
        )
        col = lams ** (n - nu - 1) * log_lams * (x**nu)
        term = pref * sign_log / denom * _det_replaced(col, lams, n)
        if not math.isfinite(term):
            return total, math.inf, False
        add(term)

    # Power-series tail from nu = n upward.
    w = (x / lams) ** n * lams ** (n - 1) / (
        math.factorial(n) * math.factorial(m - 1)
    )
    sign = 1.0 if (n + m) % 2 == 0 else -1.0
    z_eff = x / lams.min()
    converged = False
    # Overflow here is an expected signal (handled by the caller's
    # extended-precision retry), not worth a warning.
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(_SERIES_MAX_TERMS):
            nu = n + j
            term = pref * sign * _det_replaced(w, lams, n)
            if not math.isfinite(term):
                return total, math.inf, False
            add(term)
            bound = abs(term) * z_eff / (nu - n + 1)
            if j >= 1 and bound < _SERIES_RTOL * max(abs(total), 1e-300):
                converged = True
                break
            w = w * (x * (nu - n + 1)) / (lams * (nu + 1) * (nu - n + m))
            sign = -sign
    return total, max_mag, converged


def _series_terms_mp(x, lams, n, m, dps):
    """Same expansion evaluated with mpmath at `dps` digits."""
    with mpmath.workdps(dps):
        xm = mpmath.mpf(x)
        lm = [mpmath.mpf(v) for v in lams]
        vdm = mpmath.mpf(1)
        for i in range(n):
            for j in range(i + 1, n):
                vdm *= lm[i] - lm[j]
        pref = mpmath.mpf(math.factorial(n - 1) // math.factorial(n - m)) / vdm

        total = mpmath.mpf(0)
        max_mag = mpmath.mpf(0)
        sign_log = -1 if (n - m) % 2 else 1
        for nu in range(n - m + 1, n):
            denom = (
                math.factorial(nu)
                * math.factorial(nu - (n - m + 1))
                * math.factorial(n - 1 - nu)
            )
            col = [v ** (n - nu - 1) * mpmath.log(v) * xm**nu for v in lm]
            total += pref * sign_log / mpmath.mpf(denom) * _det_replaced_mp(col, lm, n)
            max_mag = max(max_mag, abs(total))

        w = [
            (xm / v) ** n * v ** (n - 1) / (math.factorial(n) * math.factorial(m - 1))
            for v in lm
        ]
        sign = 1 if (n + m) % 2 == 0 else -1
        z_eff = xm / min(lm)
        converged = False
        for j in range(_SERIES_MAX_TERMS):
            nu = n + j
            term = pref * sign * _det_replaced_mp(w, lm, n)
            total += term
            max_mag = max(max_mag, abs(total))
            bound = abs(term) * z_eff / (nu - n + 1)
            if j >= 1 and bound < _SERIES_RTOL * max(abs(total), mpmath.mpf("1e-300")):
                converged = True
                break
            w = [
                wi * (xm * (nu - n + 1)) / (v * (nu + 1) * (nu - n + m))
                for wi, v in zip(w, lm)
            ]
            sign = -sign
        return float(total), float(max_mag), converged


def _tail_reach(x, lams, n, m, pref_abs):
    """Log-space dry run of the dominant tail-term magnitude.

    Tracks the lambda_min component of the replaced column (the growth
    driver) through the same term recurrence as the real sum. Returns
    (converges_within_cap, peak_decimal_digits); the digit count sizes
    the working precision needed to sum the alternating tail to ~1e-12
    absolute.
    """
    lam_min = float(np.min(lams))
    z = x / lam_min
    ln_term = (
        math.log(pref_abs)
        + n * math.log(z)
        + (n - 1) * math.log(lam_min)
        - math.lgamma(n + 1)
        - math.lgamma(m)
    )
    peak = ln_term
    target = math.log(1e-12)
    for j in range(_SERIES_MAX_TERMS):
        nu = n + j
        peak = max(peak, ln_term)
        if j >= 1 and ln_term + math.log(z / (j + 1)) < target:
            return True, max(peak, 0.0) / math.log(10)
        ln_term += math.log(x * (j + 1) / (lam_min * (nu + 1) * (j + m)))
    return False, max(peak, 0.0) / math.log(10)


def f_tilde_series(x: float, p: FTildeParams) -> float:
    """Full series evaluation of F_tilde.

    Clustered spectra are resolved first (equal-eigenvalue route or
    perturbation). When the alternating tail costs more than ~4 digits of
    cancellation in double precision, the whole sum is recomputed with
    mpmath at a precision sized to the analytic term peak; when the term
    cap cannot cover the tail at all, SeriesCancellationError carries the
    last partial sum so callers can fall back to Monte Carlo.
    """
    if x < 0:
        raise DomainError("x must be nonnegative")
    if x == 0.0:
        return 0.0
    n, m = p.n_r, p.m
    kind, resolved = resolve_spectrum(np.asarray(p.spectrum.lambdas))
    if kind == "equal":
        return f_tilde_equal(x, resolved, n, m)
    lams = resolved

    total, max_mag, converged = _series_terms_double(x, lams, n, m)
    lost = max_mag / max(abs(total), 1e-300)
    if converged and lost < _CANCEL_ESCALATE and math.isfinite(total):
        return min(max(total, 0.0), 1.0)

    pref_abs = float(
        math.factorial(n - 1) // math.factorial(n - m)
    ) / abs(vandermonde_det(lams))
    reachable, peak_digits = _tail_reach(x, lams, n, m, pref_abs)
    if not reachable:
        raise SeriesCancellationError(
            f"tail needs more than {_SERIES_MAX_TERMS} terms at x={x}",
            partial_sum=total if math.isfinite(total) else None,
        )
    dps = min(400, 40 + int(peak_digits))
    total, max_mag, converged = _series_terms_mp(x, lams, n, m, dps)
    if not converged:
        raise SeriesCancellationError(
            f"series did not converge within {_SERIES_MAX_TERMS} terms at x={x}",
            partial_sum=total,
        )
    return min(max(total, 0.0), 1.0)


def f_tilde(x: float, p: FTildeParams) -> float:
    """Dispatch to the cheapest exact route for the given parameters."""
    if x < 0:
        raise DomainError("x must be nonnegative")
    if x == 0.0:
        return 0.0
    lams = np.asarray(p.spectrum.lambdas)
    kind, resolved = resolve_spectrum(lams)
    if kind == "equal":
        return f_tilde_equal(x, resolved, p.n_r, p.m)
    if p.m == 1:
        return f_tilde_m1(x, lams)
    return f_tilde_series(x, p)
