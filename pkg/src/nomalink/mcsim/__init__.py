"""Monte Carlo oracle for the zero-forcing outage event.

Channels are sampled from the Kronecker law Z = R_r^(1/2) Z_w R_t'^(1/2)
and the sufficient statistic [(Z^H Z)^-1]_mm is compared against the SIC
threshold. Trials are organized in fixed 2^16-trial blocks, each with its
own counter-based random stream keyed by (seed, block index), so
estimates are bit-reproducible and independent of how blocks are
partitioned across workers.

The per-trial linear algebra runs on one of two kernels selected at
import: a compiled Cython extension or a pure-numpy fallback that
performs the same operations in the same order (bit-identical results).
Set NOMALINK_MC_BACKEND={auto,cython,numpy} to override.
"""

from .backends import active_backend, available_backends, use_backend
from .core import (
    BLOCK_TRIALS,
    McEstimate,
    TrialPlan,
    estimate_goodput,
    estimate_outage,
    estimate_outage_table,
    hermitian_sqrt,
    outage_trial,
    report_with_mc,
    sample_effective_channel,
    sample_effective_channels,
    zf_statistic,
)

__all__ = [
    "BLOCK_TRIALS",
    "McEstimate",
    "TrialPlan",
    "active_backend",
    "available_backends",
    "estimate_goodput",
    "estimate_outage",
    "estimate_outage_table",
    "hermitian_sqrt",
    "outage_trial",
    "report_with_mc",
    "sample_effective_channel",
    "sample_effective_channels",
    "use_backend",
    "zf_statistic",
]
