"""Outage, goodput, and resource optimization for downlink virtual
MIMO-NOMA links with zero-forcing receivers under Kronecker-correlated
Rayleigh fading.

Subpackages and modules:

* ``corrchan`` - cluster geometry, path loss, correlation matrices.
* ``specfun``  - the determinant-ratio series kernel F_tilde.
* ``outage``   - exact-approximate and asymptotic outage, goodput, DMT.
* ``mcsim``    - seeded, partition-invariant Monte Carlo oracle.
* ``optim``    - closed-form power allocation, bisection rate selection,
  alternating joint optimization.
* ``scenario`` / ``cli`` - config files, sweeps, CSV emission.
"""

__version__ = "0.1.0"
