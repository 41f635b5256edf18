"""Trial-kernel selection: compiled extension with pure-numpy fallback.

Both kernels take the same (draws, sqrt-factor) inputs and return
bit-identical (stats, valid) arrays; `use_backend` exists for tests and
the benchmark, normal code just calls `stats_from_draws`.
"""

import os

import numpy as np

from . import _backend_py

try:
    from . import _kernel as _kernel_cy
except ImportError:  # extension not built; numpy path covers everything
    _kernel_cy = None


def available_backends():
    names = ["numpy"]
    if _kernel_cy is not None:
        names.insert(0, "cython")
    return tuple(names)


def _resolve(name):
    if name in (None, "auto"):
        return "cython" if _kernel_cy is not None else "numpy"
    if name == "cython" and _kernel_cy is None:
        raise RuntimeError("compiled kernel requested but not built")
    if name not in ("cython", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    return name


_ACTIVE = _resolve(os.environ.get("NOMALINK_MC_BACKEND", "auto"))


def active_backend() -> str:
    return _ACTIVE


def use_backend(name) -> str:
    """Switch kernels explicitly; returns the previously active name."""
    global _ACTIVE
    prev = _ACTIVE
    _ACTIVE = _resolve(name)
    return prev


def stats_from_draws(draws, a_sqrt, b_sqrt, backend=None):
    """ZF statistics [(Z^H Z)^-1]_mm per trial from standard-normal draws.

    draws: (n, n_r, m, 2); a_sqrt/b_sqrt: Hermitian square roots of R_r
    and R_t'. Returns (stats (n, m), valid (n,) bool).
    """
    a = np.ascontiguousarray(a_sqrt, dtype=complex)
    b = np.ascontiguousarray(b_sqrt, dtype=complex)
    args = (
        np.ascontiguousarray(draws),
        np.ascontiguousarray(a.real),
        np.ascontiguousarray(a.imag),
        np.ascontiguousarray(b.real),
        np.ascontiguousarray(b.imag),
    )
    name = _ACTIVE if backend is None else _resolve(backend)
    if name == "cython":
        return _kernel_cy.stats_from_draws(*args)
    return _backend_py.stats_from_draws(*args)
