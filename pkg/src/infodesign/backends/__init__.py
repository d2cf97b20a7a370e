"""Backend selection for the grid-sweep kernels.

Two implementations of the hot loops exist: compiled numba kernels
(default when numba imports) and a pure-numpy fallback.  Selection is by
the ``INFODESIGN_BACKEND`` environment variable (``numba`` | ``numpy``;
anything else errors, unset/``auto`` picks numba when available).  Both
produce bit-identical tables; the benchmark under ``benchmarks/``
compares their speed.
"""

from __future__ import annotations

import os

from ..errors import ConfigError

BACKEND_ENV = "INFODESIGN_BACKEND"

_NUMBA_IMPORT_ERROR = None
try:
    from . import _numba as _numba_backend
except ImportError as err:  # pragma: no cover - depends on environment
    _numba_backend = None
    _NUMBA_IMPORT_ERROR = err

from . import _numpy as _numpy_backend


def numba_available() -> bool:
    return _numba_backend is not None


def active_backend_name() -> str:
    raw = os.environ.get(BACKEND_ENV, "").strip().lower()
    if raw in ("", "auto"):
        return "numba" if numba_available() else "numpy"
    if raw == "numba":
        if not numba_available():
            raise ConfigError(
                f"{BACKEND_ENV}=numba requested but numba is not importable: "
                f"{_NUMBA_IMPORT_ERROR}"
            )
        return "numba"
    if raw == "numpy":
        return "numpy"
    raise ConfigError(f"unknown {BACKEND_ENV} value {raw!r}; use 'numba' or 'numpy'")


def get_backend(name: str | None = None):
    name = name or active_backend_name()
    if name == "numba":
        if _numba_backend is None:
            raise ConfigError("numba backend requested but numba is not importable")
        return _numba_backend
    if name == "numpy":
        return _numpy_backend
    raise ConfigError(f"unknown backend {name!r}")


def set_workers(workers: int | None) -> None:
    """Bound the compiled backend's thread count; no-op for the numpy backend."""
    if not workers or not numba_available():
        return
    import numba

    numba.set_num_threads(max(1, min(int(workers), numba.config.NUMBA_NUM_THREADS)))


def numba_model_kernels():
    """Compiled elementwise kernels for built-in system models, or None."""
    if _numba_backend is None:
        return None
    return {"fly_step_jac": _numba_backend.fly_step_jac}


def numba_obs_kernels():
    """Compiled elementwise kernels for built-in observation models, or None."""
    if _numba_backend is None:
        return None
    return {"poisson_trap_info": _numba_backend.poisson_trap_info}


def make_gaussian_info_kernel(info_diag):
    if _numba_backend is None:
        return None
    return _numba_backend.make_gaussian_info_kernel(info_diag)
