"""Kernel backend selection: numba-compiled loops or pure-numpy fallbacks.

Every hot kernel in ``_kernels`` has two implementations performing the same
scalar operations in the same per-element order, so switching the backend
never changes results, only speed.

Resolution order for the active backend:
  1. an explicit :func:`set_backend` call (used by tests and the benchmark),
  2. the ``SKYMATCH_BACKEND`` environment variable (``auto``/``numba``/``numpy``),
  3. ``auto``: numba when importable, numpy otherwise.
"""

from __future__ import annotations

import functools
import os

ENV_VAR = "SKYMATCH_BACKEND"
CHOICES = ("auto", "numba", "numpy")

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    HAVE_NUMBA = False

_forced: str | None = None


def set_backend(name: str | None) -> None:
    """Force a backend for this process; None restores env/auto resolution."""
    global _forced
    if name is None:
        _forced = None
        return
    _resolve(name)  # validate eagerly
    _forced = name


def _resolve(name: str) -> str:
    if name not in CHOICES:
        raise ValueError(f"unknown backend {name!r}; choose from {CHOICES}")
    if name == "numba" and not HAVE_NUMBA:
        raise ValueError("backend 'numba' requested but numba is not importable")
    if name == "auto":
        return "numba" if HAVE_NUMBA else "numpy"
    return name


def active() -> str:
    """The backend that will run the next kernel call: 'numba' or 'numpy'."""
    if _forced is not None:
        return _resolve(_forced)
    return _resolve(os.environ.get(ENV_VAR, "auto"))


def dispatch(numpy_fn, numba_fn):
    """Wrap a (numpy, numba) implementation pair behind one callable."""
    if numba_fn is None:
        return numpy_fn

    @functools.wraps(numpy_fn)
    def call(*args):
        if active() == "numba":
            return numba_fn(*args)
        return numpy_fn(*args)

    return call
