"""Pivot-kernel selection.

The compiled extension is preferred when built; ``CUTRANK_PURE_PYTHON=1``
in the environment forces the numpy fallback.  Callers look the function
up through this module (``kernel.simplex_iterate``) so the backend can be
swapped at runtime, which the benchmark uses to compare both.
"""

import os

from cutrank import _simplex_py

_IMPLS = {"python": _simplex_py.simplex_iterate}

try:
    from cutrank import _speedups

    _IMPLS["compiled"] = _speedups.simplex_iterate
except ImportError:
    _speedups = None

if os.environ.get("CUTRANK_PURE_PYTHON"):
    _active = "python"
elif "compiled" in _IMPLS:
    _active = "compiled"
else:
    _active = "python"

simplex_iterate = _IMPLS[_active]


def backend():
    """Name of the active backend: 'compiled' or 'python'."""
    return _active


def available_backends():
    return sorted(_IMPLS)


def set_backend(name):
    """Switch the pivot kernel; raises KeyError for unknown/unbuilt names."""
    global _active, simplex_iterate
    simplex_iterate = _IMPLS[name]
    _active = name
