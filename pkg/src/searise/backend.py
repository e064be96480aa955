"""Kernel backend selection.

Prefers the compiled demeaning kernel; falls back to the NumPy version when
the extension is missing or ``SEARISE_PURE_PYTHON`` is set. Both expose the
same ``demean(data, codes, levels, tol, max_iter)`` contract and produce
identical results; ``benchmarks/bench_demean.py`` compares their speed.
"""

from __future__ import annotations

import os

from . import _demean_py

if os.environ.get("SEARISE_PURE_PYTHON"):
    demean = _demean_py.demean
    BACKEND = "python"
else:
    try:
        from . import _demean_cy

        demean = _demean_cy.demean
        BACKEND = "cython"
    except ImportError:
        demean = _demean_py.demean
        BACKEND = "python"


def available_backends() -> dict[str, object]:
    """Map backend name to its demean function (for tests and benchmarks)."""
    out = {"python": _demean_py.demean}
    try:
        from . import _demean_cy

        out["cython"] = _demean_cy.demean
    except ImportError:
        pass
    return out
