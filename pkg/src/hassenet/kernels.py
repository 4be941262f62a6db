"""Kernel dispatch: the compiled extension when available, numpy otherwise.

Set ``HASSENET_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

H, S, SDG, X, Y, Z, CNOT, CZ, SWAP = range(9)

GATE_CODES = {
    "H": H, "S": S, "SDG": SDG, "X": X, "Y": Y, "Z": Z,
    "CNOT": CNOT, "CX": CNOT, "CZ": CZ, "SWAP": SWAP,
}
TWO_QUBIT = frozenset({CNOT, CZ, SWAP})

if os.environ.get("HASSENET_PURE_PYTHON"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

apply_gate = _impl.apply_gate
apply_program = _impl.apply_program
measure_z = _impl.measure_z
gf2_rank = _impl.gf2_rank


def load(backend: str):
    """Return the kernel module for ``backend`` ("cython" or "python")."""
    if backend == "python":
        return _kernels_py
    from . import _kernels  # type: ignore[attr-defined]

    return _kernels
