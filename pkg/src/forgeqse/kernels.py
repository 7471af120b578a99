"""Kernel dispatch: the compiled extension when built, numpy otherwise.

Set ``FORGEQSE_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

try:
    if os.environ.get("FORGEQSE_PURE_PYTHON"):
        raise ImportError("pure-Python kernels requested")
    from . import _kernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _kernels_py
    BACKEND = "python"

pauli_expectations = _impl.pauli_expectations
parity_expectations = _impl.parity_expectations
slater_condon = _impl.slater_condon
casci_elements = _impl.casci_elements

__all__ = [
    "BACKEND",
    "casci_elements",
    "parity_expectations",
    "pauli_expectations",
    "slater_condon",
]
