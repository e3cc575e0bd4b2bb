"""Backend selection for the Pauli-string kernels.

The compiled extension is used when it was built; otherwise the numpy
fallback is loaded.  Setting ``MAXENT_COMPAT_PURE_PYTHON=1`` forces the
fallback (used by the benchmark and the backend-equivalence tests).
"""

import os

from maxent_compat import _pauli_py

if os.environ.get("MAXENT_COMPAT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pauli_py
else:
    try:
        from maxent_compat import _pauli_ext as _impl
    except ImportError:  # extension not built
        _impl = _pauli_py

BACKEND = "cython" if _impl is not _pauli_py else "python"

pauli_sum_dense = _impl.pauli_sum_dense
pauli_expectations = _impl.pauli_expectations
apply_paulis = _impl.apply_paulis

__all__ = ["BACKEND", "pauli_sum_dense", "pauli_expectations", "apply_paulis"]
