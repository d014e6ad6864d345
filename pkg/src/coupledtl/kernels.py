"""Backend selection for the hot loops.

The compiled extension is used when it was built; set ``COUPLEDTL_PURE_PYTHON=1``
to force the numpy fallback. Both backends produce bitwise-identical output.
"""
import os

import numpy as np

from . import _fallback

BACKEND = "python"
_impl = _fallback

if not os.environ.get("COUPLEDTL_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _fallback


def available_backends():
    names = {"python": _fallback}
    try:
        from . import _kernels

        names["cython"] = _kernels
    except ImportError:
        pass
    return names


def hard_threshold(a: np.ndarray, tau: int, backend=None) -> np.ndarray:
    """Keep the ``tau`` largest-magnitude entries of each column of ``a``.

    Ties at the cut-off keep the lowest row index.
    """
    impl = _impl if backend is None else available_backends()[backend]
    return impl.hard_threshold(np.asarray(a, dtype=np.float64), int(tau))


def label_min(dist: np.ndarray, label_idx: np.ndarray, n_labels: int, backend=None) -> np.ndarray:
    """Reduce a (probes, columns) distance matrix to (probes, labels) by column-wise minimum."""
    impl = _impl if backend is None else available_backends()[backend]
    idx = np.ascontiguousarray(label_idx, dtype=np.intp)
    return impl.label_min(np.asarray(dist, dtype=np.float64), idx, int(n_labels))
