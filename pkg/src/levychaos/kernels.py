"""Backend selection for the batch kernel.

The compiled extension is used when it imports; setting the environment
variable ``LEVYCHAOS_PURE_PYTHON=1`` forces the numpy implementation.
"""
import os

import numpy as np

from . import _kernels_py

if os.environ.get("LEVYCHAOS_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _kernels_py
        BACKEND = "python"


def tree_terminal(knots, grid_inc, seg_F, parent, member, root_value, at0, comp, dW,
                  offsets, jtimes, jvals, backend=None):
    """Terminal values of iterated integrals arranged as a tree of words.

    Node 0 is the root ``J_0 = root_value``.  Node ``v > 0`` integrates the
    left limit of ``parent[v]`` times the step factor ``seg_F[:, v]`` against
    ``X^{member[v]}``, so a chain of nodes is one iterated integral and
    siblings share their prefix.

    Parameters
    ----------
    knots : (S+1,) float
        Static times: grid, tensor breakpoints and the horizon.
    grid_inc : (S+1,) int
        Column of ``dW`` booked at each knot, or -1.
    seg_F : (S, Nn) float
        Factor of each node on ``[knots[s], knots[s+1])``.
    parent, member : (Nn,) int
        Tree structure (``parent[v] < v``) and martingale index per node.
    root_value : float
    at0, comp : (R,) float
        ``f(0)`` and compensator rate ``nu(f~)`` per martingale.
    dW : (P, K) float
        Brownian increments per path (``sigma`` already applied).
    offsets : (P+1,) int
        Path ``p`` owns jumps ``offsets[p]:offsets[p+1]``.
    jtimes : (J,) float
    jvals : (R, J) float
        ``f~_r(x_j)``.
    backend : {"cython", "python"} or None
        Override the import-time choice.

    Returns
    -------
    (P, Nn) ndarray
    """
    impl = _impl
    if backend == "python":
        impl = _kernels_py
    elif backend == "cython":
        from . import _kernels as impl  # type: ignore[attr-defined]
    args = (np.ascontiguousarray(knots, dtype=np.float64),
            np.ascontiguousarray(grid_inc, dtype=np.int64),
            np.ascontiguousarray(seg_F, dtype=np.float64),
            np.ascontiguousarray(parent, dtype=np.int64),
            np.ascontiguousarray(member, dtype=np.int64),
            float(root_value),
            np.ascontiguousarray(at0, dtype=np.float64),
            np.ascontiguousarray(comp, dtype=np.float64),
            np.ascontiguousarray(dW, dtype=np.float64),
            np.ascontiguousarray(offsets, dtype=np.int64),
            np.ascontiguousarray(jtimes, dtype=np.float64),
            np.ascontiguousarray(jvals, dtype=np.float64))
    return impl.tree_terminal(*args)
