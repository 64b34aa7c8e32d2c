"""Kernel backend selection.

The compiled extension is used when it imports; otherwise (or when the
environment variable ``ADSIGNAL_PURE=1`` is set) the numpy versions are used.
``BACKEND`` names the active one.
"""

import os

import numpy as np

from . import _kernels_py

_impl = _kernels_py
BACKEND = "python"
if os.environ.get("ADSIGNAL_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels_c as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py


def backends():
    """Available backend modules keyed by name (for tests and benchmarks)."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels_c
        found["cython"] = _kernels_c
    except ImportError:
        pass
    return found


def batch_revenue(W, rweights):
    W = np.asarray(W, dtype=float)
    if W.ndim != 2:
        raise ValueError("expected a 2-D array of expected valuations")
    if W.shape[0] == 0:
        return np.zeros(0)
    return np.asarray(_impl.batch_revenue(np.ascontiguousarray(W), np.ascontiguousarray(rweights, dtype=float)))


def dp_best_values(vgrid, deltas, b, sizes, F, c, jcap, impl=None):
    """Run the separation DP over ``vgrid``; returns (values, evaluated)."""
    impl = impl or _impl
    vgrid = np.ascontiguousarray(vgrid, dtype=float)
    deltas = np.ascontiguousarray(deltas, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    sizes = np.ascontiguousarray(sizes, dtype=np.int_)
    F = np.ascontiguousarray(F, dtype=float)
    out = np.full(vgrid.size, -np.inf)
    neg = b * deltas
    evaluated = impl.dp_best_values(vgrid, deltas, b, sizes, F, int(c), int(jcap),
                                    float(F.max()), float(neg.max(initial=0.0)), float(b.sum()), out)
    return out, int(evaluated)


def dp_traceback(v, deltas, b, sizes, F, c, jcap):
    """Re-run the DP at one grid point with decision tracking.

    Returns the selected state indices (sorted) and the DP value at ``v``.
    Shared by both backends so they always pick the same subset.
    """
    d = deltas.size
    NE = np.full((c + 1, jcap + 1), -np.inf)
    # choice[i] holds, per (w, j), the predecessor: -2 untouched, -1 singleton,
    # otherwise the pre-item count index (weight is implied by k).
    choices = []
    ks = []
    for th in range(d):
        k = max(1, int(np.ceil(v * c / deltas[th] - 1e-9)))
        ks.append(k)
        choice = np.full((c + 1, jcap + 1), -2, dtype=np.int64)
        if k > c:
            choices.append(choice)
            continue
        s = int(sizes[th])
        new = NE.copy()
        src = NE[:c + 1 - k]
        for j in range(jcap + 1):
            jj = min(jcap, j + s)
            cand = src[:, j] + b[th]
            better = cand > new[k:, jj]
            new[k:, jj] = np.where(better, cand, new[k:, jj])
            choice[k:, jj] = np.where(better, j, choice[k:, jj])
        js = min(jcap, s)
        better = b[th] > new[k:, js]
        new[k:, js] = np.where(better, b[th], new[k:, js])
        choice[k:, js] = np.where(better, -1, choice[k:, js])
        NE = new
        choices.append(choice)
    row = F + NE[c]
    j = int(np.argmax(row))
    value = v * row[j]
    if not np.isfinite(value):
        return [], -np.inf
    picked = []
    w = c
    for th in range(d - 1, -1, -1):
        prev = choices[th][w, j]
        if prev == -2:
            continue
        picked.append(th)
        if prev == -1:
            break
        w -= ks[th]
        j = int(prev)
    return sorted(picked), float(value)
