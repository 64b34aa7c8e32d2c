"""Pure numpy implementations of the hot kernels.

These are the reference versions; ``_kernels_c`` must agree with them.
"""

import numpy as np

NEG_INF = -np.inf


def batch_revenue(W, rweights):
    """Revenue for every row of ``W`` (rows = expected valuations, padded).

    ``rweights[k]`` multiplies the (k+1)-th largest value; ``rweights[0] == 0``.
    """
    W = np.asarray(W, dtype=float)
    top = rweights.size
    if W.shape[1] > top:
        part = -np.partition(-W, top - 1, axis=1)[:, :top]
    else:
        part = W
    part = -np.sort(-part, axis=1)
    return part[:, :top] @ rweights[:part.shape[1]]


def dp_best_values(vgrid, deltas, b, sizes, F, c, jcap, fmax, max_negy, sum_b, out):
    """Best rounded-knapsack value for each grid point ``vgrid[t]`` (descending).

    ``out[t]`` receives ``v * max_j (F[j] + NE[c][j])`` or ``-inf`` when no
    item fits. Stops early once the upper bound for the remaining (smaller)
    grid points drops below the best value found; those entries stay -inf.
    Returns the number of grid points evaluated.
    """
    d = deltas.size
    best = NEG_INF
    evaluated = 0
    for t in range(vgrid.size):
        v = vgrid[t]
        bound = v * fmax + min(max_negy, v * sum_b)
        if bound < best:
            break
        evaluated += 1
        NE = np.full((c + 1, jcap + 1), NEG_INF)
        for th in range(d):
            k = max(1, int(np.ceil(v * c / deltas[th] - 1e-9)))
            if k > c:
                continue
            s = sizes[th]
            gain = b[th]
            shifted = np.full_like(NE, NEG_INF)
            # extend existing nonempty sets
            src = NE[:c + 1 - k]
            if s == 0:
                shifted[k:] = src + gain
            else:
                for j in range(jcap + 1):
                    jj = min(jcap, j + s)
                    shifted[k:, jj] = np.maximum(shifted[k:, jj], src[:, j] + gain)
            # singleton {th}
            shifted[k:, min(jcap, s)] = np.maximum(shifted[k:, min(jcap, s)], gain)
            np.maximum(NE, shifted, out=NE)
        row = NE[c]
        val = v * np.max(F + row)
        out[t] = val
        if val > best:
            best = val
    return evaluated
