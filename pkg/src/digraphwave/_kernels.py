"""Compiled per-column kernels for the embedding pipeline.

Every column is propagated independently over the set of nodes it has
reached so far, so results do not depend on how columns are grouped
into batches or distributed over threads.
"""

import numpy as np
from numba import njit


@njit(nogil=True, cache=True)
def core_rows(indptr, indices, alpha, sink, nodes, coeffs, thresholds, t_samples, out,
              x, y, acc, seen, visited):
    """Write core ECF rows for ``nodes`` into ``out`` (shape ``(len(nodes), 2*k_tau*k_phi)``).

    For each node ``j`` this evaluates ``sum_k a_sk (L - I)^k e_j`` on the
    nodes reachable from ``j``, clamps to ``[0, 1]``, zeroes values not
    strictly above ``thresholds[j]`` and samples the empirical
    characteristic function at ``t_samples``.

    ``x``, ``y`` (n,), ``acc`` (k_tau, n), ``seen`` (n, bool) and ``visited``
    (n, int64) are scratch buffers; they must be zero/False on entry and are
    left that way on return.
    """
    n = indptr.shape[0] - 1
    k_tau, order1 = coeffs.shape
    k_phi = t_samples.shape[0]
    re = np.empty(k_phi)
    im = np.empty(k_phi)

    for b in range(nodes.shape[0]):
        j = nodes[b]
        nv = 1
        visited[0] = j
        seen[j] = True
        x[j] = 1.0
        for s in range(k_tau):
            acc[s, j] = coeffs[s, 0]
        for k in range(1, order1):
            nfront = nv
            for p in range(nfront):
                v = visited[p]
                xv = x[v]
                if xv == 0.0:
                    continue
                if sink[v]:
                    y[v] -= xv
                else:
                    for e in range(indptr[v], indptr[v + 1]):
                        t = indices[e]
                        if not seen[t]:
                            seen[t] = True
                            visited[nv] = t
                            nv += 1
                        y[t] -= alpha[e] * xv
            for p in range(nv):
                v = visited[p]
                x[v] = y[v]
                y[v] = 0.0
            for s in range(k_tau):
                a = coeffs[s, k]
                for p in range(nv):
                    v = visited[p]
                    acc[s, v] += a * x[v]

        theta = thresholds[j]
        for s in range(k_tau):
            for q in range(k_phi):
                re[q] = 0.0
                im[q] = 0.0
            kept = 0
            for p in range(nv):
                v = visited[p]
                val = acc[s, v]
                if val > 1.0:
                    val = 1.0
                if val > theta:
                    kept += 1
                    for q in range(k_phi):
                        re[q] += np.cos(t_samples[q] * val)
                        im[q] += np.sin(t_samples[q] * val)
            zeros = n - kept
            base = s * 2 * k_phi
            for q in range(k_phi):
                out[b, base + 2 * q] = (zeros + re[q]) / n
                out[b, base + 2 * q + 1] = im[q] / n

        for p in range(nv):
            v = visited[p]
            x[v] = 0.0
            seen[v] = False
            for s in range(k_tau):
                acc[s, v] = 0.0


def workspace(n, k_tau):
    return (np.zeros(n), np.zeros(n), np.zeros((k_tau, n)), np.zeros(n, dtype=np.bool_),
            np.empty(n, dtype=np.int64))
