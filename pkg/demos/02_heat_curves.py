"""
Heat diffusion on a tiny graph.

Node 0 is joined to nodes 1 and 2 in both directions. Starting all heat
on node 0, the heat left at node 0 decays towards 1/2 as
``1/2 + e^{-2 tau}/2``. We compare the truncated Taylor series against
scipy's dense ``expm`` and the closed form.
"""

import math

import numpy as np
from scipy.linalg import expm

from digraphwave import Graph, build_operator, expm_batch, taylor_coefficients

g = Graph.from_edges([0, 1, 0, 2], [1, 0, 2, 0], n=3)
op = build_operator(g)
L = op.laplacian().toarray()
print("Laplacian:\n", L)

taus = np.array([0.5, 1.0, 2.0, 4.0, 8.0])
batch = expm_batch(op, [0, 1], taylor_coefficients(taus))

print(f"{'tau':>5} {'taylor':>18} {'closed form':>18} {'dense expm':>18}")
for s, tau in enumerate(taus):
    dense = expm(-tau * L)[0, 0]
    print(f"{tau:5.1f} {batch.psi[s, 0, 0]:18.15f} {0.5 + 0.5 * math.exp(-2 * tau):18.15f} {dense:18.15f}")

# Each column is a probability distribution.
print("column sums:", batch.psi.sum(axis=1).ravel())
