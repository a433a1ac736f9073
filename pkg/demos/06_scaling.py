"""
Running time against graph size.

The work per source node depends only on its local neighbourhood, so total
time should grow roughly linearly with the number of nodes. Pass a larger
maximum size on the command line to go further, e.g. ``1000000``.
"""

import os
import sys
import time

from digraphwave import digraphwave, set_hyperparameters
from digraphwave.synth import barabasi_albert

top = int(sys.argv[1]) if len(sys.argv) > 1 else 100_000
threads = os.cpu_count() or 1
# compile the kernel once before timing
warm = barabasi_albert(100, 1, seed=0)
digraphwave(warm, set_hyperparameters(warm, R=3, k_emb=64))

n = 1000
while n <= top:
    g = barabasi_albert(n, 1, seed=0)
    cfg = set_hyperparameters(g, R=3, k_emb=64)
    t0 = time.perf_counter()
    digraphwave(g, cfg, threads=threads)
    dt = time.perf_counter() - t0
    print(f"n={n:>9}  {dt:7.2f} s  {1e6 * dt / n:6.2f} us/node")
    n *= 10
