"""Block empirical measures settle onto the service law as n grows.

For windows {i : m < i <= m + floor(n*ell)} of an i.i.d. requirement
sequence, the scaled empirical measure should be uniformly close to
ell times the law, simultaneously over window offsets m, lengths ell and
half-line test sets.  The script prints the worst observed deviation per n
for an exponential law and for a point mass (where only the floor(n*ell)
rounding survives).
"""

import numpy as np

from fluidq import glivenko_cantelli_check, make_deterministic, make_exponential

x_grid = np.arange(0.0, 10.0 + 0.025, 0.05)

print("exponential(1) law, window mass 2, block span 2, seed 0:")
for n in (250, 1000, 4000, 16000):
    dev = glivenko_cantelli_check(make_exponential(1.0), n, 2.0, 2.0, x_grid, seed=0)
    print(f"  n={n:6d}: worst deviation {dev:.5f}   (1/sqrt(n) = {n ** -0.5:.5f})")

print("\npoint mass at 0.7 (only the floor effect remains):")
for n in (100, 1000, 10000):
    dev = glivenko_cantelli_check(make_deterministic(0.7), n, 2.0, 2.0, x_grid, seed=0)
    print(f"  n={n:6d}: worst deviation {dev:.6f}  <= 1/n = {1 / n:.6f}")
