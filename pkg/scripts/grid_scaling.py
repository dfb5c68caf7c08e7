"""Cube-grid build time against population size (best of several repeats)."""

import time

import numpy as np

from adrsim.conjunctions import build_cube_grid


def best(n, reps=9, edge=50.0):
    pos = np.random.default_rng(0).uniform(-7000, 7000, (n, 3))
    t = np.inf
    for _ in range(reps):
        t0 = time.perf_counter()
        build_cube_grid(pos, edge)
        t = min(t, time.perf_counter() - t0)
    return t


if __name__ == "__main__":
    base = best(10_000)
    for n in (1_000, 10_000, 30_000, 100_000, 300_000):
        t = best(n)
        print(f"n={n:>7d}  {1e3 * t:8.3f} ms  ratio to 1e4 {t / base:6.2f}")
