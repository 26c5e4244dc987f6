"""
Row-wise golden-section refinement of grid maximisers.

`func` receives a 2-D array of candidate points (one row per independent
problem) and must return values of the same shape.
"""

import math
from typing import Callable, Tuple

import numpy as np

INV_PHI = (math.sqrt(5) - 1) / 2  # 1 / phi

Objective = Callable[[np.ndarray], np.ndarray]


def golden_maximize(
    func: Objective, a: np.ndarray, b: np.ndarray, iters: int
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Golden-section search for a maximum inside each [a, b].

    Returns:
        (midpoint of the final bracket, value there) per row.
    """
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc = func(c[:, None])[:, 0]
    fd = func(d[:, None])[:, 0]

    for _ in range(iters):
        left = fc > fd
        # left: keep [a, d], old c becomes the new d
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = np.where(left, b - INV_PHI * (b - a), d)
        new_d = np.where(left, c, a + INV_PHI * (b - a))
        fresh = np.where(left, new_c, new_d)
        fp = func(fresh[:, None])[:, 0]
        fc, fd = np.where(left, fp, fd), np.where(left, fc, fp)
        c, d = new_c, new_d

    x = 0.5 * (a + b)
    return x, func(x[:, None])[:, 0]


def refine_rows(
    func: Objective,
    x: np.ndarray,
    fx: np.ndarray,
    a: np.ndarray,
    b: np.ndarray,
    iters: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Golden-section refinement of grid maximisers `x` inside [a, b].

    The refined point replaces the grid point only when strictly better, so
    the result is never worse than the grid alone.
    """
    if iters <= 0:
        return x, fx
    xr, fr = golden_maximize(func, a, b, iters)
    better = fr > fx
    return np.where(better, xr, x), np.where(better, fr, fx)
