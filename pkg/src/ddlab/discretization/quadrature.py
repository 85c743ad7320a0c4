"""Gauss rules on the reference segment [0, 1] and reference triangle."""
from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_segment(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Points/weights on [0, 1], exact for polynomials of ``degree``."""
    n = max(1, (degree + 2) // 2)
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def gauss_triangle(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed (Duffy) product rule on the triangle (0,0), (1,0), (0,1).

    The collapse multiplies the integrand by (1 - u), so one extra degree
    is needed in the u direction.
    """
    n = max(1, (degree + 3) // 2)
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    u, v = np.meshgrid(x, x, indexing="ij")
    wu, wv = np.meshgrid(w, w, indexing="ij")
    pts = np.column_stack([u.ravel(), (v * (1 - u)).ravel()])
    wts = (wu * wv * (1 - u)).ravel()
    return pts, wts
