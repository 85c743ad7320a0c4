"""Nodal Lagrange bases of degree 1..3 on the reference triangle.

Node order: the three vertices, then the interior nodes of local edge i
(from vertex i to vertex i+1) for i = 0, 1, 2, then interior nodes.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def _monomials(k):
    return [(a, b) for total in range(k + 1) for a in range(total, -1, -1) for b in [total - a]]


@lru_cache(maxsize=None)
def reference_nodes(k: int) -> np.ndarray:
    nodes = [v for v in REF_VERTICES]
    for i in range(3):
        a, b = REF_VERTICES[i], REF_VERTICES[(i + 1) % 3]
        nodes += [a + j / k * (b - a) for j in range(1, k)]
    if k == 3:
        nodes.append(np.array([1 / 3, 1 / 3]))
    elif k > 3:
        raise ValueError("Lagrange degree above 3 is not supported")
    return np.array(nodes)


@lru_cache(maxsize=None)
def _coefficients(k: int) -> np.ndarray:
    nodes = reference_nodes(k)
    mons = _monomials(k)
    V = np.array([[x ** a * y ** b for a, b in mons] for x, y in nodes])
    return np.linalg.inv(V)


def n_interior(k: int) -> int:
    return max(0, (k - 1) * (k - 2) // 2)


def evaluate(k: int, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Basis values (nq, nb) and reference gradients (nq, nb, 2) at ``pts``."""
    C = _coefficients(k)
    mons = _monomials(k)
    x, y = pts[:, 0], pts[:, 1]
    M = np.column_stack([x ** a * y ** b for a, b in mons])
    Mx = np.column_stack([a * x ** max(a - 1, 0) * y ** b if a else np.zeros_like(x) for a, b in mons])
    My = np.column_stack([b * x ** a * y ** max(b - 1, 0) if b else np.zeros_like(x) for a, b in mons])
    vals = M @ C
    grads = np.stack([Mx @ C, My @ C], axis=-1)
    return vals, grads
