"""Gauss rules on the reference triangle and the unit interval.

Triangle rules are conical (collapsed) products of Gauss-Legendre and
Gauss-Jacobi(1, 0) points, so all weights are positive and any degree of
exactness is available.  The reference triangle is (0,0), (1,0), (0,1).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np
from scipy.special import roots_jacobi


@dataclass(frozen=True)
class Rule:
    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __len__(self):
        return len(self.weights)


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> Rule:
    """Rule exact for polynomials of total degree ``degree`` on the reference triangle."""
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    n = max(1, (degree + 2) // 2)
    xi, wxi = np.polynomial.legendre.leggauss(n)
    eta, weta = roots_jacobi(n, 1.0, 0.0)
    XI, ETA = np.meshgrid(xi, eta, indexing="ij")
    W = np.outer(wxi, weta) / 8.0
    x = (1 + XI) * (1 - ETA) / 4
    y = (1 + ETA) / 2
    pts = np.column_stack([x.ravel(), y.ravel()])
    pts.flags.writeable = False
    w = W.ravel()
    w.flags.writeable = False
    return Rule(pts, w, degree)


@lru_cache(maxsize=None)
def interval_rule(degree: int) -> Rule:
    """Gauss-Legendre rule on [0, 1] exact to ``degree``."""
    n = max(1, (degree + 2) // 2)
    t, w = np.polynomial.legendre.leggauss(n)
    pts = (t + 1) / 2
    w = w / 2
    pts.flags.writeable = False
    w.flags.writeable = False
    return Rule(pts, w, degree)


def monomial_integral(a: int, b: int) -> float:
    """Exact integral of x**a * y**b over the reference triangle."""
    return factorial(a) * factorial(b) / factorial(a + b + 2)
