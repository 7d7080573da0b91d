"""Chebyshev collocation on the real line through the map x = L*arctanh(z).

All fields live on the N-1 interior nodes; the endpoints z = +1, -1 map to
x = +inf, -inf and carry implicit zero Dirichlet data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def cheb_diff_matrix(n: int) -> np.ndarray:
    """First-derivative collocation matrix on the nodes cos(j*pi/n), j = 0..n.

    Off-diagonal entries follow the closed form; the diagonal is taken from
    negative row sums so that constants are annihilated to rounding.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    j = np.arange(n + 1)
    z = np.cos(np.pi * j / n)
    z = 0.5 * (z - z[::-1])
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** j
    dz = z[:, None] - z[None, :]
    D = np.outer(c, 1.0 / c) / (dz + np.eye(n + 1))
    D -= np.diag(D.sum(axis=1))
    return D


@dataclass(frozen=True, eq=False)
class MappedGrid:
    n: int
    scale: float
    cheb_nodes: np.ndarray
    interior_points: np.ndarray
    d1_mapped: np.ndarray
    d2_mapped: np.ndarray
    quad_weights: np.ndarray
    _reverse: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.n - 1

    @property
    def x(self) -> np.ndarray:
        return self.interior_points

    def reflect(self, f: np.ndarray) -> np.ndarray:
        """Samples of f(-x): the interior nodes are symmetric, so reverse them."""
        return f[..., self._reverse]


def build_grid(n: int, scale: float) -> MappedGrid:
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    theta = np.pi * np.arange(n + 1) / n
    z = np.cos(theta)
    z = 0.5 * (z - z[::-1])
    D = cheb_diff_matrix(n)
    D2 = D @ D

    zi = z[1:-1]
    # sin^2 and log(cot(theta/2)) avoid the cancellation in 1 - z^2 and
    # arctanh(z) next to z = +-1
    sin_t = np.sin(theta[1:-1])
    sin_t = 0.5 * (sin_t + sin_t[::-1])
    x = -scale * np.log(np.tan(0.5 * theta[1:-1]))
    x = 0.5 * (x - x[::-1])
    dzdx = sin_t**2 / scale
    d2zdx2 = -2.0 * zi * sin_t**2 / scale**2

    D1i = D[1:-1, 1:-1]
    D2i = D2[1:-1, 1:-1]
    d1 = dzdx[:, None] * D1i
    d2 = (dzdx**2)[:, None] * D2i + d2zdx2[:, None] * D1i

    # trapezoid rule in the angle theta, x = L*arctanh(cos(theta)):
    # dx = L/sin(theta) dtheta.  Tails beyond x_1 and x_{N-1} are dropped.
    weights = (np.pi / n) * scale / sin_t

    for arr in (z, x, d1, d2, weights):
        arr.setflags(write=False)
    rev = np.arange(n - 2, -1, -1)
    rev.setflags(write=False)
    return MappedGrid(n, float(scale), z, x, d1, d2, weights, rev)


def inner_product(f: np.ndarray, g: np.ndarray, grid: MappedGrid) -> complex:
    """Discrete L2 product sum_j w_j f_j conj(g_j)."""
    f = np.asarray(f)
    g = np.asarray(g)
    m = grid.size
    if f.shape[-1] % m or g.shape[-1] % m or f.shape != g.shape:
        raise ValueError(
            f"vectors of length {f.shape[-1]} and {g.shape[-1]} do not match a grid with {m} points"
        )
    k = f.shape[-1] // m
    w = np.tile(grid.quad_weights, k)
    return complex(np.sum(w * f * np.conj(g)))


def norm(f: np.ndarray, grid: MappedGrid) -> float:
    return float(np.sqrt(inner_product(f, f, grid).real))
