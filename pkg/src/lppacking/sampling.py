"""Test regions and uniform sampling in l_p balls."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .lp_space import CoordId, SparsePoint


def uniform_lp_ball(dim: int, p: float, size: int, rng: np.random.Generator, radius: float = 1.0) -> np.ndarray:
    """``size`` points uniform in the radius-``radius`` l_p ball of R^dim, shape (size, dim).

    Coordinates drawn with density proportional to exp(-|t|^p) give a
    direction after normalization; radius u^(1/dim) makes it uniform.
    """
    g = rng.gamma(1.0 / p, 1.0, size=(size, dim)) ** (1.0 / p)
    g *= rng.choice([-1.0, 1.0], size=(size, dim))
    norms = (np.abs(g) ** p).sum(axis=1) ** (1.0 / p)
    r = rng.random(size) ** (1.0 / dim)
    return g * (radius * r / norms)[:, None]


def sparse_ball_points(
    coords: Sequence[CoordId],
    count: int,
    radius: float,
    p: float,
    rng: np.random.Generator,
    max_support: int | None = None,
) -> list[SparsePoint]:
    """Random points of norm <= radius in the span of ``coords``.

    Support size is uniform in 1..max_support, the support uniform among
    ``coords``, and the point uniform in the ball of that sub-span.
    """
    coords = list(coords)
    smax = len(coords) if max_support is None else min(max_support, len(coords))
    out = []
    for _ in range(count):
        k = int(rng.integers(1, smax + 1))
        supp = rng.choice(len(coords), size=k, replace=False)
        vals = uniform_lp_ball(k, p, 1, rng, radius)[0]
        out.append(SparsePoint((coords[i], v) for i, v in zip(supp, vals)))
    return out


def axis_grid(axes: Sequence[CoordId], lo: float, hi: float, step: float) -> list[SparsePoint]:
    """Full tensor grid lo, lo+step, ..., hi on every axis (row-major, first axis slowest)."""
    n = int(round((hi - lo) / step))
    ticks = [lo + i * step for i in range(n + 1)]
    pts = [()]
    for _ in axes:
        pts = [t + (v,) for t in pts for v in ticks]
    return [SparsePoint(zip(axes, vals)) for vals in pts]
