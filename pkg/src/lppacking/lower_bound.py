"""Hole expansion along fresh coordinates, and a greedy probe for dispersed sets in the unit ball.

Given a finite set P and a ball B(c, r) missing P, shifting the center by
delta * e along a coordinate e that no point of P (nor c) uses, with
delta = ((r + 2 eps)^p - r^p)^(1/p), yields a ball of radius r + 2 eps that
still misses P.  For points near the hole this is the exact identity
||x - c - delta e||^p = ||x - c||^p + delta^p; for the rest it is the
triangle inequality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .artifacts import digest
from .lp_space import CoordId, SparsePoint, SpaceParams, distance, distance_pow, unit
from .sampling import uniform_lp_ball


class HoleError(ValueError):
    """A hole precondition does not hold (fresh coordinate in use, or hole not genuine)."""


class HoleVerificationError(RuntimeError):
    """An expanded hole failed its direct re-verification."""


def delta_step(r: float, eps: float, params: SpaceParams) -> float:
    if r < 0 or not eps > 0:
        raise ValueError(f"need r >= 0 and eps > 0, got r={r}, eps={eps}")
    p = params.p
    return ((r + 2 * eps) ** p - r**p) ** (1.0 / p)


@dataclass(frozen=True)
class HoleState:
    center: SparsePoint
    radius: float
    epsilon: float
    delta: float
    near_set: tuple[SparsePoint, ...] = field(default=(), repr=False)
    verified: bool = True

    def trace_entry(self) -> dict:
        return {
            "center_digest": digest(self.center.to_dict()),
            "radius": self.radius,
            "delta": self.delta,
            "verified": self.verified,
        }


def _near_set(points, center, reach, p):
    return tuple(x for x in points if distance(x, center, p) <= reach)


def make_hole(
    points: Sequence[SparsePoint], center: SparsePoint, radius: float, eps: float, params: SpaceParams
) -> HoleState:
    """Hole B(center, radius) after checking every point lies strictly outside it."""
    p = params.p
    for x in points:
        d = distance(x, center, p)
        if not d > radius:
            raise HoleError(f"hole not genuine: point {x!r} at distance {d} <= radius {radius}")
    delta = delta_step(radius, eps, params)
    near = _near_set(points, center, radius + delta + 2 * eps, p)
    return HoleState(center, radius, eps, delta, near)


def expand_hole(
    points: Sequence[SparsePoint], hole: HoleState, fresh: CoordId, params: SpaceParams
) -> HoleState:
    """Shift the hole's center by delta * e_fresh and grow its radius by 2 eps.

    Every point is re-checked directly against the new ball; points of the
    near set are additionally checked against the exact shift identity, the
    others against the triangle-inequality bound.
    """
    p = params.p
    c, r, eps, delta = hole.center, hole.radius, hole.epsilon, hole.delta
    if fresh in c:
        raise HoleError(f"coordinate {fresh} is in the support of the center")
    for x in points:
        if fresh in x:
            raise HoleError(f"coordinate {fresh} is in the support of point {x!r}")
        d = distance(x, c, p)
        if not d > r:
            raise HoleError(f"hole not genuine: point {x!r} at distance {d} <= radius {r}")

    new_c = c + delta * unit(fresh)
    new_r = r + 2 * eps
    reach = r + delta + 2 * eps
    dp_delta = delta**p
    for x in points:
        old_pow = distance_pow(x, c, p)
        new_pow = distance_pow(x, new_c, p)
        new_d = new_pow ** (1.0 / p)
        if not new_d > new_r:
            raise HoleVerificationError(f"point {x!r} at distance {new_d} <= new radius {new_r}")
        if old_pow ** (1.0 / p) <= reach:
            expected = old_pow + dp_delta
            if abs(new_pow - expected) > 1e-12 * max(1.0, expected):
                raise HoleVerificationError(
                    f"shift identity fails for {x!r}: {new_pow} vs {expected}"
                )
        elif not old_pow ** (1.0 / p) - delta > new_r:
            raise HoleVerificationError(f"triangle bound fails for far point {x!r}")

    new_delta = delta_step(new_r, eps, params)
    near = _near_set(points, new_c, new_r + new_delta + 2 * eps, p)
    return HoleState(new_c, new_r, eps, new_delta, near, verified=True)


def fresh_coords(points: Sequence[SparsePoint], *others: SparsePoint) -> Iterator[CoordId]:
    """Endless supply of coordinates used by none of the given points."""
    used = [c.stage for x in (*points, *others) for c in x.support]
    stage = max(used, default=0) + 1
    k = 0
    while True:
        yield CoordId(stage, k)
        k += 1


def iterate_expansion(
    points: Sequence[SparsePoint],
    hole: HoleState,
    params: SpaceParams,
    target_radius: float | None = None,
    steps: int | None = None,
) -> list[HoleState]:
    """Expand repeatedly until ``target_radius`` is reached or ``steps`` expansions are done.

    Returns the whole trajectory, starting hole included.
    """
    if target_radius is None and steps is None:
        raise ValueError("give target_radius or steps")
    supply = fresh_coords(points, hole.center)
    traj = [hole]
    while (steps is None or len(traj) - 1 < steps) and (
        target_radius is None or traj[-1].radius < target_radius
    ):
        traj.append(expand_hole(points, traj[-1], next(supply), params))
    return traj


def greedy_probe(
    params: SpaceParams, dim: int, alpha: float, budget: int, rng: np.random.Generator
) -> tuple[list[SparsePoint], list[int]]:
    """Greedy alpha-dispersed subset of the unit ball of a dim-coordinate subspace.

    Candidates are +e_1, -e_1, ..., +e_dim, -e_dim followed by ``budget``
    uniform draws from the ball.  A candidate is accepted if it is at distance
    > alpha from every accepted point.  Also returns, for each accepted point,
    its position in the candidate stream (canonical candidates first).
    """
    if not alpha > 0 or dim < 1:
        raise ValueError(f"need alpha > 0 and dim >= 1, got alpha={alpha}, dim={dim}")
    p = params.p
    thr = alpha**p
    canon = np.zeros((2 * dim, dim))
    canon[np.arange(0, 2 * dim, 2), np.arange(dim)] = 1.0
    canon[np.arange(1, 2 * dim, 2), np.arange(dim)] = -1.0

    accepted: list[np.ndarray] = []
    where: list[int] = []

    def scan(batch, offset):
        if accepted:
            A = np.array(accepted)
            mind = (np.abs(batch[:, None, :] - A[None]) ** p).sum(axis=2).min(axis=1)
        else:
            mind = np.full(len(batch), np.inf)
        i = 0
        while True:
            ok = np.flatnonzero(mind[i:] > thr)
            if ok.size == 0:
                return
            i += ok[0]
            accepted.append(batch[i])
            where.append(int(offset + i))
            mind = np.minimum(mind, (np.abs(batch - batch[i]) ** p).sum(axis=1))
            i += 1

    scan(canon, 0)
    done = 0
    while done < budget:
        n = min(4096, budget - done)
        scan(uniform_lp_ball(dim, p, n, rng), 2 * dim + done)
        done += n
    pts = [SparsePoint((CoordId(1, j), v) for j, v in enumerate(a)) for a in accepted]
    return pts, where


def greedy_dispersed_in_ball(
    params: SpaceParams, dim: int, alpha: float, budget: int, rng: np.random.Generator
) -> list[SparsePoint]:
    return greedy_probe(params, dim, alpha, budget, rng)[0]


def stall_curve(where: Sequence[int], dim: int, budgets: Sequence[int]) -> list[tuple[int, int]]:
    """Accepted count after each random-draw budget, from acceptance positions."""
    return [(b, sum(1 for w in where if w < 2 * dim + b)) for b in budgets]


def check_dispersed(points: Sequence[SparsePoint], alpha: float, params: SpaceParams) -> None:
    """Raise AssertionError unless every pair is > alpha apart and every point has norm <= 1."""
    p = params.p
    origin = SparsePoint()
    for i, x in enumerate(points):
        n = distance(x, origin, p)
        if n > 1 + 1e-12:
            raise AssertionError(f"point {i} has norm {n} > 1")
        for y in points[i + 1:]:
            d = distance(x, y, p)
            if not d > alpha:
                raise AssertionError(f"pair at distance {d} <= alpha {alpha}")


def random_dispersed_set(
    rng: np.random.Generator,
    params: SpaceParams,
    num_points: int = 200,
    dim: int = 30,
    max_norm: float = 5.0,
    min_distance: float = 1.0,
    max_support: int = 5,
    attempts: int | None = None,
) -> list[SparsePoint]:
    """Random finite min_distance-dispersed set: pairwise distances > min_distance, norms <= max_norm.

    The origin is never included, so B(0, 0) is always a genuine hole.
    """
    p = params.p
    coords = [CoordId(1, j) for j in range(dim)]
    attempts = attempts or 20 * num_points
    out: list[SparsePoint] = []
    origin = SparsePoint()
    for _ in range(attempts):
        if len(out) >= num_points:
            break
        k = int(rng.integers(1, min(max_support, dim) + 1))
        supp = rng.choice(dim, size=k, replace=False)
        vals = uniform_lp_ball(k, p, 1, rng, max_norm)[0]
        x = SparsePoint((coords[j], v) for j, v in zip(supp, vals))
        if x == origin:
            continue
        if all(distance(x, y, p) > min_distance for y in out):
            out.append(x)
    return out


def steps_to_reach(target: float, eps: float) -> int:
    return math.ceil(target / (2 * eps))
