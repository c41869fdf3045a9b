"""Staged construction of a 2^(1/p)-dispersed packing in l_p at finite truncation.

Stage 1 holds D_1 = {0} and P_1 = {}.  Extending stage n mints one fresh
coordinate per point x of D_n (its label is ``CoordId(n, k)`` for the k-th
point), lifts each point to x + e_x to form P_{n+1}, and samples D_{n+1} from
the span of all minted coordinates, outside the closed unit balls around
every packing point built so far.

The dense subset of the unbounded complement is replaced by a seeded,
capped, grid-valued sample inside a ball of radius ``truncation_radius``.
Dispersion of the packing does not depend on how dense that sample is;
covering quality does.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .artifacts import digest
from .lp_space import (
    ORIGIN,
    CoordId,
    SparsePoint,
    SpaceParams,
    distance,
    distance_pow,
    points_from_json,
    points_to_json,
    unit,
)

log = logging.getLogger(__name__)

_CHUNK = 2048


class InsufficientDensity(RuntimeError):
    """The finite sample is too coarse for the requested operation."""


class InvariantViolation(RuntimeError):
    """A construction invariant failed a post-check; indicates a bug or a tampered state."""


@dataclass(frozen=True)
class SamplerConfig:
    truncation_radius: float = 3.0
    net_step: float = 0.5
    max_points_per_stage: int = 200
    max_support_size: int = 3
    candidate_budget: int | None = None  # defaults to 50 * max_points_per_stage

    def __post_init__(self):
        if self.candidate_budget is None:
            object.__setattr__(self, "candidate_budget", 50 * self.max_points_per_stage)
        if not self.truncation_radius > 0 or not self.net_step > 0:
            raise ValueError("truncation_radius and net_step must be positive")
        for name in ("max_points_per_stage", "max_support_size", "candidate_budget"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")

    def to_dict(self) -> dict:
        return {
            "truncation_radius": self.truncation_radius,
            "net_step": self.net_step,
            "max_points_per_stage": self.max_points_per_stage,
            "max_support_size": self.max_support_size,
            "candidate_budget": self.candidate_budget,
        }


@dataclass(frozen=True)
class Stage:
    D: tuple[SparsePoint, ...]
    P: tuple[SparsePoint, ...]


@dataclass(frozen=True)
class PackingState:
    params: SpaceParams
    sampler: SamplerConfig
    seed: int
    stages: tuple[Stage, ...] = field(default=())

    @property
    def depth(self) -> int:
        return len(self.stages)

    def D(self, n: int) -> tuple[SparsePoint, ...]:
        return self.stages[n - 1].D

    def P(self, n: int) -> tuple[SparsePoint, ...]:
        return self.stages[n - 1].P

    @property
    def coord_registry(self) -> dict[CoordId, SparsePoint]:
        """Minted coordinates and the D-point each one stands for."""
        reg = {}
        for n in range(1, self.depth):
            for k, x in enumerate(self.D(n)):
                reg[CoordId(n, k)] = x
        return reg

    def minted_coords(self) -> list[CoordId]:
        return [CoordId(n, k) for n in range(1, self.depth) for k in range(len(self.D(n)))]

    def to_dict(self) -> dict:
        body = {
            "params": {"p": self.params.p, "eta": self.params.eta},
            "sampler_config": self.sampler.to_dict(),
            "seed": self.seed,
            "stages": [
                {"stage": n, "D": points_to_json(st.D), "P": points_to_json(st.P)}
                for n, st in enumerate(self.stages, start=1)
            ],
        }
        body["digest"] = digest(body)
        return body

    @property
    def digest(self) -> str:
        return self.to_dict()["digest"]

    @classmethod
    def from_dict(cls, data: dict) -> "PackingState":
        """Load a state file.  No invariant is checked here; use verify_dispersion for that."""
        stages = tuple(
            Stage(tuple(points_from_json(s["D"])), tuple(points_from_json(s["P"])))
            for s in data["stages"]
        )
        state = cls(
            params=SpaceParams(**data["params"]),
            sampler=SamplerConfig(**data["sampler_config"]),
            seed=int(data["seed"]),
            stages=stages,
        )
        stored = data.get("digest")
        if stored is not None and stored != state.digest:
            log.warning("state digest mismatch: file says %s, content hashes to %s", stored, state.digest)
        return state


def stage_rng(seed: int, stage: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stage]))


def lift(D_n: Sequence[SparsePoint], n: int) -> tuple[SparsePoint, ...]:
    """P_{n+1} = {x + e_x : x in D_n}, with e_x on the coordinate CoordId(n, k)."""
    out = []
    for k, x in enumerate(D_n):
        e = CoordId(n, k)
        if e in x:
            raise InvariantViolation(f"coordinate {e} already in the support of {x!r}")
        out.append(x + unit(e))
    return tuple(out)


def init_state(params: SpaceParams, sampler: SamplerConfig | None = None, seed: int = 0) -> PackingState:
    if not isinstance(params, SpaceParams):
        raise ValueError("params must be a SpaceParams")
    sampler = sampler or SamplerConfig()
    if not 0 <= int(seed) < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return PackingState(params, sampler, int(seed), (Stage((ORIGIN,), ()),))


def extend_stage(state: PackingState) -> PackingState:
    n = state.depth
    if n < 1:
        raise ValueError("state has no stages; use init_state")
    P_next = lift(state.D(n), n)
    partial = replace(state, stages=state.stages + (Stage((), P_next),))
    D_next = sample_complement(partial, stage_rng(state.seed, n + 1))
    if not D_next:
        raise InsufficientDensity(
            f"no candidate survived at stage {n + 1}; "
            "adjust truncation_radius / net_step / candidate_budget"
        )
    new = replace(state, stages=state.stages + (Stage(tuple(D_next), P_next),))
    _check_stage(new, n + 1)
    return new


def build(params: SpaceParams, sampler: SamplerConfig | None = None, seed: int = 0, depth: int = 1) -> PackingState:
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    state = init_state(params, sampler, seed)
    while state.depth < depth:
        state = extend_stage(state)
    return state


def _grid_values(sampler: SamplerConfig) -> np.ndarray:
    kmax = int(np.floor(sampler.truncation_radius / sampler.net_step + 1e-9))
    ks = np.concatenate([np.arange(-kmax, 0), np.arange(1, kmax + 1)])
    return ks * sampler.net_step


def sample_complement(state: PackingState, rng: np.random.Generator) -> list[SparsePoint]:
    """Sample the D-set of the last stage of ``state``.

    Candidates live in the span of the minted coordinates: every single-axis
    grid point first (coordinate order), then ``candidate_budget`` random
    draws with support size at most ``max_support_size`` and grid values,
    rejected if outside the truncation ball.  A candidate survives if its
    distance to every packing point exceeds 1 + eta and it is new.  At most
    ``max_points_per_stage`` survivors are returned, in candidate order.
    """
    cfg, params = state.sampler, state.params
    p = params.p
    coords = state.minted_coords()
    if not coords:
        raise ValueError("no coordinate has been minted yet")
    K = len(coords)
    col = {c: i for i, c in enumerate(coords)}
    smax = min(cfg.max_support_size, K)
    grid = _grid_values(cfg)
    if grid.size == 0:
        return []

    # single-axis candidates
    ax_idx = np.repeat(np.arange(K), len(grid))[:, None]
    ax_val = np.tile(grid, K)[:, None]
    ax_idx = np.pad(ax_idx, ((0, 0), (0, smax - 1)), constant_values=K)
    ax_val = np.pad(ax_val, ((0, 0), (0, smax - 1)))

    # random sparse candidates; column K is an all-zero padding axis
    B = cfg.candidate_budget
    sizes = rng.integers(1, smax + 1, size=B)
    perm = np.argsort(rng.random((B, K)), axis=1)[:, :smax]
    vals = grid[rng.integers(0, len(grid), size=(B, smax))]
    pad = np.arange(smax)[None, :] >= sizes[:, None]
    perm[pad] = K
    vals[pad] = 0.0
    in_ball = (np.abs(vals) ** p).sum(axis=1) <= cfg.truncation_radius**p * (1 + 1e-12)
    idx = np.concatenate([ax_idx, perm[in_ball]])
    val = np.concatenate([ax_val, vals[in_ball]])

    packing = [q for st in state.stages for q in st.P]
    keep = np.ones(len(idx), dtype=bool)
    if packing:
        Q = np.zeros((len(packing), K + 1))
        for i, q in enumerate(packing):
            for c, v in q.items():
                Q[i, col[c]] = v
        Qabs = np.abs(Q) ** p
        qpow = Qabs.sum(axis=1)
        thr = (1.0 + params.eta) ** p
        for lo in range(0, len(idx), _CHUNK):
            ci, cv = idx[lo:lo + _CHUNK], val[lo:lo + _CHUNK]
            Qs = Q[:, ci]  # (num_packing, chunk, smax)
            corr = (np.abs(cv[None] - Qs) ** p - Qabs[:, ci]).sum(axis=2)
            dpow = qpow[:, None] + corr
            slack = 1e-12 * (qpow[:, None] + (np.abs(cv) ** p).sum(axis=1)[None] + 1.0)
            keep[lo:lo + _CHUNK] = (dpow > thr + slack).all(axis=0)

    seen = {x for st in state.stages for x in st.D}
    out: list[SparsePoint] = []
    for i in np.flatnonzero(keep):
        z = SparsePoint((coords[j], v) for j, v in zip(idx[i], val[i]) if j < K)
        if z in seen:
            continue
        seen.add(z)
        out.append(z)
        if len(out) >= cfg.max_points_per_stage:
            break
    return out


def all_packing_points(state: PackingState) -> list[SparsePoint]:
    return [q for st in state.stages for q in st.P]


def pending_lifts(state: PackingState) -> list[SparsePoint]:
    """Lifts of the last D-set, i.e. the next P-set, on the coordinates the next stage would mint."""
    return list(lift(state.D(state.depth), state.depth))


def closed_packing_points(state: PackingState) -> list[SparsePoint]:
    return all_packing_points(state) + pending_lifts(state)


def _check_stage(state: PackingState, m: int) -> None:
    """Post-check everything stage m adds; raises InvariantViolation."""
    p, eta = state.params.p, state.params.eta
    if m == 1:
        if state.D(1) != (ORIGIN,) or state.P(1) != ():
            raise InvariantViolation("stage 1 must be D_1 = {0}, P_1 = {}")
        return
    n = m - 1
    if state.P(m) != lift(state.D(n), n):
        raise InvariantViolation(f"P_{m} is not the lift of D_{n}")
    D_m = state.D(m)
    if len(set(D_m)) != len(D_m):
        raise InvariantViolation(f"D_{m} contains duplicates")
    sizes = {s: len(state.D(s)) for s in range(1, m)}
    thr = (1.0 + eta) ** p
    packing = [q for s in range(1, m + 1) for q in state.P(s)]
    earlier = {x for s in range(1, m) for x in state.D(s)}
    for z in D_m:
        for c in z.support:
            if not (1 <= c.stage < m and c.index < sizes[c.stage]):
                raise InvariantViolation(f"D_{m} point {z!r} uses unminted coordinate {c}")
        if z in earlier:
            raise InvariantViolation(f"D_{m} point {z!r} repeats an earlier D-point")
        for q in packing:
            if not distance_pow(z, q, p) > thr:
                raise InvariantViolation(f"D_{m} point {z!r} lies within 1 + eta of packing point {q!r}")


def check_invariants(state: PackingState) -> None:
    for m in range(1, state.depth + 1):
        _check_stage(state, m)


@dataclass
class DispersionReport:
    min_excess: float
    violating_pair: tuple[SparsePoint, SparsePoint] | None
    num_pairs: int
    same_stage_pairs: int
    cross_stage_pairs: int
    max_identity_error: float
    identity_failures: list = field(default_factory=list)
    margin: float = 0.0

    @property
    def ok(self) -> bool:
        return self.min_excess >= self.margin and not self.identity_failures

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "min_excess": self.min_excess,
            "margin": self.margin,
            "violating_pair": None if self.violating_pair is None
            else [q.to_dict() for q in self.violating_pair],
            "num_pairs": self.num_pairs,
            "same_stage_pairs": self.same_stage_pairs,
            "cross_stage_pairs": self.cross_stage_pairs,
            "max_identity_error": self.max_identity_error,
            "identity_failures": len(self.identity_failures),
        }


def verify_dispersion(state: PackingState, identity_tol: float = 1e-9) -> DispersionReport:
    """Check that every pair of packing points satisfies d^p >= 2 + eta.

    Each pair is also checked against the exact identity behind the bound:
    for lifts of two points of the same D-set, d^p = ||x - y||^p + 2; when
    x comes from an earlier D-set than y, d^p = 1 + ||x + e_x - y||^p.
    """
    p = state.params.p
    # (packing point, originating D-point, D-stage)
    items = []
    for m in range(2, state.depth + 1):
        for q, x in zip(state.P(m), state.D(m - 1)):
            items.append((q, x, m - 1))
    if len(items) < 2:
        raise ValueError(f"need at least 2 packing points, got {len(items)}")

    min_excess = float("inf")
    worst = None
    same = cross = 0
    max_err = 0.0
    failures = []
    for i in range(len(items)):
        qi, xi, ni = items[i]
        for j in range(i + 1, len(items)):
            qj, xj, nj = items[j]
            dp = distance_pow(qi, qj, p)
            if ni == nj:
                same += 1
                ident = distance_pow(xi, xj, p) + 2.0
            else:
                cross += 1
                (q_lo, _), (_, y_hi) = ((qi, xi), (qj, xj)) if ni < nj else ((qj, xj), (qi, xi))
                ident = 1.0 + distance_pow(q_lo, y_hi, p)
            err = abs(dp - ident)
            max_err = max(max_err, err)
            if err > identity_tol:
                failures.append((qi, qj, dp, ident))
            if dp - 2.0 < min_excess:
                min_excess, worst = dp - 2.0, (qi, qj)
    margin = state.params.eta
    return DispersionReport(
        min_excess=min_excess,
        violating_pair=worst if min_excess < margin else (failures[0][:2] if failures else None),
        num_pairs=same + cross,
        same_stage_pairs=same,
        cross_stage_pairs=cross,
        max_identity_error=max_err,
        identity_failures=failures,
        margin=margin,
    )


@dataclass(frozen=True)
class Witness:
    point: SparsePoint
    stage: int       # the N used for truncation
    branch: str      # "ball" (already within 1 of a packing point) or "lift"
    distance: float  # ||x - point||


def find_covering_witness(state: PackingState, x: SparsePoint, eps: float) -> Witness:
    """Packing point within 1 + eps of ``x``, found the way the covering argument finds it.

    For each admissible N, largest first (truncation y of x to coordinates
    minted before stage N has ||x - y|| < eps/2), first look for a packing point of stages
    <= N within distance 1 of y, then for z in D_N with
    ||y - z||^p < (1 + eps/2)^p - 1, whose lift z + e_z is returned.  N = depth
    uses the pending lifts of the last D-set.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    p = state.params.p
    depth = state.depth
    for c in x.support:
        if not (1 <= c.stage < depth and c.index < len(state.D(c.stage))):
            raise ValueError(f"test point uses coordinate {c} that is not minted in this state")

    half = eps / 2.0
    lift_thr = (1.0 + half) ** p - 1.0
    for N in range(depth, 0, -1):
        y = x.restrict(lambda c: c.stage < N)
        if not distance(x, y, p) < half:
            continue
        best, best_d = None, float("inf")
        for s in range(1, N + 1):
            for q in state.P(s):
                d = distance(y, q, p)
                if d <= 1.0 and d < best_d:
                    best, best_d = q, d
        branch = "ball"
        if best is None:
            best_k, best_dp = None, float("inf")
            for k, z in enumerate(state.D(N)):
                dp = distance_pow(y, z, p)
                if dp < lift_thr and dp < best_dp:
                    best_k, best_dp = k, dp
            if best_k is None:
                continue
            best = state.D(N)[best_k] + unit(CoordId(N, best_k))
            branch = "lift"
        d = distance(x, best, p)
        if not d < 1.0 + eps:
            raise InvariantViolation(f"witness {best!r} is at distance {d} >= 1 + eps from {x!r}")
        return Witness(best, N, branch, d)
    raise InsufficientDensity(f"no covering witness within 1 + {eps} for {x!r}")


def covering_witness(state: PackingState, x: SparsePoint, eps: float) -> SparsePoint:
    return find_covering_witness(state, x, eps).point


@dataclass
class CoverageStats:
    num_tests: int
    successes: int
    ball_hits: int
    lift_hits: int
    max_witness_distance: float

    @property
    def success_rate(self) -> float:
        return self.successes / self.num_tests if self.num_tests else 0.0

    @property
    def failure_rate(self) -> float:
        return 1.0 - self.success_rate

    def to_dict(self) -> dict:
        return {
            "num_tests": self.num_tests,
            "successes": self.successes,
            "success_rate": self.success_rate,
            "failure_rate": self.failure_rate,
            "ball_hits": self.ball_hits,
            "lift_hits": self.lift_hits,
            "max_witness_distance": self.max_witness_distance,
        }


def coverage_stats(state: PackingState, tests: Sequence[SparsePoint], eps: float) -> CoverageStats:
    ok = ball = lifted = 0
    dmax = 0.0
    for t in tests:
        try:
            w = find_covering_witness(state, t, eps)
        except InsufficientDensity:
            continue
        ok += 1
        ball += w.branch == "ball"
        lifted += w.branch == "lift"
        dmax = max(dmax, w.distance)
    return CoverageStats(len(tests), ok, ball, lifted, dmax)
