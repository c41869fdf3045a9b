"""Packing radius r(P) and empirical covering radius R(P) of finite point sets.

The covering radius of a set is a supremum over the whole space and cannot be
computed; everything here measures it over a supplied finite region of test
points and is labelled *empirical* accordingly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .artifacts import digest
from .lp_space import SparsePoint, SpaceParams, distance, points_to_json, scale


class UndefinedDispersion(ValueError):
    """Raised when the minimum pairwise distance of fewer than two points is requested."""


@dataclass(frozen=True)
class MetricsReport:
    min_pairwise_distance: float
    packing_radius: float
    empirical_covering_radius: float
    gamma_ratio: float
    num_test_points: int
    worst_test_point: SparsePoint

    def to_dict(self) -> dict:
        return {
            "min_pairwise_distance": self.min_pairwise_distance,
            "packing_radius": self.packing_radius,
            "empirical_covering_radius": self.empirical_covering_radius,
            "gamma_ratio": self.gamma_ratio,
            "num_test_points": self.num_test_points,
            "worst_test_point": self.worst_test_point.to_dict(),
        }


def min_pairwise_distance(points: Sequence[SparsePoint], params: SpaceParams) -> float:
    n = len(points)
    if n < 2:
        raise UndefinedDispersion(f"undefined dispersion: need at least 2 points, got {n}")
    best = float("inf")
    for i in range(n):
        xi = points[i]
        for j in range(i + 1, n):
            d = distance(xi, points[j], params)
            if d < best:
                best = d
    return best


def covering_radius_empirical(
    points: Sequence[SparsePoint], tests: Sequence[SparsePoint], params: SpaceParams
) -> tuple[float, SparsePoint]:
    """max over t in ``tests`` of min over q in ``points`` of ||t - q||.

    Returns the value and the first test point attaining it.  Test points are
    scanned in the given order so the result is reproducible bit for bit.
    """
    if not points:
        raise ValueError("covering radius needs a nonempty point set")
    if not tests:
        raise ValueError("covering radius needs a nonempty test set")
    worst_val = -1.0
    worst_pt = tests[0]
    for t in tests:
        nearest = float("inf")
        for q in points:
            d = distance(t, q, params)
            if d < nearest:
                nearest = d
        if nearest > worst_val:
            worst_val, worst_pt = nearest, t
    return worst_val, worst_pt


def gamma_estimate(
    points: Sequence[SparsePoint], tests: Sequence[SparsePoint], params: SpaceParams
) -> MetricsReport:
    """Desk-scale estimate of the packing/covering ratio of ``points`` over ``tests``.

    The radii in the report are in the input's own scale.  ``gamma_ratio`` is
    measured after rescaling both sets by 2 / min_pairwise_distance, so that
    the points form a 1-packing at the margin (minimum distance exactly 2).
    """
    dmin = min_pairwise_distance(points, params)
    cover, worst = covering_radius_empirical(points, tests, params)
    s = 2.0 / dmin
    scaled_cover, _ = covering_radius_empirical(
        [scale(q, s) for q in points], [scale(t, s) for t in tests], params
    )
    return MetricsReport(
        min_pairwise_distance=dmin,
        packing_radius=dmin / 2.0,
        empirical_covering_radius=cover,
        gamma_ratio=scaled_cover,
        num_test_points=len(tests),
        worst_test_point=worst,
    )


def report_json(report: MetricsReport, points, tests, params: SpaceParams) -> dict:
    out = report.to_dict()
    out["params"] = {"p": params.p, "eta": params.eta}
    out["input_digests"] = {
        "points": digest(points_to_json(points)),
        "tests": digest(points_to_json(tests)),
    }
    return out
