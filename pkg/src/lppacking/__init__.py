"""Simultaneous packing and covering by unit balls in l_p at finite truncation."""

from .construction import (
    InsufficientDensity,
    InvariantViolation,
    PackingState,
    SamplerConfig,
    all_packing_points,
    build,
    covering_witness,
    extend_stage,
    init_state,
    verify_dispersion,
)
from .lower_bound import delta_step, expand_hole, greedy_dispersed_in_ball, make_hole
from .lp_space import CoordId, SparsePoint, SpaceParams, distance, p_norm
from .metrics import covering_radius_empirical, gamma_estimate, min_pairwise_distance

__version__ = "0.1.0"
