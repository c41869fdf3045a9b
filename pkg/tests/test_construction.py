import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lppacking.construction import (
    InsufficientDensity,
    InvariantViolation,
    PackingState,
    SamplerConfig,
    Stage,
    all_packing_points,
    build,
    check_invariants,
    closed_packing_points,
    covering_witness,
    extend_stage,
    find_covering_witness,
    init_state,
    lift,
    pending_lifts,
    sample_complement,
    stage_rng,
    verify_dispersion,
)
from lppacking.lp_space import ORIGIN, CoordId, SparsePoint, SpaceParams, distance, distance_pow, unit
from lppacking.sampling import sparse_ball_points

E0 = CoordId(1, 0)


@pytest.fixture(scope="module")
def depth3():
    return {p: build(SpaceParams(p), SamplerConfig(), seed=3, depth=3) for p in (1.0, 1.5, 2.0, 3.0)}


def test_init_state():
    s = init_state(SpaceParams(2), SamplerConfig(), seed=1)
    assert s.depth == 1
    assert s.D(1) == (ORIGIN,) and s.P(1) == ()


def test_first_extension_is_single_unit_vector():
    s = extend_stage(init_state(SpaceParams(2), SamplerConfig(), seed=1))
    assert s.P(2) == (unit(E0),)
    assert all_packing_points(s) == [unit(E0)]


def test_init_is_deterministic():
    a = build(SpaceParams(2), SamplerConfig(), seed=9, depth=3)
    b = build(SpaceParams(2), SamplerConfig(), seed=9, depth=3)
    assert a.digest == b.digest
    c = build(SpaceParams(2), SamplerConfig(), seed=10, depth=3)
    assert c.digest != a.digest


@pytest.mark.parametrize("bad", [dict(truncation_radius=0), dict(net_step=-1), dict(max_points_per_stage=0),
                                 dict(max_support_size=0), dict(candidate_budget=0)])
def test_sampler_config_rejects(bad):
    with pytest.raises(ValueError):
        SamplerConfig(**bad)


def test_init_rejects_bad_seed():
    with pytest.raises(ValueError):
        init_state(SpaceParams(2), SamplerConfig(), seed=-1)
    with pytest.raises(ValueError):
        init_state(SpaceParams(2), SamplerConfig(), seed=2**64)


def test_second_stage_is_one_dimensional_complement():
    s = build(SpaceParams(2), SamplerConfig(truncation_radius=3, net_step=0.5), seed=4, depth=3)
    for z in s.D(2):
        assert z.support == {E0}
        c = z.get(E0)
        assert abs(c - 1) > 1 and abs(c) <= 3
        assert -3 <= c < 0 or 2 < c <= 3


def test_lift_sizes(depth3):
    for s in depth3.values():
        for n in range(1, s.depth):
            assert len(s.P(n + 1)) == len(s.D(n))
        assert len(all_packing_points(s)) == sum(len(s.D(i)) for i in range(1, s.depth))


def test_cross_stage_distance_example():
    par = SpaceParams(2)
    x = SparsePoint({E0: 2.5})
    q = lift([x], 2)[0]
    assert q == SparsePoint({E0: 2.5, CoordId(2, 0): 1.0})
    assert distance(q, unit(E0), par) == pytest.approx(math.sqrt(3.25), rel=1e-15)
    assert distance(q, unit(E0), par) > math.sqrt(2)


def test_support_stratification(depth3):
    for s in depth3.values():
        for n in range(1, s.depth + 1):
            for z in s.D(n):
                assert all(c.stage < n for c in z.support)
            if n >= 2:
                for q, x in zip(s.P(n), s.D(n - 1)):
                    new = [c for c in q.support if c.stage == n - 1 and c not in x]
                    assert len(new) == 1 and q.get(new[0]) == 1.0
                    assert all(c.stage < n - 1 for c in q.support if c != new[0])


def test_stage_sets_disjoint(depth3):
    for s in depth3.values():
        Ds = [set(s.D(n)) for n in range(1, s.depth + 1)]
        Ps = [set(s.P(n)) for n in range(1, s.depth + 1)]
        for i in range(len(Ds)):
            assert len(Ds[i]) == len(s.D(i + 1))
            for j in range(i):
                assert not Ds[i] & Ds[j]
                assert not Ps[i] & Ps[j]
        check_invariants(s)


def test_coord_registry(depth3):
    s = depth3[2.0]
    reg = s.coord_registry
    assert reg[E0] == ORIGIN
    assert len(reg) == len(s.minted_coords()) == len(s.D(1)) + len(s.D(2))


def test_sample_complement_properties():
    par = SpaceParams(2)
    s = build(par, SamplerConfig(), seed=2, depth=3)
    partial = PackingState(s.params, s.sampler, s.seed, s.stages + (Stage((), lift(s.D(3), 3)),))
    out = sample_complement(partial, stage_rng(s.seed, 4))
    again = sample_complement(partial, stage_rng(s.seed, 4))
    other = sample_complement(partial, stage_rng(s.seed + 1, 4))
    assert out == again
    minted = set(partial.minted_coords())
    packing = all_packing_points(partial)
    thr = (1 + par.eta) ** par.p
    for zs in (out, other):
        assert 0 < len(zs) <= s.sampler.max_points_per_stage
        for z in zs:
            assert z.support <= minted
            assert min(distance_pow(z, q, par) for q in packing) > thr


def test_sample_complement_needs_coordinates():
    s = init_state(SpaceParams(2), SamplerConfig(), seed=1)
    with pytest.raises(ValueError):
        sample_complement(s, stage_rng(1, 1))


def test_insufficient_density():
    # net step coarser than the truncation radius leaves no grid value
    cfg = SamplerConfig(truncation_radius=0.5, net_step=1.0)
    with pytest.raises(InsufficientDensity):
        build(SpaceParams(2), cfg, seed=1, depth=2)


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0])
def test_verify_dispersion_passes(depth3, p):
    rep = verify_dispersion(depth3[p])
    assert rep.ok
    assert rep.min_excess > 0
    assert rep.violating_pair is None
    assert rep.num_pairs == rep.same_stage_pairs + rep.cross_stage_pairs
    assert rep.max_identity_error <= 1e-9


def test_same_stage_identity():
    par = SpaceParams(2)
    s = build(par, SamplerConfig(), seed=5, depth=3)
    x, y = s.D(2)[0], s.D(2)[1]
    qx, qy = s.P(3)[0], s.P(3)[1]
    assert distance_pow(qx, qy, par) == pytest.approx(distance_pow(x, y, par) + 2, abs=1e-12)


def _illegal_state(p=2.0):
    params = SpaceParams(p)
    D2 = (SparsePoint({E0: 0.5}), SparsePoint({E0: -2.0}))
    stages = (Stage((ORIGIN,), ()), Stage(D2, lift((ORIGIN,), 1)), Stage((), lift(D2, 2)))
    return PackingState(params, SamplerConfig(), 0, stages)


def test_illegal_state_detected():
    rep = verify_dispersion(_illegal_state())
    assert not rep.ok
    assert rep.min_excess == pytest.approx(1.25 - 2)
    assert set(rep.violating_pair) == {unit(E0), SparsePoint({E0: 0.5, CoordId(2, 0): 1.0})}
    with pytest.raises(InvariantViolation):
        check_invariants(_illegal_state())


def test_verify_needs_two_points():
    with pytest.raises(ValueError):
        verify_dispersion(build(SpaceParams(2), SamplerConfig(), seed=1, depth=2))


def test_pending_lifts_use_next_stage_coordinates(depth3):
    s = depth3[2.0]
    pend = pending_lifts(s)
    assert len(pend) == len(s.D(3))
    assert closed_packing_points(s) == all_packing_points(s) + pend
    nxt = extend_stage(s)
    assert tuple(pend) == nxt.P(4)


# covering witness

def test_witness_inside_unit_ball():
    s = build(SpaceParams(2), SamplerConfig(), seed=1, depth=2)
    assert covering_witness(s, SparsePoint({E0: 0.5}), 0.1) == unit(E0)
    s3 = build(SpaceParams(2), SamplerConfig(), seed=1, depth=3)
    assert covering_witness(s3, SparsePoint({E0: 0.5}), 0.1) == unit(E0)


@pytest.mark.parametrize("eps", [0.01, 0.5, 3.0])
@pytest.mark.parametrize("depth", [2, 3])
def test_witness_of_d_point_is_its_lift(eps, depth):
    par = SpaceParams(2)
    s = build(par, SamplerConfig(), seed=1, depth=depth)
    for k, z in enumerate(s.D(2)):
        w = covering_witness(s, z, eps)
        assert w == z + unit(CoordId(2, k))
        assert distance(z, w, par) == 1.0


def test_witness_fine_net_1d_enumeration():
    par = SpaceParams(2)
    s = build(par, SamplerConfig(net_step=0.25, truncation_radius=3), seed=1, depth=2)
    # independent enumeration of the 1-D complement grid
    grid = [k * 0.25 for k in range(-12, 13) if k != 0]
    expected = {c for c in grid if abs(c - 1) > 1}
    assert {z.get(E0) for z in s.D(2)} == expected
    x = SparsePoint({E0: 2.7})
    w = covering_witness(s, x, 0.5)
    c = w.get(E0)
    assert c == min(expected, key=lambda v: abs(2.7 - v))
    assert distance_pow(x, w, par) == pytest.approx(1 + (2.7 - c) ** 2, abs=1e-14)
    assert 1 + (2.7 - c) ** 2 < 2.25


def test_witness_failure_is_insufficient_density():
    par = SpaceParams(2)
    s = build(par, SamplerConfig(), seed=1, depth=2)
    # far outside the truncation radius nothing qualifies
    with pytest.raises(InsufficientDensity):
        covering_witness(s, SparsePoint({E0: 10.0}), 0.1)


def test_witness_rejects_unminted_coordinates():
    s = build(SpaceParams(2), SamplerConfig(), seed=1, depth=2)
    with pytest.raises(ValueError):
        covering_witness(s, SparsePoint({CoordId(5, 0): 1.0}), 0.5)
    with pytest.raises(ValueError):
        covering_witness(s, SparsePoint({E0: 1.0}), 0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from([1.0, 1.5, 2.0, 3.0]), st.sampled_from([0.2, 0.5, 1.0]))
def test_witness_soundness(seed, p, eps):
    par = SpaceParams(p)
    s = _cached_state(p)
    coords = [c for c in s.minted_coords() if c.stage <= 2]
    for x in sparse_ball_points(coords, 20, 2.0, p, np.random.default_rng(seed), max_support=3):
        try:
            w = find_covering_witness(s, x, eps)
        except InsufficientDensity:
            continue
        assert distance(x, w.point, par) < 1 + eps
        assert w.distance == distance(x, w.point, par)


_STATES = {}


def _cached_state(p):
    if p not in _STATES:
        _STATES[p] = build(SpaceParams(p), SamplerConfig(), seed=1, depth=3)
    return _STATES[p]


def test_state_json_round_trip(tmp_path):
    s = build(SpaceParams(1.5), SamplerConfig(), seed=8, depth=3)
    d = s.to_dict()
    assert d["stages"][1]["P"][0] == {"entries": {"s1i0": 1.0}}
    s2 = PackingState.from_dict(d)
    assert s2.digest == s.digest == d["digest"]
    assert s2.stages == s.stages
