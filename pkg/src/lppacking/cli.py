"""Command-line front end.

Exit status: 0 success, 1 invariant or verification failure, 2 insufficient
density, 3 bad configuration or I/O.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .artifacts import atomic_write_text, file_digest, write_json
from .construction import (
    InsufficientDensity,
    InvariantViolation,
    PackingState,
    SamplerConfig,
    all_packing_points,
    build,
    closed_packing_points,
    coverage_stats,
    verify_dispersion,
)
from .lower_bound import (
    HoleError,
    HoleVerificationError,
    check_dispersed,
    greedy_probe,
    iterate_expansion,
    make_hole,
    random_dispersed_set,
    stall_curve,
)
from .lp_space import ORIGIN, CoordId, SpaceParams, points_from_json
from .metrics import UndefinedDispersion, gamma_estimate, report_json
from .sampling import axis_grid, sparse_ball_points

log = logging.getLogger("lppacking")

SEED_ENV = "LPPACKING_SEED"

EXIT_OK, EXIT_FAIL, EXIT_DENSITY, EXIT_CONFIG = 0, 1, 2, 3


class ConfigError(Exception):
    pass


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _load_state(path) -> PackingState:
    with open(path, encoding="utf-8") as fh:
        return PackingState.from_dict(json.load(fh))


def _stage2_coords(state: PackingState) -> list[CoordId]:
    return [c for c in state.minted_coords() if c.stage <= 2]


def cmd_build(args) -> int:
    params = SpaceParams(args.p, args.eta)
    sampler = SamplerConfig(
        truncation_radius=args.rho,
        net_step=args.net_step,
        max_points_per_stage=args.max_points,
        max_support_size=args.max_support,
        candidate_budget=args.budget,
    )
    state = build(params, sampler, args.seed, args.depth)
    out = state.to_dict()
    out["config"] = _config(args)
    write_json(args.out, out)
    print(f"built depth {state.depth} state, {len(all_packing_points(state))} packing points, "
          f"digest {state.digest} -> {args.out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    state = _load_state(args.state)
    rep = verify_dispersion(state)
    out = {
        "config": _config(args),
        "inputs": {args.state: file_digest(args.state)},
        "state_digest": state.digest,
        "report": rep.to_dict(),
    }
    text = json.dumps(out, indent=2, sort_keys=True) + "\n"
    if args.out:
        atomic_write_text(args.out, text)
    sys.stdout.write(text)
    if not rep.ok:
        log.error("dispersion violated: min_excess=%r", rep.min_excess)
        return EXIT_FAIL
    return EXIT_OK


def cmd_cover(args) -> int:
    state = _load_state(args.state)
    coords = _stage2_coords(state)
    if not coords:
        raise ConfigError("state has no minted coordinates to place test points on (depth 1)")
    seed = args.test_seed if args.test_seed is not None else state.seed
    tests = sparse_ball_points(
        coords, args.num_tests, args.test_radius, state.params.p,
        np.random.default_rng(seed), max_support=args.max_test_support or state.sampler.max_support_size,
    )
    stats = coverage_stats(state, tests, args.eps)
    out = {
        "config": _config(args),
        "inputs": {args.state: file_digest(args.state)},
        "state_digest": state.digest,
        "stats": stats.to_dict(),
    }
    write_json(args.out, out)
    print(f"covering witnesses found for {stats.successes}/{stats.num_tests} test points -> {args.out}")
    return EXIT_OK


def cmd_gamma(args) -> int:
    state = _load_state(args.state)
    points = closed_packing_points(state) if args.packing == "closed" else all_packing_points(state)
    if len(points) < 2:
        raise UndefinedDispersion(f"undefined dispersion: {len(points)} packing point(s)")
    if args.axes:
        axes = [CoordId.parse(a.strip()) for a in args.axes.split(",")]
    else:
        axes = _stage2_coords(state)[:2]
    lo, hi = args.range
    tests = axis_grid(axes, lo, hi, args.step)
    if len(tests) > 10**6:
        raise ConfigError(f"test grid has {len(tests)} points")
    rep = gamma_estimate(points, tests, state.params)
    out = report_json(rep, points, tests, state.params)
    out["config"] = _config(args)
    out["inputs"] = {args.state: file_digest(args.state)}
    out["state_digest"] = state.digest
    out["target_ratio"] = 2 ** (1 - 1 / state.params.p)
    write_json(args.out, out)
    print(f"gamma_ratio {rep.gamma_ratio!r} over {len(tests)} test points -> {args.out}")
    return EXIT_OK


def cmd_hole(args) -> int:
    params = SpaceParams(args.p)
    inputs = {}
    if args.points:
        with open(args.points, encoding="utf-8") as fh:
            data = json.load(fh)
        points = points_from_json(data["points"] if isinstance(data, dict) else data)
        inputs[args.points] = file_digest(args.points)
    else:
        points = random_dispersed_set(
            np.random.default_rng(args.seed), params, args.num_points, args.dim, args.max_norm
        )
    target = args.target if args.target is not None else 2 ** (-1 / params.p)
    hole = make_hole(points, ORIGIN, 0.0, args.eps, params)
    if args.steps is not None:
        traj = iterate_expansion(points, hole, params, steps=args.steps)
    else:
        traj = iterate_expansion(points, hole, params, target_radius=target)
    out = {
        "config": _config(args),
        "inputs": inputs,
        "num_points": len(points),
        "target_radius": target,
        "steps": len(traj) - 1,
        "final_radius": traj[-1].radius,
        "trace": [h.trace_entry() for h in traj],
    }
    write_json(args.out, out)
    print(f"hole radius {traj[-1].radius!r} after {len(traj) - 1} steps -> {args.out}")
    return EXIT_OK


def cmd_greedy(args) -> int:
    params = SpaceParams(args.p)
    pts, where = greedy_probe(params, args.dim, args.alpha, args.budget, np.random.default_rng(args.seed))
    check_dispersed(pts, args.alpha, params)
    budgets = [int(b) for b in args.checkpoints.split(",")] if args.checkpoints else [args.budget]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alpha", "budget", "accepted_count", "p", "dim", "seed"])
    for b, count in stall_curve(where, args.dim, budgets):
        w.writerow([repr(args.alpha), b, count, repr(params.p), args.dim, args.seed])
    atomic_write_text(args.out, buf.getvalue())
    print(f"{len(pts)} points accepted at alpha={args.alpha!r} -> {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    entries = []
    for path in args.inputs:
        p = Path(path)
        entry = {"path": path, "digest": file_digest(p)}
        if p.suffix == ".csv":
            with open(p, encoding="utf-8", newline="") as fh:
                entry["kind"] = "greedy"
                entry["rows"] = list(csv.DictReader(fh))
        else:
            with open(p, encoding="utf-8") as fh:
                data = json.load(fh)
            if "stages" in data:
                entry["kind"] = "state"
                entry["state_digest"] = data.get("digest")
                entry["depth"] = len(data["stages"])
                entry["stage_sizes"] = [len(s["D"]) for s in data["stages"]]
            elif "report" in data:
                entry["kind"] = "verify"
                entry["ok"] = data["report"]["ok"]
                entry["min_excess"] = data["report"]["min_excess"]
            elif "stats" in data:
                entry["kind"] = "cover"
                entry.update({k: data["stats"][k] for k in ("success_rate", "num_tests")})
            elif "gamma_ratio" in data:
                entry["kind"] = "gamma"
                entry.update({k: data[k] for k in ("gamma_ratio", "target_ratio", "num_test_points")})
            elif "trace" in data:
                entry["kind"] = "hole"
                entry.update({k: data[k] for k in ("steps", "final_radius", "target_radius")})
                entry["all_verified"] = all(t["verified"] for t in data["trace"])
            else:
                entry["kind"] = "unknown"
        entries.append(entry)
    write_json(args.out, {"config": _config(args), "artifacts": entries})
    print(f"summarized {len(entries)} artifacts -> {args.out}")
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lppacking", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="run the staged construction and write a state file")
    b.add_argument("--p", type=float, default=2.0)
    b.add_argument("--eta", type=float, default=1e-9)
    b.add_argument("--depth", type=int, default=3)
    b.add_argument("--seed", type=int, default=None)
    b.add_argument("--rho", type=float, default=3.0, help="truncation radius")
    b.add_argument("--net-step", type=float, default=0.5)
    b.add_argument("--max-points", type=int, default=200)
    b.add_argument("--max-support", type=int, default=3)
    b.add_argument("--budget", type=int, default=None, help="candidate budget (default 50 * max-points)")
    b.add_argument("--out", default="state.json")
    b.set_defaults(func=cmd_build)

    v = sub.add_parser("verify", help="check exact dispersion of a state file")
    v.add_argument("--state", default="state.json")
    v.add_argument("--out", default=None)
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("cover", help="covering-witness success rate on random test points")
    c.add_argument("--state", default="state.json")
    c.add_argument("--eps", type=float, default=0.5)
    c.add_argument("--num-tests", type=int, default=500)
    c.add_argument("--test-radius", type=float, default=2.0)
    c.add_argument("--test-seed", type=int, default=None)
    c.add_argument("--max-test-support", type=int, default=None)
    c.add_argument("--out", default="cover.json")
    c.set_defaults(func=cmd_cover)

    g = sub.add_parser("gamma", help="packing/covering ratio over a coordinate grid")
    g.add_argument("--state", default="state.json")
    g.add_argument("--axes", default=None, help="comma-separated coordinate ids, e.g. s1i0,s2i0")
    g.add_argument("--range", type=float, nargs=2, default=(-1.0, 1.0), metavar=("LO", "HI"))
    g.add_argument("--step", type=float, default=0.1)
    g.add_argument("--packing", choices=("closed", "all"), default="closed",
                   help="closed also includes the lifts of the last D-set")
    g.add_argument("--out", default="gamma.json")
    g.set_defaults(func=cmd_gamma)

    h = sub.add_parser("hole", help="iterated hole expansion along fresh coordinates")
    h.add_argument("--p", type=float, default=2.0)
    h.add_argument("--points", default=None, help="JSON list of points (default: random 1-dispersed set)")
    h.add_argument("--num-points", type=int, default=200)
    h.add_argument("--dim", type=int, default=30)
    h.add_argument("--max-norm", type=float, default=5.0)
    h.add_argument("--seed", type=int, default=None)
    h.add_argument("--eps", type=float, default=0.05)
    h.add_argument("--steps", type=int, default=None)
    h.add_argument("--target", type=float, default=None, help="target radius (default 2^(-1/p))")
    h.add_argument("--out", default="hole.json")
    h.set_defaults(func=cmd_hole)

    gr = sub.add_parser("greedy", help="greedy dispersed-set probe in the unit ball")
    gr.add_argument("--p", type=float, default=2.0)
    gr.add_argument("--dim", type=int, default=20)
    gr.add_argument("--alpha", type=float, required=True)
    gr.add_argument("--budget", type=int, default=10**5)
    gr.add_argument("--seed", type=int, default=None)
    gr.add_argument("--checkpoints", default=None, help="comma-separated budgets to report")
    gr.add_argument("--out", default="greedy.csv")
    gr.set_defaults(func=cmd_greedy)

    r = sub.add_parser("report", help="summarize artifact files")
    r.add_argument("inputs", nargs="+")
    r.add_argument("--out", default="report.json")
    r.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = _parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if hasattr(args, "seed") and args.seed is None:
            args.seed = _default_seed()
        return args.func(args)
    except (InvariantViolation, UndefinedDispersion, HoleVerificationError, AssertionError) as e:
        log.error("%s", e)
        return EXIT_FAIL
    except InsufficientDensity as e:
        log.error("insufficient density: %s", e)
        return EXIT_DENSITY
    except (ConfigError, HoleError, ValueError, KeyError, OSError, json.JSONDecodeError) as e:
        log.error("%s", e)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
