"""Command line: `penalty-stop run --config FILE` and `penalty-stop compare DIR_A DIR_B`.

Exit codes: 0 success, 1 an enabled check failed, 2 configuration error,
3 numerical failure (non-convergence or a monotonicity violation).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import _io
from .chain import ConfigurationError, add_jumps, build_diffusion_chain, uniform_jump_law
from .config import ConfigError, RunConfig, load_config, make_coefficient, make_payoff
from .lattice import PREDICATES, StateGrid, build_region
from .oracle import snell_backward, steps_for_tail
from .payoff import Mode, PayoffSpec
from .penalty_solver import NumericalFailure, PenaltyConfig, PenaltyProblem, beta_sweep
from .policy import build_region_eps, estimate_exit_tail, evaluate_policy
from .reference import BrownianExample, build_brownian_problem, sample_points, verify_example

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _set_threads() -> None:
    raw = os.environ.get("PENALTY_STOP_THREADS")
    if not raw:
        return
    import numba

    try:
        n = int(raw)
    except ValueError:
        raise ConfigError("PENALTY_STOP_THREADS", f"not an integer: {raw!r}") from None
    if n < 1:
        raise ConfigError("PENALTY_STOP_THREADS", "must be >= 1")
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _tag(beta: float) -> str:
    return format(beta, "g")


def build_problem(cfg: RunConfig) -> PenaltyProblem:
    g = cfg.grid
    grid = StateGrid.uniform(g["lower"], g["upper"], g["spacing"])
    name, params = cfg.region
    try:
        predicate = PREDICATES[name](**params)
    except TypeError as e:
        raise ConfigError("region", str(e)) from None
    region = build_region(grid, predicate)
    kernel = build_diffusion_chain(grid, make_coefficient(*cfg.drift), make_coefficient(*cfg.vol), g["h"])
    if cfg.jump_rate > 0:
        try:
            targets = [grid.index_of(x) for x in cfg.jump_targets]
        except ValueError as e:
            raise ConfigError("chain.jump_targets", str(e)) from None
        kernel = add_jumps(kernel, cfg.jump_rate, uniform_jump_law(grid.size, targets))
    payoffs = {}
    for key, (kind, params) in cfg.payoffs.items():
        try:
            payoffs[key] = make_payoff(kind, params)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"payoff.{key}", str(e)) from None
    spec = PayoffSpec(cfg.alpha, payoffs["f"], payoffs["G"], payoffs["H"], mode=Mode(cfg.mode),
                      boundary_convention=cfg.boundary_convention, horizon=cfg.horizon)
    return PenaltyProblem(kernel, region, spec)


def _run_problem(cfg: RunConfig, out: Path, prov: str) -> tuple[dict, list]:
    problem = build_problem(cfg)
    grid = problem.region.grid
    pcfg = PenaltyConfig(beta=cfg.beta_schedule[-1], tol=cfg.tol, max_iters=cfg.max_iters,
                         beta_schedule=cfg.beta_schedule)
    summary = {"mode": cfg.mode, "method": cfg.method, "seed": cfg.seed, "states": grid.size, "h": problem.kernel.h}
    checks = []

    oracle = None
    if cfg.method == "snell" or cfg.oracle_check:
        if problem.spec.mode is Mode.FINITE:
            oracle = snell_backward(problem.kernel, problem.region, problem.spec)
        else:
            nf, ng = problem.spec.sup_norm(problem.region)
            N = steps_for_tail(problem.spec, problem.kernel.h, cfg.tol, nf / cfg.alpha + 2 * ng)
            oracle = snell_backward(problem.kernel, problem.region, problem.spec, N)
        _io.write_csv(out / "oracle_values.csv", ["slice", "state", "x", "value"],
                      ((k, i, grid.points[i], v) for k, row in enumerate(oracle.values) for i, v in enumerate(row)),
                      prov)
        summary["oracle_tail_bound"] = oracle.tail_bound

    if cfg.method == "snell":
        final = None
    else:
        sweep = beta_sweep(lambda b, init: problem.solve(b, pcfg, init), pcfg, cfg.target_bound)
        for fld in sweep.fields:
            _io.write_values(out / f"values_beta_{_tag(fld.beta)}.csv", fld, grid.points, prov)
        _io.write_convergence(out / "convergence.csv", sweep.log, prov)
        _io.write_timings(out / "timings.csv", sweep.log, prov)
        final = sweep.final
        summary.update(betas=list(sweep.betas), target_beta=sweep.target_beta, error_bound=final.error_bound)
        if oracle is not None and cfg.oracle_check:
            w, ws = final.values, oracle.values
            if ws.shape[0] != w.shape[0]:
                ws = ws[:1]
                w = w[:1]
            slack = cfg.tol + oracle.tail_bound + final.distance_bound
            upper = float(np.max(w - ws))
            lower = float(np.max(ws - final.error_bound - w))
            ok = upper <= slack and lower <= slack
            checks.append({"name": "oracle_sandwich", "passed": ok, "upper_violation": upper,
                           "lower_violation": lower, "slack": slack})

    if final is not None:
        region_mask = build_region_eps(final, problem.spec, problem.region, cfg.policy["epsilon"])
        region_mask.to_csv(out / "mask.csv", prov)
        if cfg.policy["enabled"]:
            start = grid.index_of(cfg.policy["start"])
            est = evaluate_policy(problem.kernel, problem.region, problem.spec, region_mask, start, 0.0,
                                  cfg.policy["n_paths"], cfg.seed)
            pol = {"start_x": float(grid.points[start]), "epsilon": cfg.policy["epsilon"], "beta": final.beta,
                   "n_paths": est.n_paths, "seed": cfg.seed, "estimate": est.mean, "se": est.se,
                   "w_beta": float(final.values[0][start])}
            if cfg.policy["eta"] is not None:
                tail = estimate_exit_tail(problem.kernel, problem.region, start, cfg.policy["eta"],
                                          cfg.policy["n_paths"], cfg.seed)
                pol.update(eta=cfg.policy["eta"], exit_tail=tail.mean, exit_tail_se=tail.se)
            _io.write_json(out / "policy.json", pol, prov)
    return summary, checks


def _run_benchmark(cfg: RunConfig, out: Path, prov: str) -> tuple[dict, list]:
    b = cfg.benchmark
    example = BrownianExample(alpha=b["alpha"], x_left=b["x_left"])
    pcfg = PenaltyConfig(beta=cfg.beta_schedule[-1], tol=cfg.tol, max_iters=cfg.max_iters,
                         beta_schedule=cfg.beta_schedule)
    levels, checks = [], []
    for dx in b["spacings"]:
        problem = build_brownian_problem(example, dx)
        grid = problem.region.grid
        sweep = problem.sweep(pcfg)
        tag = _tag(dx)
        _io.write_values(out / f"values_dx_{tag}_beta_{_tag(sweep.final.beta)}.csv", sweep.final, grid.points, prov)
        _io.write_convergence(out / f"convergence_dx_{tag}.csv", sweep.log, prov)
        _io.write_timings(out / f"timings_dx_{tag}.csv", sweep.log, prov)
        idx = sample_points(grid, b["n_sample"], b["sample_lower"], b["sample_upper"] + 0.5 * dx)
        rep = verify_example(sweep.final, problem, example, b["slack"], idx)
        rep.to_csv(out / f"reference_dx_{tag}.csv", prov)
        build_region_eps(sweep.final, problem.spec, problem.region, 0.0).to_csv(out / f"mask_dx_{tag}.csv", prov)
        levels.append({"dx": dx, "beta": sweep.final.beta, "shortfall": rep.shortfall,
                       "interior_stops": rep.interior_stop_x.tolist(), "failures": rep.failures})
        checks.append({"name": f"sup_l_bound_dx_{tag}", "passed": rep.shortfall <= b["slack"],
                       "shortfall": rep.shortfall})
        checks.append({"name": f"no_interior_stop_dx_{tag}", "passed": rep.interior_stop_x.size == 0,
                       "interior_stop_x": rep.interior_stop_x.tolist()})
    short = [lv["shortfall"] for lv in levels]
    checks.append({"name": "shortfall_shrinks", "passed": all(s2 <= s1 for s1, s2 in zip(short, short[1:])),
                   "shortfalls": short})
    return {"mode": "benchmark", "alpha": example.alpha, "levels": levels}, checks


def cmd_run(args) -> int:
    cfg = load_config(args.config, mode=args.mode, seed=args.seed, output_dir=args.output_dir,
                      beta_list=args.beta_list)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    prov = _io.provenance(cfg.text)
    if cfg.mode == "benchmark":
        summary, checks = _run_benchmark(cfg, out, prov)
    else:
        summary, checks = _run_problem(cfg, out, prov)
    failed = [c["name"] for c in checks if not c["passed"]]
    summary["checks"] = checks
    summary["passed"] = not failed
    _io.write_json(out / "summary.json", summary, prov)
    if failed:
        print(f"run: checks failed: {', '.join(failed)} (see {out / 'summary.json'})", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def _read_values(path: Path) -> dict:
    header, rows = _io.read_csv(path)
    if header[:4] != ["slice", "state", "x", "value"]:
        raise ConfigError(str(path), "not a value-field CSV")
    return {(int(r[0]), round(float(r[2]), 9)): float(r[3]) for r in rows}


class LatticeMismatch(ValueError):
    pass


def compare_dirs(dir_a, dir_b) -> dict:
    """Sup-norm and per-state differences (B - A) for value CSVs present in both runs.

    States are matched by (slice, x); fields without a single common state
    raise LatticeMismatch.
    """
    dir_a, dir_b = Path(dir_a), Path(dir_b)
    names = sorted({p.name for p in dir_a.glob("*values*.csv")} & {p.name for p in dir_b.glob("*values*.csv")})
    if not names:
        raise LatticeMismatch("no value-field CSVs in common")
    report = {}
    for name in names:
        a, b = _read_values(dir_a / name), _read_values(dir_b / name)
        common = sorted(set(a) & set(b))
        if not common:
            raise LatticeMismatch(f"{name}: no grid points in common")
        diffs = [(k, x, b[(k, x)] - a[(k, x)]) for k, x in common]
        report[name] = {
            "sup_diff": max(abs(d) for _, _, d in diffs),
            "n_common": len(common),
            "same_lattice": set(a) == set(b),
            "per_state": diffs,
        }
    return report


def cmd_compare(args) -> int:
    try:
        report = compare_dirs(args.dir_a, args.dir_b)
    except LatticeMismatch as e:
        print(f"compare: lattice mismatch: {e}", file=sys.stderr)
        return EXIT_CONFIG
    for name, r in report.items():
        print(f"{name}\tsup_diff={r['sup_diff']:.17g}\tcommon={r['n_common']}")
    if args.output:
        rows = ((name, k, x, d) for name, r in report.items() for k, x, d in r["per_state"])
        _io.write_csv(args.output, ["file", "slice", "x", "diff"], rows, _io.provenance())
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="penalty-stop", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="solve the problem described by a config file")
    r.add_argument("--config", required=True, metavar="PATH")
    r.add_argument("--output-dir", metavar="PATH")
    r.add_argument("--seed", type=int, metavar="N", help="overrides run.seed")
    r.add_argument("--mode", choices=("exit", "general", "infinite", "finite", "benchmark"))
    r.add_argument("--beta-list", metavar="b1,b2,...", help="overrides solver.beta_schedule")
    r.set_defaults(func=cmd_run)
    c = sub.add_parser("compare", help="difference value fields of two run directories")
    c.add_argument("dir_a")
    c.add_argument("dir_b")
    c.add_argument("--output", metavar="PATH", help="per-state differences as CSV")
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0].startswith("--") and argv[0] not in ("--help",):
        argv.insert(0, "run")
    args = make_parser().parse_args(argv)
    try:
        _set_threads()
        return args.func(args)
    except (ConfigError, ConfigurationError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as e:
        print(f"numerical failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
