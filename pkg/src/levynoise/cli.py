"""Command-line experiment runner.

Every subcommand but ``validate`` reads an experiment file (YAML or JSON) via
``--config``; the subcommand must match its ``kind``. Results go to
``<out>/<kind>.jsonl`` (one record per result) plus CSV files for profiles,
and the exit status is 1 when any consistency check fails.
"""
from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import acceptance
from .charfn import functional_log, mc_char_functional
from .config import ConfigError, ExperimentConfig, load_config
from .export import export_skeleton, write_csv, write_jsonl
from .growth import DichotomyConfig, bump_probe, dichotomy_experiment, dyadic_experiment, growth_profile
from .levy_measure import classify_pam
from .pairing import PAM_GRID, fubini_consistency, pair_noise, stochastic_integral
from .path_sim import simulate_path
from .seeding import replicate_seed
from .sheet_sim import simulate_sheet
from .sheet_sim import slice as sheet_slice

KINDS = ("simulate", "pair", "fubini", "growth", "dichotomy", "charfn", "bump-probe", "dyadic")
HIT_TOL = 1e-6
DYADIC_REL_TOL = 0.25


def _simulate(cfg: ExperimentConfig, seed: int):
    tr = cfg.build_triplet()
    if cfg.d == 1:
        return simulate_path(tr, cfg.horizon, grid_dt=cfg.grid_dt, eps=cfg.eps, seed=seed)
    return simulate_sheet(tr, cfg.horizon, grid_dt=cfg.grid_dt, eps=cfg.eps, seed=seed, d=cfg.d)


def _error(seed, exc, **extra):
    # a ValueError is a documented domain rejection; anything else is a numeric failure
    rejected = isinstance(exc, ValueError)
    return {"seed": seed, **extra, "error": f"{type(exc).__name__}: {exc}",
            "status": "rejected" if rejected else "failed", "pass": None if rejected else False}


# -- per-seed tasks ------------------------------------------------------------------


def _task_simulate(cfg, seed, out):
    sk = _simulate(cfg, seed)
    files = export_skeleton(sk, out / "skeletons", f"seed-{seed}")
    return [{"seed": seed, "large_jumps": int(len(sk.jump_size)), "small_jumps": int(len(sk.small_size)),
             "neglected_variance": sk.neglected_var, "files": [str(p) for p in files.values()], "pass": True}]


def _task_pair(cfg, seed, out):
    sk = _simulate(cfg, seed)
    recs = []
    for pid, phi in cfg.test_functions():
        for fn in (pair_noise, stochastic_integral):
            try:
                r = fn(sk, phi)
                recs.append({"seed": seed, "phi_id": pid, **r.to_record(), "pass": True})
            except ValueError as exc:
                recs.append(_error(seed, exc, phi_id=pid, method=fn.__name__))
    return recs


def _task_fubini(cfg, seed, out):
    sk = _simulate(cfg, seed)
    recs = []
    for pid, phi in cfg.test_functions():
        try:
            r = fubini_consistency(sk, phi)
            recs.append({"seed": seed, "phi_id": pid, **r.to_record()})
        except ValueError as exc:
            recs.append(_error(seed, exc, phi_id=pid))
    return recs


def _growth_alpha(cfg):
    if cfg.alpha is not None:
        return cfg.alpha
    v = classify_pam(cfg.build_triplet().nu, PAM_GRID)
    return max(1.0 / v.witness_eta, 1.0) if v.has_pam else 1.0


def _task_growth(cfg, seed, out):
    sk = _simulate(cfg, seed)
    path = sk if cfg.d == 1 else sheet_slice(sk, cfg.d - 1, 1.0, part="large")
    cps = cfg.checkpoints or np.geomspace(min(1.0, cfg.horizon), cfg.horizon, 9).tolist()
    prof = growth_profile(path, _growth_alpha(cfg), cps)
    return [{"seed": seed, **row, "pass": True} for row in prof.to_rows()]


def _task_bump(cfg, seed, out):
    sk = _simulate(cfg, seed)
    tr = cfg.build_triplet()
    pure = tr.gamma == 0 and tr.sigma == 0 and not len(sk.small_size) and sk.comp_rate == 0
    rows = bump_probe(sk, range(cfg.n_range[0], cfg.n_range[1] + 1))
    recs = []
    for r in rows:
        ok = not (pure and r.hit) or r.error <= HIT_TOL
        recs.append({"seed": seed, "n": r.n, "S_n": r.S_n, "pairing": r.pairing, "value_at_S": r.value_at_S,
                     "hit": r.hit, "pass": ok})
    return recs


TASKS = {"simulate": _task_simulate, "pair": _task_pair, "fubini": _task_fubini, "growth": _task_growth,
         "bump-probe": _task_bump}


def _per_seed(cfg, out, threads):
    task = TASKS[cfg.kind]
    seeds = [replicate_seed(cfg.seed, i) for i in range(cfg.seeds)]

    def run(seed):
        try:
            return task(cfg, seed, out)
        except (ValueError, ArithmeticError) as exc:
            return [_error(seed, exc)]

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            chunks = list(pool.map(run, seeds))
    else:
        chunks = [run(s) for s in seeds]
    return [r for c in chunks for r in c]


# -- whole-experiment kinds ---------------------------------------------------------------


def _run_dichotomy(cfg, out, threads):
    rep = dichotomy_experiment(cfg.build_triplet(), cfg.d,
                               DichotomyConfig(seeds=cfg.seeds, seed=cfg.seed, horizons=tuple(cfg.horizons),
                                               alpha=cfg.alpha))
    return [{**rep.to_record(), "pass": rep.consistent}]


def _run_charfn(cfg, out, threads):
    tr = cfg.build_triplet()
    recs = []
    for pid, phi in cfg.test_functions():
        exact = complex(np.exp(functional_log(tr, phi)))
        mean, se = mc_char_functional(tr, phi, cfg.n_mc, cfg.seed)
        z = max(abs(mean.real - exact.real) / se.real if se.real else 0.0,
                abs(mean.imag - exact.imag) / se.imag if se.imag else 0.0)
        recs.append({"phi_id": pid, "triplet_id": str(tr.to_dict()), "analytic_re": exact.real,
                     "analytic_im": exact.imag, "mc_re": mean.real, "mc_im": mean.imag, "stderr_re": se.real,
                     "stderr_im": se.imag, "pass": bool(z <= 5)})
    return recs


def _run_dyadic(cfg, out, threads):
    rep = dyadic_experiment(cfg.build_triplet(), cfg.d, seeds=cfg.seeds, seed=cfg.seed, alpha=cfg.alpha,
                            blocks=[tuple(b) for b in cfg.blocks] if cfg.blocks else None, grid_dt=cfg.grid_dt)
    pred = rep.predicted(cfg.d)
    ok = pred > 0 and not math.isnan(rep.exponent) and abs(rep.exponent - pred) <= DYADIC_REL_TOL * pred
    write_csv(out / "dyadic.csv", rep.to_rows())
    return [{"alpha": rep.alpha, "exponent": rep.exponent, "predicted": pred, "blocks": rep.to_rows(),
             "pass": bool(ok)}]


def run(cfg: ExperimentConfig, out, threads: int = 1) -> int:
    """Run one experiment, write its outputs and return the exit status."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.kind in TASKS:
        recs = _per_seed(cfg, out, threads)
    else:
        recs = {"dichotomy": _run_dichotomy, "charfn": _run_charfn, "dyadic": _run_dyadic}[cfg.kind](cfg, out, threads)
    write_jsonl(out / f"{cfg.kind}.jsonl", recs)
    if cfg.kind == "growth":
        write_csv(out / "growth.csv", [{k: v for k, v in r.items() if k != "pass"} for r in recs if "error" not in r])
    failed = sum(r.get("pass") is False for r in recs)
    rejected = sum(r.get("status") == "rejected" for r in recs)
    print(f"{cfg.kind}: {len(recs)} records, {failed} failed, {rejected} rejected -> {out / (cfg.kind + '.jsonl')}")
    return 1 if failed else 0


def _validate(args) -> int:
    only = set(args.only) if args.only else None
    results = acceptance.run_suite(args.tolerance_scale, only, args.threads)
    for r in results:
        print(r.line())
    if args.out:
        write_jsonl(Path(args.out) / "validate.jsonl", [r.to_record() for r in results])
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="override the experiment's seed base (unsigned 64-bit)")
    common.add_argument("--out", help="output directory (default: config 'out' or ./levynoise-out)")
    common.add_argument("--threads", type=int, default=1, help="worker threads over seeds")
    p = argparse.ArgumentParser(prog="levynoise", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        s = sub.add_parser(kind, parents=[common], help=f"run a '{kind}' experiment")
        s.add_argument("--config", required=True, help="experiment file (.yaml, .yml or .json)")
    v = sub.add_parser("validate", parents=[common], help="run the acceptance suite with pinned seeds")
    v.add_argument("--tolerance-scale", type=float, default=1.0, help="multiply every numeric tolerance")
    v.add_argument("--only", type=int, nargs="+", help="criterion numbers to run")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    if args.command == "validate":
        return _validate(args)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"levynoise: config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"levynoise: cannot read config: {exc}", file=sys.stderr)
        return 2
    if cfg.kind != args.command:
        print(f"levynoise: config kind '{cfg.kind}' does not match subcommand '{args.command}'", file=sys.stderr)
        return 2
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            parser.error("--seed must be an unsigned 64-bit integer")
        cfg = cfg.model_copy(update={"seed": args.seed})
    out = args.out or cfg.out or "levynoise-out"
    return run(cfg, out, args.threads)


if __name__ == "__main__":
    sys.exit(main())
