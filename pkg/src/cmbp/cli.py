"""Command-line interface.

    cmbp classify --config run.json
    cmbp simulate --config run.json --seed 7 --out paths.csv
    cmbp limit    --config run.json --seed 7 --out sde.csv
    cmbp verify   --config run.json --seed 7 --threads 4
    cmbp preset list
    cmbp preset show two_sex_promiscuous

Exit codes: 0 success, 1 failed check or unmet precondition, 2 bad input.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import _backend
from .config import ConfigError, RunConfig, load_config, preset_config
from .engine import monte_carlo, write_trajectories_csv
from .limit import euler_maruyama, gamma_marginal, write_sde_csv
from .model import NotCriticalError, classify, limit_coefficients, model_hash
from .presets import PRESETS
from .verify import run_suite


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _seed(args, cfg: RunConfig) -> int:
    seed = args.seed if args.seed is not None else cfg.master_seed
    if seed is None:
        raise ConfigError("this command is stochastic: give master_seed in the config or --seed")
    return seed


def cmd_classify(args, cfg: RunConfig) -> int:
    rep = classify(cfg.model, cfg.classify.tolerance_band)
    _emit(_dump({"model": cfg.model.name, "model_hash": model_hash(cfg.model), **rep.to_dict()}), args.out)
    return 0


def cmd_simulate(args, cfg: RunConfig) -> int:
    sp = cfg.simulate
    res = monte_carlo(cfg.model, 1, sp.K, sp.trajectories, _seed(args, cfg), threads=args.threads, K=sp.K,
                      naive=sp.naive)
    if res.values:
        _emit(write_trajectories_csv(res.values), args.out)
    print(f"simulated {res.n_ok} trajectories, {res.n_failed} failed", file=sys.stderr)
    for sid, msg in res.failures:
        print(f"  trajectory {sid}: {msg}", file=sys.stderr)
    return 0


def cmd_limit(args, cfg: RunConfig) -> int:
    lp = cfg.limit
    lc = limit_coefficients(cfg.model)
    seed = _seed(args, cfg)
    gm = gamma_marginal(max(lc.drift, 0.0), lc.diffusion, lp.t)
    paths = [euler_maruyama(lc.drift, lc.diffusion, lp.T, lp.dt, seed, path_id=i) for i in range(lp.paths)]
    if args.out:
        write_sde_csv(paths, args.out)
    report = {
        "model": cfg.model.name,
        "model_hash": model_hash(cfg.model),
        "coefficients": lc.to_dict(),
        "marginal": gm.to_dict(),
        "degenerate": gm.kind == "degenerate_line",
        "paths": lp.paths,
        "dt": lp.dt,
        "T": lp.T,
        "master_seed": seed,
    }
    sys.stdout.write(_dump(report))
    return 0


def cmd_verify(args, cfg: RunConfig) -> int:
    vp = cfg.verify
    reports = run_suite(cfg.model, vp.n, vp.t, vp.trajectories, _seed(args, cfg), vp.k_max,
                        vp.growth_trajectories, vp.level, threads=args.threads)
    _emit(_dump([r.to_dict() for r in reports]), args.out)
    return 0 if all(r.passed for r in reports) else 1


def cmd_preset(args) -> int:
    if args.action == "list":
        width = max(len(k) for k in PRESETS)
        for name, (_, summary) in PRESETS.items():
            print(f"{name:<{width}}  {summary}")
        return 0
    if not args.name or args.name not in PRESETS:
        print(f"error: preset show needs one of {sorted(PRESETS)}", file=sys.stderr)
        return 2
    _emit(_dump(preset_config(args.name)), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cmbp", description="Controlled multi-type branching processes")
    parser.add_argument("--backend-info", action="store_true", help="print the kernel backend and exit")
    sub = parser.add_subparsers(dest="command")
    for name, helptext in (
        ("classify", "criticality report"),
        ("simulate", "trajectories as CSV"),
        ("limit", "limit coefficients, Gamma marginal and SDE paths"),
        ("verify", "statistical verification suite"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
        p.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
        p.add_argument("--out", default=None, help="output file (default: stdout)")
    pp = sub.add_parser("preset", help="list presets or print a preset config")
    pp.add_argument("action", choices=["list", "show"])
    pp.add_argument("name", nargs="?")
    pp.add_argument("--out", default=None)
    return parser


COMMANDS = {"classify": cmd_classify, "simulate": cmd_simulate, "limit": cmd_limit, "verify": cmd_verify}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.backend_info:
        print(_backend.NAME)
        return 0
    if args.command is None:
        parser.print_help()
        return 2
    if args.command == "preset":
        return cmd_preset(args)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NotCriticalError as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
