"""Command-line front end.

Subcommands:

  run            one CSV row per (load, seed, application)
  sweep          cartesian run over the configured axis values and seeds
  attack         replay a permission-register attack corpus
  list-presets   show the built-in experiment presets
  validate       check a config file and exit

Exit codes: 0 success, 1 config error, 2 runtime invariant violation,
3 security escape found.
"""

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor

from dpsim import config as cfgmod
from dpsim.config import ConfigError
from dpsim.engine import SimulationError
from dpsim.metrics import CSV_HEADER
from dpsim.protection import (
    DEFAULT_GATES,
    GateRegisters,
    generate_corpus,
    replay_corpus,
)
from dpsim.workload import PRESET_NAMES


class InvariantViolation(Exception):
    pass


def _load_and_resolve(args):
    cfg = cfgmod.load_config(args.config)
    cfg = cfgmod.resolve(cfg)
    for ov in args.override or []:
        key, value = cfgmod.parse_override_arg(ov)
        cfgmod.apply_override(cfg, key, value)
    if args.seeds:
        try:
            cfg["seeds"] = [int(s) for s in args.seeds.split(",")]
        except ValueError:
            raise ConfigError(f"--seeds: expected comma-separated ints, got {args.seeds!r}")
    cfgmod.validate(cfg)
    return cfg


def _run_point(payload):
    """One (config, seed, load) simulation; returns finished CSV rows.

    Module-level so sweep points can run in worker processes.
    """
    cfg, seed, load = payload
    experiment = cfg.get("experiment", "run") or "run"
    policy = cfg.get("policy", "cygnus")
    sim = cfgmod.build_simulation(cfg, seed, load)
    summaries = sim.run()
    rows = []
    for s in summaries:
        if not s.conservation_holds():
            raise InvariantViolation(
                f"request conservation failed for {s.app_name}: "
                f"{s.arrivals} arrivals != {s.completions} completions "
                f"+ {s.in_flight} in flight + {s.drops} drops"
            )
        label = experiment if len(summaries) == 1 else f"{experiment}/{s.app_name}"
        rows.append(s.csv_row(label, policy, seed))
    return rows


def _collect(points, parallel):
    """Run all points, preserving input order regardless of completion."""
    if parallel and parallel > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            batches = list(pool.map(_run_point, points))
    else:
        batches = [_run_point(p) for p in points]
    return [row for batch in batches for row in batch]


def _emit(rows, out_path):
    text = "\n".join([CSV_HEADER] + rows) + "\n"
    if out_path:
        with open(out_path, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def cmd_run(args):
    cfg = _load_and_resolve(args)
    points = [
        (cfg, seed, load)
        for load in cfg.get("loads", [0.0])
        for seed in cfg.get("seeds", [1])
    ]
    _emit(_collect(points, args.parallel), args.out)
    return 0


def cmd_sweep(args):
    cfg = _load_and_resolve(args)
    if "sweep" not in cfg:
        raise ConfigError("config has no [sweep] table; use `run` instead")
    points = []
    for _, point_cfg in cfgmod.sweep_configs(cfg):
        cfgmod.validate(point_cfg)
        for load in point_cfg.get("loads", [0.0]):
            for seed in point_cfg.get("seeds", [1]):
                points.append((point_cfg, seed, load))
    _emit(_collect(points, args.parallel), args.out)
    return 0


def cmd_attack(args):
    gates = GateRegisters(entry_addr=args.entry, exit_addr=args.exit_gate)
    if args.generate:
        lines = generate_corpus(args.seed, args.generate, gates)
        text = "\n".join(lines) + "\n"
        if args.out:
            with open(args.out, "w") as f:
                f.write(text)
        else:
            sys.stdout.write(text)
        return 0
    if not args.corpus:
        raise ConfigError("attack needs a corpus path (or --generate N)")
    try:
        with open(args.corpus) as f:
            lines = f.readlines()
    except OSError as e:
        raise ConfigError(f"{args.corpus}: {e}")
    try:
        verdicts, escapes, mismatches = replay_corpus(lines, gates)
    except ValueError as e:
        raise ConfigError(str(e))
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        for n, outcome, expected, ok in verdicts:
            status = "ok" if ok else "MISMATCH"
            out.write(f"line {n}: {outcome} (expected {expected}) {status}\n")
        out.write(
            f"summary: {len(verdicts)} attempts, {escapes} escapes, "
            f"{mismatches} mismatches\n"
        )
    finally:
        if args.out:
            out.close()
    return 3 if escapes else 0


def cmd_list_presets(_args):
    for name in PRESET_NAMES:
        print(name)
    return 0


def cmd_validate(args):
    cfg = _load_and_resolve(args)
    n_loads = len(cfg.get("loads", []))
    n_seeds = len(cfg.get("seeds", [1]))
    print(f"ok: {cfg.get('experiment', '?')} ({n_loads} loads x {n_seeds} seeds)")
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="dpsim",
        description="Discrete-event simulator of protected data-plane scheduling.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="TOML or JSON config file")
        sp.add_argument("--out", default=None, help="CSV output path (default stdout)")
        sp.add_argument("--seeds", default=None, help="comma-separated seed list")
        sp.add_argument("--parallel", type=int, default=1, metavar="K")
        sp.add_argument(
            "--override",
            action="append",
            metavar="KEY=VALUE",
            help="dot-path config override, repeatable",
        )

    common(sub.add_parser("run", help="run the config's load points"))
    common(sub.add_parser("sweep", help="run the config's [sweep] axis"))

    at = sub.add_parser("attack", help="replay a WRPKRU attack corpus")
    at.add_argument("corpus", nargs="?", help="corpus file to replay")
    at.add_argument("--out", default=None)
    at.add_argument("--generate", type=int, default=0, metavar="N",
                    help="emit a fresh N-line corpus instead of replaying")
    at.add_argument("--seed", type=int, default=1)
    at.add_argument("--entry", type=lambda s: int(s, 16),
                    default=DEFAULT_GATES.entry_addr, metavar="HEX")
    at.add_argument("--exit", dest="exit_gate", type=lambda s: int(s, 16),
                    default=DEFAULT_GATES.exit_addr, metavar="HEX")

    sub.add_parser("list-presets", help="list built-in experiment presets")

    va = sub.add_parser("validate", help="check a config file")
    common(va)

    return p


_DISPATCH = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "attack": cmd_attack,
    "list-presets": cmd_list_presets,
    "validate": cmd_validate,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (SimulationError, InvariantViolation) as e:
        print(f"invariant violation: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
