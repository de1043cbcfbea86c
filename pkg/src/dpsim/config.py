"""Experiment configuration: file parsing, validation, overrides, and
construction of Simulation runs.

Configs are TOML (or JSON).  A config may name a preset via `experiment`;
file values override the preset's.  Unknown keys are rejected so typos
fail fast instead of silently running defaults.
"""

import copy
import json
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from dpsim.costs import CostModel
from dpsim.engine import MS, US
from dpsim.sched import POLICIES, SchedulerParams
from dpsim.simulate import Simulation
from dpsim.workload import (
    PRESET_NAMES,
    AppSpec,
    ServiceDist,
    Steering,
    build_experiment,
)


class ConfigError(Exception):
    pass


_SCHEDULER_KEYS = {
    "n": int,
    "t_us": (int, float),
    "preempt_us": (int, float),
    "io_batch": int,
    "io_cores": int,
    "pull_charge_cycles": int,
    "preempt_to_local": bool,
}

_COST_KEYS = {
    "cpu_freq_hz": (int, float),
    "gate_switch_cycles": int,
    "wrpkru_cycles": int,
    "activation_cycles": int,
    "posix_signal_cycles": int,
    "ipi_cycles": int,
    "kernel_thread_spawn_cycles": int,
    "per_request_stack_cycles": int,
    "msg_hop_cycles": int,
    "preemption_interval_ns": int,
}

_WORKLOAD_KEYS = {
    "service": str,
    "mean_us": (int, float),
    "p_long": (int, float),
    "short_us": (int, float),
    "long_us": (int, float),
}

_STEERING_KEYS = {"scheme": str, "weights": list}

_SWEEP_KEYS = {"axis": str, "values": list}

_APP_KEYS = {
    "name": str,
    "cores": int,
    "load_ops": (int, float),
    "sweep_load": bool,
    "msg_bytes": int,
    "seed_offset": int,
    "workload": dict,
    "steering": dict,
}

_TOP_KEYS = {
    "experiment": str,
    "policy": str,
    "cores": int,
    "seeds": list,
    "loads": list,
    "duration_ms": (int, float),
    "warmup_frac": (int, float),
    "rx_capacity": int,
    "rtt_ns": int,
    "scheduler": dict,
    "cost": dict,
    "workload": dict,
    "steering": dict,
    "sweep": dict,
    "apps": list,
}

SWEEP_AXES = ("load", "cores", "io_cores", "n", "t")


def load_config(path):
    """Parse a TOML or JSON config file into a raw dict."""
    try:
        raw = open(path, "rb").read()
    except OSError as e:
        raise ConfigError(f"{path}: {e}") from None
    if str(path).endswith(".json"):
        try:
            return json.loads(raw)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}:{e.lineno}: {e.msg}") from None
    try:
        return tomllib.loads(raw.decode())
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from None


def _deep_update(base, extra):
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            _deep_update(base[k], v)
        else:
            base[k] = v
    return base


def resolve(cfg):
    """Expand the preset (if any) and overlay the file's own values."""
    cfg = copy.deepcopy(cfg)
    name = cfg.get("experiment")
    if name and name in PRESET_NAMES:
        merged = build_experiment(name)
        _deep_update(merged, cfg)
        return merged
    return cfg


def _check_table(table, allowed, where):
    if not isinstance(table, dict):
        raise ConfigError(f"{where}: expected a table")
    for k, v in table.items():
        if k not in allowed:
            raise ConfigError(f"{where}.{k}: unknown key")
        if not isinstance(v, allowed[k]) or isinstance(v, bool) != (allowed[k] is bool):
            raise ConfigError(
                f"{where}.{k}: expected {allowed[k]}, got {type(v).__name__}"
            )


def validate(cfg):
    """Full structural validation; raises ConfigError with a key path."""
    _check_table(cfg, _TOP_KEYS, "config")
    policy = cfg.get("policy", "cygnus")
    if policy not in POLICIES:
        raise ConfigError(f"config.policy: unknown policy {policy!r}")
    if "scheduler" in cfg:
        _check_table(cfg["scheduler"], _SCHEDULER_KEYS, "scheduler")
    if "cost" in cfg:
        _check_table(cfg["cost"], _COST_KEYS, "cost")
    if "workload" in cfg:
        _check_table(cfg["workload"], _WORKLOAD_KEYS, "workload")
    if "steering" in cfg:
        _check_table(cfg["steering"], _STEERING_KEYS, "steering")
    if "sweep" in cfg:
        _check_table(cfg["sweep"], _SWEEP_KEYS, "sweep")
        axis = cfg["sweep"].get("axis")
        if axis not in SWEEP_AXES:
            raise ConfigError(f"sweep.axis: must be one of {SWEEP_AXES}")
        if not cfg["sweep"].get("values"):
            raise ConfigError("sweep.values: empty axis list")
    for i, app in enumerate(cfg.get("apps", [])):
        where = f"apps[{i}]"
        _check_table(app, _APP_KEYS, where)
        if "workload" in app:
            _check_table(app["workload"], _WORKLOAD_KEYS, f"{where}.workload")
        if "steering" in app:
            _check_table(app["steering"], _STEERING_KEYS, f"{where}.steering")
    seeds = cfg.get("seeds", [1])
    if not seeds or not all(isinstance(s, int) for s in seeds):
        raise ConfigError("config.seeds: need a non-empty list of integers")
    loads = cfg.get("loads", [])
    if not cfg.get("apps") and not loads:
        raise ConfigError("config.loads: need at least one load point")
    dur = cfg.get("duration_ms", 50.0)
    if dur <= 0:
        raise ConfigError("config.duration_ms: must be positive")
    wf = cfg.get("warmup_frac", 0.1)
    if not 0 <= wf < 1:
        raise ConfigError("config.warmup_frac: must be in [0, 1)")
    if policy == "centralized":
        io = cfg.get("scheduler", {}).get("io_cores", 1)
        if io < 1:
            raise ConfigError("scheduler.io_cores: centralized policy needs >= 1")
        if not cfg.get("apps") and cfg.get("cores", 1) - io < 1:
            raise ConfigError("config.cores: no application cores left after io_cores")


def apply_override(cfg, dotted, value):
    """Set a dot-path key from a CLI `--override a.b=c` flag."""
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        if k not in node or not isinstance(node[k], dict):
            node[k] = {}
        node = node[k]
    try:
        node[keys[-1]] = json.loads(value)
    except json.JSONDecodeError:
        node[keys[-1]] = value


def parse_override_arg(arg):
    if "=" not in arg:
        raise ConfigError(f"--override needs key=value, got {arg!r}")
    return arg.split("=", 1)


# --- building runs -----------------------------------------------------------


def _service_from(table):
    kind = table.get("service", "constant")
    return ServiceDist(
        kind,
        mean_ns=int(round(table.get("mean_us", 0.0) * US)),
        p_long=table.get("p_long", 0.0),
        short_ns=int(round(table.get("short_us", 0.0) * US)),
        long_ns=int(round(table.get("long_us", 0.0) * US)),
    )


def _steering_from(table):
    return Steering(
        scheme=table.get("scheme", "rss_uniform"),
        weights=table.get("weights") or None,
    )


def scheduler_params(cfg):
    s = cfg.get("scheduler", {})
    return SchedulerParams(
        batch_pull_n=s.get("n", 1),
        quanta_ns=int(round(s.get("t_us", 10.0) * US)),
        preempt_interval_ns=int(round(s.get("preempt_us", 10.0) * US)),
        io_batch=s.get("io_batch", 32),
        io_cores=s.get("io_cores", 1),
        pull_charge_cycles=s.get("pull_charge_cycles", 0),
        preempt_to_local=s.get("preempt_to_local", False),
    )


def cost_model(cfg):
    c = dict(cfg.get("cost", {}))
    if "cpu_freq_hz" in c:
        c["cpu_freq_hz"] = int(c["cpu_freq_hz"])
    return CostModel(**c)


def build_apps(cfg, load):
    """AppSpec list for one run; `load` replaces the offered load of every
    app with sweep_load=True (all single-app configs sweep)."""
    policy = cfg.get("policy", "cygnus")
    if cfg.get("apps"):
        specs = []
        for app in cfg["apps"]:
            specs.append(
                AppSpec(
                    name=app.get("name", f"app{len(specs)}"),
                    cores=app["cores"],
                    load_ops=load if app.get("sweep_load", True) else app["load_ops"],
                    service=_service_from(app.get("workload", {})),
                    steering=_steering_from(app.get("steering", {})),
                    msg_bytes=app.get("msg_bytes", 64),
                    sweep_load=app.get("sweep_load", True),
                )
            )
            specs[-1].seed_offset = app.get("seed_offset", 0)
        return specs
    cores = cfg.get("cores", 1)
    if policy == "centralized":
        cores -= cfg.get("scheduler", {}).get("io_cores", 1)
    spec = AppSpec(
        name=cfg.get("experiment", "app") or "app",
        cores=cores,
        load_ops=load,
        service=_service_from(cfg.get("workload", {})),
        steering=_steering_from(cfg.get("steering", {})),
    )
    spec.seed_offset = 0
    return [spec]


def build_simulation(cfg, seed, load, record_trace=False):
    duration_ns = int(round(cfg.get("duration_ms", 50.0) * MS))
    warmup_ns = int(round(duration_ns * cfg.get("warmup_frac", 0.1)))
    return Simulation(
        policy=cfg.get("policy", "cygnus"),
        apps=build_apps(cfg, load),
        duration_ns=duration_ns,
        cost=cost_model(cfg),
        params=scheduler_params(cfg),
        seed=seed,
        warmup_ns=warmup_ns,
        rx_capacity=cfg.get("rx_capacity", 0),
        rtt_ns=cfg.get("rtt_ns", 0),
        record_trace=record_trace,
    )


def sweep_configs(cfg):
    """Yield (axis_value, cfg) per sweep point; identity for plain runs."""
    sweep = cfg.get("sweep")
    if not sweep:
        yield None, cfg
        return
    axis, values = sweep["axis"], sweep["values"]
    for v in values:
        point = copy.deepcopy(cfg)
        point.pop("sweep", None)
        if axis == "load":
            point["loads"] = [v]
        elif axis == "cores":
            point["cores"] = v
        elif axis == "io_cores":
            point.setdefault("scheduler", {})["io_cores"] = v
        elif axis == "n":
            point.setdefault("scheduler", {})["n"] = v
        elif axis == "t":
            point.setdefault("scheduler", {})["t_us"] = v
        yield v, point
