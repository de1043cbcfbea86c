"""Open-loop workload generation: service-time distributions, arrival
steering, and the named experiment presets.

The "uniform" service distribution is zero-anchored: mean m covers
[0, 2m].  The bimodal distribution draws the long mode with probability
p_long.  All sampling goes through seeded streams, one per source, so one
application's arrival trace never depends on another's.
"""

import numpy as np

from dpsim.engine import US, MS

SERVICE_KINDS = ("constant", "uniform", "exponential", "bimodal")
STEERING_SCHEMES = ("rss_uniform", "explicit_weights")


class ServiceDist:
    """Service-time distribution; all parameters in integer ns."""

    __slots__ = ("kind", "mean", "p_long", "short", "long")

    def __init__(self, kind, mean_ns=0, p_long=0.0, short_ns=0, long_ns=0):
        if kind not in SERVICE_KINDS:
            raise ValueError(f"unknown service distribution {kind!r}")
        if kind == "bimodal":
            if not 0.0 <= p_long <= 1.0:
                raise ValueError("p_long must be in [0, 1]")
            if short_ns <= 0 or long_ns <= 0:
                raise ValueError("bimodal modes must be positive")
        elif mean_ns < 0 or (kind != "constant" and mean_ns <= 0):
            raise ValueError(f"{kind} mean must be positive")
        self.kind = kind
        self.mean = int(mean_ns)
        self.p_long = p_long
        self.short = int(short_ns)
        self.long = int(long_ns)

    @property
    def mean_ns(self):
        if self.kind == "bimodal":
            return (1.0 - self.p_long) * self.short + self.p_long * self.long
        return float(self.mean)

    def sample(self, stream):
        k = self.kind
        if k == "constant":
            return self.mean
        if k == "exponential":
            return stream.exponential_ns(self.mean)
        if k == "uniform":
            return stream.uniform_ns(0, 2 * self.mean)
        # bimodal
        return self.long if stream.bernoulli(self.p_long) else self.short


class Steering:
    """Stateless arrival steering over a core set."""

    __slots__ = ("scheme", "weights", "_cum")

    def __init__(self, scheme="rss_uniform", weights=None):
        if scheme not in STEERING_SCHEMES:
            raise ValueError(f"unknown steering scheme {scheme!r}")
        self.scheme = scheme
        self.weights = list(weights) if weights else None
        self._cum = None
        if scheme == "explicit_weights":
            if not self.weights:
                raise ValueError("explicit_weights needs a weight vector")
            w = np.asarray(self.weights, dtype=float)
            if (w < 0).any() or w.sum() <= 0:
                raise ValueError("weights must be non-negative with positive sum")
            self._cum = np.cumsum(w / w.sum())

    def pick(self, stream, n_cores):
        if n_cores < 1:
            raise ValueError("core set must be non-empty")
        if self.scheme == "rss_uniform":
            return stream.uniform_index(n_cores)
        if len(self.weights) != n_cores:
            raise ValueError(
                f"weight vector length {len(self.weights)} != core count {n_cores}"
            )
        return stream.weighted_index(self._cum)


class AppSpec:
    """One application's workload: offered load, service dist, steering."""

    def __init__(
        self,
        name,
        cores,
        load_ops,
        service,
        steering=None,
        msg_bytes=64,
        sweep_load=True,
    ):
        if cores < 1:
            raise ValueError("application needs at least one core")
        if load_ops <= 0:
            raise ValueError("offered load must be positive")
        self.name = name
        self.cores = int(cores)
        self.load_ops = float(load_ops)
        self.service = service
        self.steering = steering or Steering()
        self.msg_bytes = int(msg_bytes)
        self.sweep_load = bool(sweep_load)


def gbps_to_ops(gbps, msg_bytes):
    """Convert a bit-rate throughput target to a request rate."""
    return gbps * 1e9 / (8.0 * msg_bytes)


# --- experiment presets ------------------------------------------------------

PRESET_NAMES = (
    "echo",
    "uniform",
    "bimodal",
    "imbalanced",
    "isolation",
    "core_alloc_const",
    "core_alloc_exp",
    "scalability",
)


def build_experiment(name):
    """Full config dict for a named experiment preset."""
    if name == "echo":
        return {
            "experiment": "echo",
            "policy": "cygnus",
            "cores": 1,
            "seeds": [1],
            "loads": [2.0e5, 4.0e5, 6.0e5, 8.0e5],
            "duration_ms": 50.0,
            "warmup_frac": 0.1,
            "workload": {"service": "constant", "mean_us": 0.0},
            "steering": {"scheme": "rss_uniform"},
        }
    if name == "uniform":
        return {
            "experiment": "uniform",
            "policy": "cygnus",
            "cores": 16,
            "seeds": [1],
            "loads": [5.0e5, 1.0e6, 2.0e6, 3.0e6, 4.0e6],
            "duration_ms": 50.0,
            "warmup_frac": 0.1,
            "workload": {"service": "uniform", "mean_us": 2.5},
            "steering": {"scheme": "rss_uniform"},
        }
    if name == "bimodal":
        return {
            "experiment": "bimodal",
            "policy": "cygnus",
            "cores": 16,
            "seeds": [1],
            "loads": [2.0e5, 5.0e5, 1.0e6, 1.5e6, 2.0e6],
            "duration_ms": 100.0,
            "warmup_frac": 0.1,
            "workload": {
                "service": "bimodal",
                "p_long": 0.005,
                "short_us": 1.0,
                "long_us": 1000.0,
            },
            "steering": {"scheme": "rss_uniform"},
        }
    if name == "imbalanced":
        return {
            "experiment": "imbalanced",
            "policy": "cygnus",
            "cores": 16,
            "seeds": [1],
            "loads": [2.0e5, 5.0e5, 1.0e6, 1.5e6],
            "duration_ms": 100.0,
            "warmup_frac": 0.1,
            "workload": {"service": "exponential", "mean_us": 5.0},
            "steering": {
                "scheme": "explicit_weights",
                "weights": [10.0] * 5 + [1.0] * 11,
            },
        }
    if name == "isolation":
        return {
            "experiment": "isolation",
            "policy": "cygnus",
            "cores": 16,
            "seeds": [1],
            "loads": [5.0e5, 1.0e6, 1.5e6, 2.0e6, 2.5e6, 3.0e6],
            "duration_ms": 50.0,
            "warmup_frac": 0.1,
            "scheduler": {"io_cores": 2},
            "apps": [
                {
                    "name": "lc",
                    "cores": 7,
                    "sweep_load": True,
                    "load_ops": 1.0e6,
                    "workload": {"service": "exponential", "mean_us": 1.0},
                    "steering": {"scheme": "rss_uniform"},
                },
                {
                    "name": "ht",
                    "cores": 7,
                    "sweep_load": False,
                    # 4 Gbps at 16 KB messages
                    "load_ops": gbps_to_ops(4.0, 16384),
                    "msg_bytes": 16384,
                    "workload": {"service": "constant", "mean_us": 5.0},
                    "steering": {"scheme": "rss_uniform"},
                },
            ],
        }
    if name in ("core_alloc_const", "core_alloc_exp"):
        service = (
            {"service": "constant", "mean_us": 2.0}
            if name == "core_alloc_const"
            else {"service": "exponential", "mean_us": 2.0}
        )
        return {
            "experiment": name,
            "policy": "centralized",
            "cores": 8,
            "seeds": [1],
            "loads": [5.0e6],  # overload probe: measured throughput = capacity
            "duration_ms": 50.0,
            "warmup_frac": 0.1,
            "scheduler": {"io_cores": 1},
            "workload": service,
            "steering": {"scheme": "rss_uniform"},
            "sweep": {"axis": "io_cores", "values": [1, 2, 3, 4, 5, 6, 7]},
        }
    if name == "scalability":
        return {
            "experiment": "scalability",
            "policy": "cygnus",
            "cores": 16,
            "seeds": [1],
            "loads": [8.0e6],  # overload probe
            "duration_ms": 50.0,
            "warmup_frac": 0.1,
            "workload": {"service": "uniform", "mean_us": 2.5},
            "steering": {"scheme": "rss_uniform"},
            "sweep": {"axis": "cores", "values": [1, 2, 4, 8, 16]},
        }
    raise ValueError(f"unknown experiment preset {name!r}")
