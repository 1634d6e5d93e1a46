"""Seeded Monte Carlo experiments on random 1-D ReLU networks.

Three experiment modes are supported:

``regions``
    breakpoints of the network output per sampled network, compared with
    the total hidden width.
``crossings``
    zero crossings of pre-activations in one layer on a finite interval,
    compared with the arctan law from :mod:`relu1d.gp_theory`.
``survival``
    fraction of breakpoints created by the ReLUs of one hidden layer that are
    still visible in the network output, compared with
    ``prod(1 - 2**-n)`` over the downstream hidden layers.

Trial ``t`` samples its network from a seed derived from ``(base_seed, t)``
alone, so results do not depend on how trials are split across workers or
runs, and :func:`merge` of disjoint runs reproduces a single run exactly.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ConfigMismatch,
    FirstLayerAffine,
    InvalidConfig,
    InvalidInterval,
    NothingToPropagate,
)
from .gp_theory import expected_crossings
from .network import (
    Topology,
    _layer_pre,
    count_regions,
    draw_row,
    hidden_activations,
    init_network,
)
from .pwl import count_sign_changes, linear_combine, relu_pwl, sign_crossings

__all__ = [
    "MODES",
    "ACCEPTANCE_BANDS",
    "ExperimentConfig",
    "ExperimentResult",
    "trial_seed",
    "run",
    "run_regions",
    "run_crossings",
    "run_survival",
    "merge",
    "write_result",
]

MODES = ("regions", "crossings", "survival")

# Finite-width bands for mean(breakpoints) / sum(n_l).  Frozen from the
# provenance run in scripts/provenance_regions.py (2000 trials, base_seed 0).
ACCEPTANCE_BANDS = {
    "regions_128x128": (0.90, 1.02),
}


@dataclass(frozen=True)
class ExperimentConfig:
    topology: Topology
    sigma_b: float
    trials: int
    base_seed: int
    mode: str
    interval: tuple[float, float] | None = None
    target_layer: int | None = None
    neurons_per_network: int = 1
    first_trial: int = 0

    def __post_init__(self):
        if not isinstance(self.topology, Topology):
            object.__setattr__(self, "topology", Topology(tuple(self.topology)))
        if self.mode not in MODES:
            raise InvalidConfig(f"mode must be one of {MODES}, got {self.mode!r}")
        if not (isinstance(self.trials, (int, np.integer)) and self.trials >= 1):
            raise InvalidConfig(f"trials must be a positive integer, got {self.trials!r}")
        if not (math.isfinite(self.sigma_b) and self.sigma_b > 0):
            raise InvalidConfig(f"sigma_b must be positive, got {self.sigma_b!r}")
        if not 0 <= int(self.base_seed) < 2**64:
            raise InvalidConfig("base_seed must be a 64-bit unsigned integer")
        if self.first_trial < 0:
            raise InvalidConfig("first_trial must be >= 0")
        if self.neurons_per_network < 1:
            raise InvalidConfig("neurons_per_network must be >= 1")
        if self.interval is not None:
            a, b = (float(v) for v in self.interval)
            object.__setattr__(self, "interval", (a, b))
        if self.mode == "crossings" and self.interval is None:
            raise InvalidConfig("crossings mode needs an interval")

    @property
    def trial_ids(self) -> range:
        return range(self.first_trial, self.first_trial + self.trials)

    def to_dict(self) -> dict:
        return {
            "topology": list(self.topology.hidden_widths),
            "sigma_b": self.sigma_b,
            "trials": self.trials,
            "base_seed": int(self.base_seed),
            "mode": self.mode,
            "interval": None if self.interval is None else list(self.interval),
            "target_layer": self.target_layer,
            "neurons_per_network": self.neurons_per_network,
            "first_trial": self.first_trial,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfig(f"unknown config fields: {sorted(unknown)}")
        missing = {"topology", "sigma_b", "trials", "base_seed", "mode"} - set(data)
        if missing:
            raise InvalidConfig(f"missing config fields: {sorted(missing)}")
        kw = dict(data)
        try:
            kw["topology"] = Topology(tuple(int(n) for n in data["topology"]))
            kw["sigma_b"] = float(data["sigma_b"])
            kw["base_seed"] = int(data["base_seed"])
            if kw.get("interval") is not None:
                kw["interval"] = tuple(float(v) for v in data["interval"])
        except (TypeError, ValueError) as exc:
            raise InvalidConfig(str(exc)) from None
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InvalidConfig(f"{path}: {exc}") from None
        if not isinstance(data, dict):
            raise InvalidConfig(f"{path}: expected a JSON object")
        return cls.from_dict(data)

    def _pool_key(self):
        d = self.to_dict()
        del d["trials"], d["first_trial"]
        return d


def trial_seed(base_seed: int, trial: int) -> int:
    """64-bit network seed for trial ``trial``."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(int(trial),))
    return int(ss.generate_state(1, np.uint64)[0])


# -- per-trial kernels (module level so worker processes can pickle them) -------


def _regions_trial(cfg: ExperimentConfig, t: int):
    params = init_network(cfg.topology, cfg.sigma_b, trial_seed(cfg.base_seed, t))
    return float(count_regions(params) - 1), 1


def _crossings_trial(cfg: ExperimentConfig, t: int):
    seed = trial_seed(cfg.base_seed, t)
    params = init_network(cfg.topology, cfg.sigma_b, seed)
    ell = cfg.target_layer
    posts = hidden_activations(params, ell - 1)
    w, b = params.weights[ell - 1], params.biases[ell - 1]
    fan_in = w.shape[1]
    counts = []
    for j in range(cfg.neurons_per_network):
        if j < w.shape[0]:
            row, bias = w[j], b[j]
        else:
            # same stream init_network would use for a wider layer
            row, bias = draw_row(seed, ell, j, fan_in, cfg.sigma_b)
        s = linear_combine(row, posts, bias)
        counts.append(count_sign_changes(s, cfg.interval))
    return float(np.mean(counts)), len(counts)


def _survival_trial(cfg: ExperimentConfig, t: int):
    params = init_network(cfg.topology, cfg.sigma_b, trial_seed(cfg.base_seed, t))
    ell = cfg.target_layer or 1
    posts = hidden_activations(params, 0)
    created = None
    for layer in range(1, params.depth + 1):
        pres = _layer_pre(params, layer, posts)
        if layer == ell:
            created = np.concatenate([sign_crossings(s) for s in pres])
        posts = [relu_pwl(s) for s in pres]
    out = linear_combine(params.weights[-1][0], posts, params.biases[-1][0])
    if created.size == 0:
        return math.nan, 0
    kept = np.count_nonzero(np.isin(created, out.knots))
    return kept / created.size, int(created.size)


_KERNELS = {
    "regions": _regions_trial,
    "crossings": _crossings_trial,
    "survival": _survival_trial,
}


def _one(args):
    cfg, t = args
    return _KERNELS[cfg.mode](cfg, t)


# -- results ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    """Pooled estimate over trials plus the matching theoretical value.

    ``per_trial_counts`` holds how many units (neurons, breakpoints) each
    trial value averages over; trials whose value is NaN (nothing to
    measure) are kept but excluded from the statistics.
    """

    config: ExperimentConfig
    theory_value: float
    trial_ids: np.ndarray = field(repr=False)
    per_trial_values: np.ndarray = field(repr=False)
    per_trial_counts: np.ndarray = field(repr=False)
    estimate_mean: float = field(init=False)
    estimate_stderr: float = field(init=False)
    trials_completed: int = field(init=False)
    z_score: float = field(init=False)

    def __post_init__(self):
        order = np.argsort(self.trial_ids, kind="stable")
        ids = np.asarray(self.trial_ids, dtype=np.int64)[order]
        vals = np.asarray(self.per_trial_values, dtype=float)[order]
        cnts = np.asarray(self.per_trial_counts, dtype=np.int64)[order]
        for name, arr in (("trial_ids", ids), ("per_trial_values", vals), ("per_trial_counts", cnts)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        ok = vals[np.isfinite(vals)]
        n = ok.size
        mean = float(np.mean(ok)) if n else math.nan
        se = float(np.std(ok, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        if se > 0:
            z = (mean - self.theory_value) / se
        elif mean == self.theory_value:
            z = 0.0
        else:
            z = math.copysign(math.inf, mean - self.theory_value)
        object.__setattr__(self, "estimate_mean", mean)
        object.__setattr__(self, "estimate_stderr", se)
        object.__setattr__(self, "trials_completed", int(ids.size))
        object.__setattr__(self, "z_score", z)

    @property
    def units(self) -> int:
        return int(self.per_trial_counts.sum())

    @property
    def ratio(self) -> float:
        return self.estimate_mean / self.theory_value

    def within(self, n_se: float, rel_allowance: float = 0.0) -> bool:
        """``|mean - theory| <= n_se * stderr + rel_allowance * |theory|``."""
        tol = n_se * self.estimate_stderr + rel_allowance * abs(self.theory_value)
        return abs(self.estimate_mean - self.theory_value) <= tol

    def to_dict(self, per_trial: bool = True) -> dict:
        z = self.z_score if math.isfinite(self.z_score) else None
        d = {
            "config": self.config.to_dict(),
            "estimate_mean": self.estimate_mean,
            "estimate_stderr": self.estimate_stderr,
            "trials_completed": self.trials_completed,
            "units": self.units,
            "theory_value": self.theory_value,
            "ratio": self.ratio,
            "z_score": z,
        }
        if per_trial:
            d["per_trial_values"] = [None if math.isnan(v) else v for v in self.per_trial_values.tolist()]
        return d


def _theory(cfg: ExperimentConfig) -> float:
    topo = cfg.topology
    if cfg.mode == "regions":
        return float(topo.total_hidden)
    if cfg.mode == "crossings":
        a, b = cfg.interval
        return expected_crossings(cfg.target_layer, a, b, cfg.sigma_b)
    ell = cfg.target_layer or 1
    return float(np.prod([1.0 - 2.0 ** -n for n in topo.hidden_widths[ell:]]))


def _validate(cfg: ExperimentConfig, mode: str) -> ExperimentConfig:
    if cfg.mode != mode:
        raise InvalidConfig(f"config mode is {cfg.mode!r}, expected {mode!r}")
    depth = cfg.topology.depth
    if mode == "crossings":
        a, b = cfg.interval
        if not (math.isfinite(a) and math.isfinite(b)):
            raise InvalidInterval("crossing experiments need a finite interval")
        if a >= b:
            raise InvalidInterval(f"empty interval [{a}, {b}]")
        ell = cfg.target_layer
        if ell is None:
            raise InvalidConfig("crossings mode needs target_layer")
        if ell == 1:
            raise FirstLayerAffine("layer-1 pre-activations are affine")
        if not 2 <= ell <= depth + 1:
            raise InvalidConfig(f"target_layer must be in [2, {depth + 1}], got {ell}")
    elif mode == "survival":
        if depth < 2:
            raise NothingToPropagate("survival needs at least two hidden layers")
        ell = cfg.target_layer or 1
        if not 1 <= ell <= depth - 1:
            raise InvalidConfig(f"target_layer must be in [1, {depth - 1}], got {ell}")
    return cfg


def _execute(cfg: ExperimentConfig, workers: int) -> ExperimentResult:
    ids = list(cfg.trial_ids)
    jobs = [(cfg, t) for t in ids]
    if workers > 1 and len(ids) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_one, jobs, chunksize=max(1, len(ids) // (4 * workers))))
    else:
        out = [_one(j) for j in jobs]
    return ExperimentResult(
        cfg,
        _theory(cfg),
        np.array(ids),
        np.array([v for v, _ in out]),
        np.array([c for _, c in out]),
    )


def run_regions(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    return _execute(_validate(cfg, "regions"), workers)


def run_crossings(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    return _execute(_validate(cfg, "crossings"), workers)


def run_survival(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    return _execute(_validate(cfg, "survival"), workers)


def run(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Dispatch on ``cfg.mode``."""
    return {"regions": run_regions, "crossings": run_crossings, "survival": run_survival}[cfg.mode](
        cfg, workers
    )


def merge(results: Sequence[ExperimentResult]) -> ExperimentResult:
    """Pool runs that differ only in their trial ranges."""
    results = list(results)
    if not results:
        raise ConfigMismatch("nothing to merge")
    key = results[0].config._pool_key()
    for r in results[1:]:
        if r.config._pool_key() != key:
            raise ConfigMismatch("results come from different experiments")
    ids = np.concatenate([r.trial_ids for r in results])
    if np.unique(ids).size != ids.size:
        raise ConfigMismatch("trial index sets overlap")
    first = int(ids.min())
    cfg = replace(results[0].config, first_trial=first, trials=int(ids.size))
    return ExperimentResult(
        cfg,
        results[0].theory_value,
        ids,
        np.concatenate([r.per_trial_values for r in results]),
        np.concatenate([r.per_trial_counts for r in results]),
    )


def write_result(result: ExperimentResult, out_dir, per_trial_csv: bool = True) -> list[Path]:
    """Write ``result.json`` and optionally ``per_trial.csv`` into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / "result.json"]
    paths[0].write_text(json.dumps(result.to_dict(), indent=2) + "\n")
    if per_trial_csv:
        p = out_dir / "per_trial.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["trial", "value"])
            for t, v in zip(result.trial_ids.tolist(), result.per_trial_values.tolist()):
                w.writerow([t, "%.17g" % v])
        paths.append(p)
    return paths
