"""Command-line interface: ``relu1d simulate | theory | sparsity``.

Exit codes: 0 success, 2 invalid input, 3 I/O failure, 4 internal invariant
violation.  Every command also writes a JSON run manifest.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .errors import InvariantError, Relu1dError

log = logging.getLogger("relu1d")

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_INTERNAL = 0, 2, 3, 4


class UsageError(Exception):
    pass


def canonical_json(data) -> bytes:
    return json.dumps(data, sort_keys=True, separators=(",", ":")).encode()


def config_hash(data) -> str:
    return hashlib.sha256(canonical_json(data)).hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


@dataclass
class RunManifest:
    command: str
    config: dict
    base_seed: int
    version: str = __version__
    started_at: str = field(default_factory=_now)
    finished_at: str | None = None
    wall_time_s: float | None = None
    outputs: list[str] = field(default_factory=list)

    @property
    def config_hash(self) -> str:
        return config_hash(self.config)

    def finish(self, outputs, t0: float) -> None:
        self.outputs = [str(p) for p in outputs]
        self.finished_at = _now()
        self.wall_time_s = round(time.perf_counter() - t0, 6)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config_hash": self.config_hash,
            "config": self.config,
            "base_seed": self.base_seed,
            "version": self.version,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "wall_time_s": self.wall_time_s,
            "outputs": self.outputs,
        }

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        return path


# -- argument helpers ----------------------------------------------------------------


def parse_layers(spec: str) -> list[int]:
    """``"3"`` or inclusive ``"1:4"``."""
    try:
        if ":" in spec:
            lo, hi = (int(s) for s in spec.split(":"))
        else:
            lo = hi = int(spec)
    except ValueError:
        raise UsageError(f"bad layer range {spec!r}") from None
    if lo < 1 or hi < lo:
        raise UsageError(f"empty or invalid layer range {spec!r}")
    return list(range(lo, hi + 1))


def parse_grid(spec: str) -> list[float]:
    """``"start:stop:num"`` (inclusive linspace) or a comma-separated list."""
    import numpy as np

    try:
        if ":" in spec:
            a, b, n = spec.split(":")
            a, b, n = float(a), float(b), int(n)
            if n < 1 or (n > 1 and not a < b):
                raise ValueError
            xs = np.linspace(a, b, n).tolist()
        else:
            xs = [float(s) for s in spec.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"bad x grid {spec!r}") from None
    if not xs or not all(math.isfinite(x) for x in xs):
        raise UsageError(f"bad x grid {spec!r}")
    return xs


def parse_topology(spec: str):
    from .network import Topology

    try:
        return Topology(tuple(int(s) for s in spec.replace(" ", "").split(",") if s))
    except ValueError as exc:
        raise UsageError(f"bad topology {spec!r}: {exc}") from None


# -- commands --------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    from .montecarlo import ExperimentConfig, run, write_result

    t0 = time.perf_counter()
    path = Path(args.config)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    cfg = ExperimentConfig.load(path)
    if args.seed is not None:
        cfg = replace(cfg, base_seed=args.seed)
    out_dir = Path(args.out or "out")
    manifest = RunManifest("simulate", cfg.to_dict(), int(cfg.base_seed))
    result = run(cfg, workers=args.threads)
    try:
        outputs = write_result(result, out_dir, per_trial_csv=args.per_trial_csv)
        if args.plot:
            from .plotting import plot_result

            outputs.append(plot_result(result, out_dir / "per_trial.png"))
    except OSError as exc:
        raise IOError(exc) from exc
    manifest.finish(outputs, t0)
    manifest.write(out_dir / "manifest.json")
    log.info(
        "%s: mean %.6g +- %.3g, theory %.6g", cfg.mode, result.estimate_mean, result.estimate_stderr, result.theory_value
    )
    return EXIT_OK


def cmd_theory(args) -> int:
    from .gp_theory import write_theory_tables

    t0 = time.perf_counter()
    layers = parse_layers(args.layers)
    xs = parse_grid(args.x_grid)
    if not (math.isfinite(args.sigma_b) and args.sigma_b > 0):
        raise UsageError("--sigma-b must be positive")
    intervals = [(-math.inf, math.inf)]
    for a, b in args.interval or []:
        if not a < b:
            raise UsageError(f"empty interval [{a}, {b}]")
        intervals.append((a, b))
    out = Path(args.out or "theory.csv")
    conf = {
        "layers": layers,
        "x_grid": xs,
        "sigma_b": args.sigma_b,
        "intervals": [[repr(a), repr(b)] for a, b in intervals],
    }
    manifest = RunManifest("theory", conf, 0)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        outputs = list(write_theory_tables(out, layers, xs, intervals, args.sigma_b))
        if args.plot:
            from .plotting import plot_density

            outputs.append(plot_density(layers, xs, args.sigma_b, out.with_suffix(".png")))
    except OSError as exc:
        raise IOError(exc) from exc
    manifest.finish(outputs, t0)
    manifest.write(out.with_name(out.stem + ".manifest.json"))
    return EXIT_OK


def cmd_sparsity(args) -> int:
    from .montecarlo import ExperimentConfig, run_regions
    from .network import forward_pwl, init_network
    from .pwl import PwlFunction
    from .sparsity import (
        TargetFunction,
        builtin_target,
        check_region_adaptive_sparsity,
        theorem_expected_regions,
    )

    t0 = time.perf_counter()
    if args.alpha < 1:
        raise UsageError("--alpha must be >= 1")
    if args.c < 0:
        raise UsageError("--c must be >= 0")
    if args.target_csv:
        target = TargetFunction.from_csv(args.target_csv)
        target_desc = {"csv": str(args.target_csv)}
    else:
        a, b = args.domain
        target = builtin_target(args.target, a, b, args.points)
        target_desc = {"builtin": args.target, "domain": [a, b], "points": args.points}

    topo = parse_topology(args.topology)
    seed = 0 if args.seed is None else args.seed
    if args.phi_json:
        phi = PwlFunction.from_dict(json.loads(Path(args.phi_json).read_text()))
        phi_desc = {"json": str(args.phi_json)}
    else:
        phi = forward_pwl(init_network(topo, args.sigma_b, seed))
        phi_desc = {"topology": list(topo.hidden_widths), "sigma_b": args.sigma_b, "seed": seed}

    if args.mc_trials:
        cfg = ExperimentConfig(topo, args.sigma_b, args.mc_trials, seed, "regions")
        expected = run_regions(cfg, workers=args.threads).estimate_mean + 1.0
        source = "monte_carlo"
    else:
        expected = float(theorem_expected_regions(topo))
        source = "theorem"

    report = check_region_adaptive_sparsity(
        phi, target, args.eps0, args.alpha, args.c, expected, source=source
    )
    conf = {
        "target": target_desc,
        "phi": phi_desc,
        "eps0": args.eps0,
        "alpha": args.alpha,
        "c": args.c,
        "mc_trials": args.mc_trials,
    }
    out = Path(args.out or "sparsity.json")
    manifest = RunManifest("sparsity", conf, seed)
    payload = {"report": report.to_dict(), "target": target_desc, "phi": phi_desc}
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(payload, indent=2) + "\n")
        outputs = [out]
        if args.plot:
            from .plotting import plot_sparsity

            outputs.append(plot_sparsity(phi, target, report, out.with_suffix(".png")))
    except OSError as exc:
        raise IOError(exc) from exc
    manifest.finish(outputs, t0)
    manifest.write(out.with_name(out.stem + ".manifest.json"))
    return EXIT_OK


# -- parser ------------------------------------------------------------------------------


def _global_flags(parser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=d, help="override the base seed")
    parser.add_argument("--threads", type=int, default=argparse.SUPPRESS if suppress else 1,
                        help="worker processes for Monte Carlo trials (results do not depend on it)")
    parser.add_argument("--out", default=d, help="output file or directory")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="relu1d", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    _global_flags(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a Monte Carlo experiment from a JSON config")
    _global_flags(s, suppress=True)
    s.add_argument("config")
    s.add_argument("--no-per-trial-csv", dest="per_trial_csv", action="store_false")
    s.add_argument("--plot", action="store_true", help="also render per_trial.png")
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("theory", help="tabulate closed-form NNGP quantities")
    _global_flags(t, suppress=True)
    t.add_argument("--layers", default="1:3", help="inclusive range, e.g. 1:3")
    t.add_argument("--x-grid", default="-3:3:61", help="start:stop:num or comma list")
    t.add_argument("--sigma-b", type=float, default=1.0)
    t.add_argument("--interval", nargs=2, type=float, action="append", metavar=("A", "B"),
                   help="extra interval for the crossing table (repeatable)")
    t.add_argument("--plot", action="store_true")
    t.set_defaults(func=cmd_theory)

    q = sub.add_parser("sparsity", help="region-adaptive sparsity report")
    _global_flags(q, suppress=True)
    g = q.add_mutually_exclusive_group()
    g.add_argument("--target", default="abs", choices=["abs", "quadratic", "sine"])
    g.add_argument("--target-csv")
    q.add_argument("--domain", nargs=2, type=float, default=[-1.0, 1.0], metavar=("A", "B"))
    q.add_argument("--points", type=int, default=1001)
    q.add_argument("--eps0", type=float, required=True)
    q.add_argument("--alpha", type=float, default=1.0)
    q.add_argument("--c", type=float, required=True)
    q.add_argument("--topology", required=True, help="hidden widths, e.g. 10 or 32,32")
    q.add_argument("--sigma-b", type=float, default=1.0)
    q.add_argument("--phi-json", help="use this PwlFunction JSON instead of a sampled network")
    q.add_argument("--mc-trials", type=int, default=0,
                   help="estimate E[regions] by Monte Carlo instead of sum(n)+1")
    q.add_argument("--plot", action="store_true")
    q.set_defaults(func=cmd_sparsity)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.threads < 1:
        print("relu1d: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except InvariantError as exc:
        print(f"relu1d: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (UsageError, Relu1dError) as exc:
        print(f"relu1d: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"relu1d: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
