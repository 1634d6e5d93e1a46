"""Minimal linear complexity of sampled targets and region-adaptive sparsity.

``min_linear_complexity`` works on the sample grid: it returns the fewest
pieces of a continuous piecewise-linear ``g`` with knots at grid points such
that ``|g(x_k) - y_k| <= eps0`` at every sample.  Because both ``g`` and the
sample interpolant are linear between grid points, this is also the fewest
pieces (knots on the grid) within sup-distance ``eps0`` of the interpolant.
Allowing knots between grid points can only lower the count.

The search is a breadth-first sweep over piece counts.  A state is a grid
index together with the interval of values ``g`` may take there; one piece
started from a state reaches later indices with new value intervals, found
by clipping the convex set of feasible ``(value, slope)`` pairs one sample
at a time.  Extending only the farthest reachable index is not enough when
continuity is required, so every reachable index is kept.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numba
import numpy as np

from .errors import (
    DomainError,
    InsufficientSamples,
    InvalidComplexity,
    InvalidTolerance,
    InvalidValue,
)
from .pwl import PwlFunction, sup_norm_diff

__all__ = [
    "TargetFunction",
    "SparsityReport",
    "BUILTIN_TARGETS",
    "builtin_target",
    "min_linear_complexity",
    "discontinuous_lower_bound",
    "region_inefficiency",
    "theorem_expected_regions",
    "check_region_adaptive_sparsity",
]

BUILTIN_TARGETS = {
    "abs": np.abs,
    "quadratic": np.square,
    "sine": lambda x: np.sin(np.pi * x),
}


@dataclass(frozen=True, eq=False)
class TargetFunction:
    """Samples of a continuous target on the compact interval ``domain``."""

    domain: tuple[float, float]
    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float).reshape(-1)
        ys = np.asarray(self.ys, dtype=float).reshape(-1)
        if xs.size != ys.size:
            raise InvalidValue("xs and ys differ in length")
        if xs.size < 2:
            raise InsufficientSamples(f"need at least 2 samples, got {xs.size}")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise InvalidValue("samples must be finite")
        if np.any(np.diff(xs) <= 0):
            raise InvalidValue("sample grid must be strictly increasing")
        a, b = (float(v) for v in self.domain)
        if (a, b) != (xs[0], xs[-1]):
            raise DomainError(f"grid [{xs[0]}, {xs[-1]}] does not span domain [{a}, {b}]")
        object.__setattr__(self, "domain", (a, b))
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @classmethod
    def from_samples(cls, xs, ys) -> "TargetFunction":
        xs = np.asarray(xs, dtype=float)
        if xs.size < 2:
            raise InsufficientSamples(f"need at least 2 samples, got {xs.size}")
        return cls((xs[0], xs[-1]), xs, ys)

    @classmethod
    def from_csv(cls, path) -> "TargetFunction":
        """Read a two-column ``x,y`` CSV with a header row."""
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows or not {"x", "y"} <= set(rows[0]):
            raise InvalidValue(f"{path}: expected columns x,y")
        try:
            xs = [float(r["x"]) for r in rows]
            ys = [float(r["y"]) for r in rows]
        except (TypeError, ValueError) as exc:
            raise InvalidValue(f"{path}: {exc}") from None
        return cls.from_samples(xs, ys)

    @property
    def size(self) -> int:
        return int(self.xs.size)

    def interpolant(self) -> PwlFunction:
        return PwlFunction.from_points(self.xs, self.ys)


def builtin_target(name: str, a: float = -1.0, b: float = 1.0, points: int = 1001) -> TargetFunction:
    """Sample one of :data:`BUILTIN_TARGETS` on a uniform grid."""
    try:
        fn = BUILTIN_TARGETS[name]
    except KeyError:
        raise InvalidValue(f"unknown target {name!r}; choose from {sorted(BUILTIN_TARGETS)}") from None
    if points < 2:
        raise InsufficientSamples(f"need at least 2 samples, got {points}")
    if not a < b:
        raise DomainError(f"empty domain [{a}, {b}]")
    xs = np.linspace(a, b, points)
    return TargetFunction((a, b), xs, fn(xs))


# -- reachability kernel -------------------------------------------------------


@numba.njit(cache=True)
def _clip(pv, ps, n, a, b, c, tol, qv, qs):
    # keep a*v + b*s <= c; returns the new vertex count written to (qv, qs)
    m = 0
    for k in range(n):
        k2 = k + 1 if k + 1 < n else 0
        fp = a * pv[k] + b * ps[k] - c
        fq = a * pv[k2] + b * ps[k2] - c
        if fp <= tol:
            qv[m] = pv[k]
            qs[m] = ps[k]
            m += 1
        if (fp < -tol and fq > tol) or (fp > tol and fq < -tol):
            t = fp / (fp - fq)
            qv[m] = pv[k] + t * (pv[k2] - pv[k])
            qs[m] = ps[k] + t * (ps[k2] - ps[k])
            m += 1
    return m


@numba.njit(cache=True)
def _extend(x, y, eps, i, lo, hi, tol, out_lo, out_hi):
    """Value intervals reachable by one affine piece started at index ``i``.

    ``out_lo[j]``/``out_hi[j]`` are filled for ``i < j <= last``; returns
    ``last`` (``i`` when even ``i + 1`` is out of reach).
    """
    n_pts = x.size
    if i + 1 >= n_pts:
        return i
    cap = 2 * (n_pts - i) + 8
    pv = np.empty(cap)
    ps = np.empty(cap)
    qv = np.empty(cap)
    qs = np.empty(cap)
    j = i + 1
    d = x[j] - x[i]
    pv[0] = lo
    ps[0] = (y[j] - eps - lo) / d
    pv[1] = hi
    ps[1] = (y[j] - eps - hi) / d
    pv[2] = hi
    ps[2] = (y[j] + eps - hi) / d
    pv[3] = lo
    ps[3] = (y[j] + eps - lo) / d
    n = 4
    last = i
    while True:
        d = x[j] - x[i]
        vmin = np.inf
        vmax = -np.inf
        for k in range(n):
            val = pv[k] + ps[k] * d
            if val < vmin:
                vmin = val
            if val > vmax:
                vmax = val
        out_lo[j] = max(vmin, y[j] - eps)
        out_hi[j] = min(vmax, y[j] + eps)
        last = j
        j += 1
        if j >= n_pts:
            break
        d = x[j] - x[i]
        n = _clip(pv, ps, n, 1.0, d, y[j] + eps, tol, qv, qs)
        if n == 0:
            break
        n = _clip(qv, qs, n, -1.0, -d, -(y[j] - eps), tol, pv, ps)
        if n == 0:
            break
    return last


def _merge(intervals, tol):
    intervals = sorted(intervals)
    out = []
    for a, b in intervals:
        if out and a <= out[-1][1] + tol:
            if b > out[-1][1]:
                out[-1][1] = b
        else:
            out.append([a, b])
    return [(a, b) for a, b in out]


def _subtract(intervals, covered, tol):
    """Parts of ``intervals`` not inside the union ``covered`` (both merged)."""
    out = []
    for a, b in intervals:
        cur = a
        for ca, cb in covered:
            if cb < cur - tol or ca > b + tol:
                continue
            if ca > cur + tol:
                out.append((cur, ca))
            cur = max(cur, cb)
            if cur >= b - tol:
                break
        if cur < b - tol:
            out.append((cur, b))
    return out


def _check_eps(eps0: float) -> float:
    eps0 = float(eps0)
    if not (math.isfinite(eps0) and eps0 > 0):
        raise InvalidTolerance(f"eps0 must be positive, got {eps0}")
    return eps0


def min_linear_complexity(target: TargetFunction, eps0: float) -> int:
    """Fewest linear regions of a continuous PWL function within ``eps0`` on the grid."""
    eps0 = _check_eps(eps0)
    x, y = target.xs, target.ys
    n_pts = x.size
    if n_pts < 2:
        raise InsufficientSamples("need at least 2 samples")
    tol = 1e-12 * (float(np.max(np.abs(y))) + eps0)
    out_lo = np.empty(n_pts)
    out_hi = np.empty(n_pts)

    frontier = {0: [(y[0] - eps0, y[0] + eps0)]}
    explored: dict[int, list] = {}
    pieces = 0
    while frontier:
        pieces += 1
        reached: dict[int, list] = {}
        for i in sorted(frontier):
            fresh = _subtract(frontier[i], explored.get(i, []), tol)
            explored[i] = _merge(explored.get(i, []) + frontier[i], tol)
            for lo, hi in fresh:
                last = _extend(x, y, eps0, i, lo, hi, tol, out_lo, out_hi)
                if last == n_pts - 1:
                    return pieces
                for j in range(i + 1, last + 1):
                    reached.setdefault(j, []).append((out_lo[j], out_hi[j]))
        frontier = {j: _merge(v, tol) for j, v in reached.items()}
    raise AssertionError("unreachable: a piece per grid segment always fits")


def discontinuous_lower_bound(target: TargetFunction, eps0: float) -> int:
    """Fewest pieces when the approximant may jump between samples.

    Greedy farthest extension is optimal here; the value never exceeds
    :func:`min_linear_complexity`.
    """
    eps0 = _check_eps(eps0)
    x, y = target.xs, target.ys
    tol = 1e-12 * (float(np.max(np.abs(y))) + eps0)
    out_lo = np.empty(x.size)
    out_hi = np.empty(x.size)
    i, pieces = 0, 0
    while i < x.size:
        pieces += 1
        i = _extend(x, y, eps0, i, y[i] - eps0, y[i] + eps0, tol, out_lo, out_hi) + 1
    return pieces


# -- sparsity report -------------------------------------------------------------


def region_inefficiency(expected_regions: float, l_min: int) -> float:
    """``E[L(phi)] / L_min``."""
    if l_min <= 0:
        raise InvalidComplexity(f"l_min must be positive, got {l_min}")
    if not expected_regions > 0:
        raise InvalidValue(f"expected_regions must be positive, got {expected_regions}")
    return expected_regions / l_min


def theorem_expected_regions(topology) -> int:
    """Infinite-width estimate ``sum(n_l) + 1`` of the expected number of regions."""
    return topology.total_hidden + 1


@dataclass(frozen=True)
class SparsityReport:
    eps0: float
    alpha: float
    c: float
    l_min: int
    expected_regions: float
    expected_regions_source: str
    eta_region: float
    sup_error: float
    approximating: bool
    region_efficient: bool
    phi_regions_on_domain: int

    @property
    def sparse(self) -> bool:
        return self.approximating and self.region_efficient

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sparse"] = self.sparse
        return d


def check_region_adaptive_sparsity(
    phi: PwlFunction,
    target: TargetFunction,
    eps0: float,
    alpha: float,
    c: float,
    expected_regions: float,
    *,
    source: str = "theorem",
    phi_domain: tuple[float, float] | None = None,
    l_min: int | None = None,
) -> SparsityReport:
    """Evaluate both region-adaptive sparsity conditions for ``phi`` against ``target``.

    ``source`` records where ``expected_regions`` came from (``"theorem"`` or
    ``"monte_carlo"``).  ``phi_domain`` optionally restricts where ``phi`` is
    defined; it must contain the target's domain.  A precomputed ``l_min``
    may be passed to skip the search.
    """
    eps0 = _check_eps(eps0)
    if not (math.isfinite(alpha) and alpha >= 1):
        raise InvalidValue(f"alpha must be >= 1, got {alpha}")
    if not (math.isfinite(c) and c >= 0):
        raise InvalidValue(f"c must be >= 0, got {c}")
    a, b = target.domain
    if phi_domain is not None and not (phi_domain[0] <= a and b <= phi_domain[1]):
        raise DomainError(f"phi is defined on {phi_domain}, target needs [{a}, {b}]")
    if l_min is None:
        l_min = min_linear_complexity(target, eps0)
    eta = region_inefficiency(expected_regions, l_min)
    sup_err = sup_norm_diff(phi, target.interpolant(), (a, b))
    inside = int(np.count_nonzero((phi.knots > a) & (phi.knots < b)))
    return SparsityReport(
        eps0=eps0,
        alpha=float(alpha),
        c=float(c),
        l_min=int(l_min),
        expected_regions=float(expected_regions),
        expected_regions_source=source,
        eta_region=eta,
        sup_error=sup_err,
        approximating=sup_err <= alpha * eps0,
        region_efficient=eta <= c,
        phi_regions_on_domain=inside + 1,
    )


def write_report(report: SparsityReport, path) -> Path:
    import json

    path = Path(path)
    path.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return path
