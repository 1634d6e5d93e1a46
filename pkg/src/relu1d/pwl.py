"""Exact arithmetic on continuous piecewise-linear functions of one variable.

A :class:`PwlFunction` is stored as a strictly increasing knot vector, one
slope per open segment (``len(knots) + 1`` of them) and a single anchor
value.  Values at interior knots are always derived from the anchor and the
slopes, so a stored function is continuous by construction.

Only the operations a ReLU network needs are provided: affine maps, linear
combinations, ``max(f, 0)`` and a handful of queries (breakpoints, sign
changes, sup-norm distance).  Slopes are carried through every operation
unchanged, so a knot disappears only when slopes on both sides compare
exactly equal.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInterval, InvalidValue, InvariantError, ShapeError

__all__ = [
    "PwlFunction",
    "make_affine",
    "evaluate",
    "linear_combine",
    "relu_pwl",
    "sign_crossings",
    "count_breakpoints",
    "sup_norm_diff",
    "count_sign_changes",
    "canonicalize",
]

# Values within ZERO_ULPS * u * (magnitude of the summed terms, plus |slope * x|
# for the rounding of x itself) of zero are treated as exact zeros by the sign
# logic.
_U = np.finfo(float).eps / 2
ZERO_ULPS = 16.0


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr


class PwlFunction:
    """Continuous piecewise-linear function on the whole real line.

    Args:
        knots: strictly increasing x-coordinates of the slope changes.
        slopes: ``len(knots) + 1`` slopes, left to right.
        anchor: ``(x0, y0)``; ``x0`` must equal ``knots[0]`` (or 0 when there
            are no knots) and ``y0`` is the value there.
    """

    __slots__ = ("knots", "slopes", "anchor", "_vals", "_tol", "_jumps")

    def __init__(self, knots, slopes, anchor) -> None:
        knots = _frozen(knots)
        slopes = _frozen(slopes)
        x0, y0 = (float(v) for v in anchor)
        if slopes.size != knots.size + 1:
            raise ShapeError(
                f"need {knots.size + 1} slopes for {knots.size} knots, got {slopes.size}"
            )
        if not (np.all(np.isfinite(knots)) and np.all(np.isfinite(slopes))):
            raise InvalidValue("knots and slopes must be finite")
        if not (math.isfinite(x0) and math.isfinite(y0)):
            raise InvalidValue("anchor must be finite")
        if knots.size and np.any(np.diff(knots) <= 0):
            raise InvalidValue("knots must be strictly increasing")
        expected_x0 = knots[0] if knots.size else 0.0
        if x0 != expected_x0:
            raise InvalidValue(f"anchor x must be {expected_x0!r}, got {x0!r}")
        self.knots = knots
        self.slopes = slopes
        self.anchor = (x0, y0)
        self._vals = None
        self._tol = None
        self._jumps = None

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_points(cls, xs, ys) -> "PwlFunction":
        """Linear interpolant through ``(xs, ys)``, extended linearly past the ends."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape:
            raise ShapeError("xs and ys must be 1-D arrays of equal length")
        if xs.size < 2:
            raise ShapeError("need at least two points")
        if np.any(np.diff(xs) <= 0):
            raise InvalidValue("xs must be strictly increasing")
        slopes = np.diff(ys) / np.diff(xs)
        if xs.size == 2:
            return cls([], slopes, (0.0, ys[0] - slopes[0] * xs[0]))
        return canonicalize(cls(xs[1:-1], slopes, (xs[1], ys[1])))

    # -- derived data ------------------------------------------------------------

    def _knot_values(self):
        if self._vals is None:
            x0, y0 = self.anchor
            terms = self.slopes[1:-1] * np.diff(self.knots)
            vals = np.empty(self.knots.size)
            scale = np.empty(self.knots.size)
            if self.knots.size:
                vals[0] = y0
                vals[1:] = y0 + np.cumsum(terms)
                scale[0] = abs(y0)
                scale[1:] = abs(y0) + np.cumsum(np.abs(terms))
                # every knot position is itself rounded, which shifts the values
                # downstream of it by ~|s| u |t|
                steep = np.maximum(np.abs(self.slopes[:-1]), np.abs(self.slopes[1:]))
                scale += np.cumsum(steep * np.abs(self.knots))
            self._vals = vals
            self._tol = ZERO_ULPS * _U * scale
        return self._vals, self._tol

    @property
    def jumps(self) -> np.ndarray:
        """Slope change at each knot."""
        if self._jumps is None:
            self._jumps = np.diff(self.slopes)
        return self._jumps

    def values_at_knots(self) -> np.ndarray:
        return self._knot_values()[0].copy()

    def _eval_with_tol(self, x: np.ndarray):
        x0, y0 = self.anchor
        if self.knots.size == 0:
            d = self.slopes[0] * (x - x0)
            return y0 + d, ZERO_ULPS * _U * (abs(y0) + np.abs(d) + abs(self.slopes[0]) * np.abs(x))
        vals, tol = self._knot_values()
        idx = np.searchsorted(self.knots, x, side="right")
        base = np.maximum(idx - 1, 0)
        d = self.slopes[idx] * (x - self.knots[base])
        return vals[base] + d, tol[base] + ZERO_ULPS * _U * (np.abs(d) + np.abs(self.slopes[idx] * x))

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(xa)):
            raise InvalidValue("evaluation points must be finite")
        out = self._eval_with_tol(xa)[0]
        return float(out) if out.ndim == 0 else out

    # -- queries -------------------------------------------------------------

    @property
    def num_knots(self) -> int:
        return int(self.knots.size)

    def is_canonical(self) -> bool:
        return bool(np.all(self.slopes[1:] != self.slopes[:-1]))

    def to_dict(self) -> dict:
        return {
            "knots": self.knots.tolist(),
            "slopes": self.slopes.tolist(),
            "anchor": [self.anchor[0], self.anchor[1]],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PwlFunction":
        try:
            return cls(data["knots"], data["slopes"], data["anchor"])
        except KeyError as exc:
            raise InvalidValue(f"missing field {exc.args[0]!r}") from None

    def __eq__(self, other) -> bool:
        if not isinstance(other, PwlFunction):
            return NotImplemented
        return (
            self.anchor == other.anchor
            and np.array_equal(self.knots, other.knots)
            and np.array_equal(self.slopes, other.slopes)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"PwlFunction(knots={self.knots.size}, anchor={self.anchor})"

    def __add__(self, other):
        if isinstance(other, PwlFunction):
            return linear_combine([1.0, 1.0], [self, other])
        return linear_combine([1.0], [self], float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, PwlFunction):
            return linear_combine([1.0, -1.0], [self, other])
        return linear_combine([1.0], [self], -float(other))

    def __rsub__(self, other):
        return linear_combine([-1.0], [self], float(other))

    def __mul__(self, c):
        return linear_combine([float(c)], [self])

    __rmul__ = __mul__

    def __neg__(self):
        return linear_combine([-1.0], [self])


def _check_finite(*vals: float) -> None:
    for v in vals:
        if not math.isfinite(v):
            raise InvalidValue(f"non-finite value {v!r}")


def make_affine(slope: float, intercept: float) -> PwlFunction:
    slope, intercept = float(slope), float(intercept)
    _check_finite(slope, intercept)
    return PwlFunction([], [slope], (0.0, intercept))


def evaluate(f: PwlFunction, x: float) -> float:
    x = float(x)
    _check_finite(x)
    return f(x)


def canonicalize(f: PwlFunction, tau_slope: float = 0.0) -> PwlFunction:
    """Drop knots whose neighbouring slopes agree.

    With ``tau_slope == 0`` slopes must compare exactly equal; otherwise a
    knot is dropped when ``|s[i+1] - s[i]| <= tau_slope * max(|s[i]|, |s[i+1]|)``.
    """
    s = f.slopes
    if tau_slope > 0:
        drop = np.abs(s[1:] - s[:-1]) <= tau_slope * np.maximum(np.abs(s[1:]), np.abs(s[:-1]))
    else:
        drop = s[1:] == s[:-1]
    if not drop.any():
        return f
    keep = np.flatnonzero(~drop)
    slopes = np.concatenate(([s[0]], s[keep + 1]))
    if keep.size == 0:
        return PwlFunction([], slopes, (0.0, f(0.0)))
    vals = f._knot_values()[0]
    return PwlFunction(f.knots[keep], slopes, (f.knots[keep[0]], vals[keep[0]]))


def linear_combine(
    coeffs: Sequence[float],
    fs: Sequence[PwlFunction],
    constant: float = 0.0,
    tau_slope: float = 0.0,
) -> PwlFunction:
    """Exact ``sum(coeffs[i] * fs[i]) + constant``.

    The result's knots are the union of the inputs' knots, minus those where
    the slope jumps cancel.
    """
    c = np.asarray(coeffs, dtype=float).reshape(-1)
    if c.size == 0 or c.size != len(fs):
        raise ShapeError(f"{c.size} coefficients for {len(fs)} functions")
    constant = float(constant)
    if not (np.all(np.isfinite(c)) and math.isfinite(constant)):
        raise InvalidValue("coefficients and constant must be finite")

    t0 = np.fromiter((f.anchor[0] for f in fs), float, c.size)
    y0 = np.fromiter((f.anchor[1] for f in fs), float, c.size)
    s0 = np.fromiter((f.slopes[0] for f in fs), float, c.size)
    left_slope = float(c @ s0)

    nk = np.fromiter((f.knots.size for f in fs), np.int64, c.size)
    if nk.sum() == 0:
        return PwlFunction([], [left_slope], (0.0, float(c @ y0) + constant))

    knots = np.concatenate([f.knots for f in fs])
    jumps = np.concatenate([f.jumps for f in fs]) * np.repeat(c, nk)
    order = np.argsort(knots, kind="stable")
    knots, jumps = knots[order], jumps[order]
    first = np.flatnonzero(np.concatenate(([True], knots[1:] != knots[:-1])))
    uk = knots[first]
    uj = np.add.reduceat(jumps, first)

    # every input is affine to the left of its first knot, hence at uk[0]
    xmin = uk[0]
    vmin = float(c @ (y0 + s0 * (xmin - t0))) + constant

    keep = uj != 0.0
    uk, uj = uk[keep], uj[keep]
    if uk.size == 0:
        return PwlFunction([], [left_slope], (0.0, vmin + left_slope * (0.0 - xmin)))
    slopes = np.cumsum(np.concatenate(([left_slope], uj)))
    out = PwlFunction(uk, slopes, (uk[0], vmin + left_slope * (uk[0] - xmin)))
    return canonicalize(out, tau_slope)


def _crossings(f: PwlFunction):
    with np.errstate(over="ignore"):
        return _crossings_impl(f)


def _crossings_impl(f: PwlFunction):
    """Locate strict sign changes of ``f``.

    Returns ``(roots, snapped)`` where ``roots`` are the crossing locations
    that fall strictly inside a segment (sorted) and ``snapped`` are the knot
    values with round-off-level values set to exactly zero.
    """
    vals, tol = f._knot_values()
    y = np.where(np.abs(vals) <= tol, 0.0, vals)
    t, s = f.knots, f.slopes
    roots = []
    if t.size == 0:
        x0, y0 = f.anchor
        if s[0] != 0.0:
            r = x0 - y0 / s[0]
            if math.isfinite(r):
                roots.append(r)
        return np.asarray(roots, dtype=float), y

    # left ray
    if y[0] != 0.0 and s[0] != 0.0 and (y[0] > 0) == (s[0] > 0):
        r = t[0] - y[0] / s[0]
        if not math.isfinite(r):
            pass  # root beyond the representable range
        elif r < t[0]:
            roots.append(r)
        else:
            y[0] = 0.0

    # compare signs, not the product, which can underflow to -0.0
    sg = np.sign(y)
    sc = np.flatnonzero(sg[:-1] * sg[1:] < 0)
    if sc.size:
        ya, yb = y[sc], y[sc + 1]
        ta, tb = t[sc], t[sc + 1]
        r = ta + (tb - ta) * (ya / (ya - yb))
        low = r <= ta
        high = r >= tb
        y[sc[low]] = 0.0
        y[sc[high] + 1] = 0.0
        inside = ~(low | high)
        roots.extend(r[inside].tolist())

    # right ray
    if y[-1] != 0.0 and s[-1] != 0.0 and (y[-1] > 0) != (s[-1] > 0):
        r = t[-1] - y[-1] / s[-1]
        if not math.isfinite(r):
            pass
        elif r > t[-1]:
            roots.append(r)
        else:
            y[-1] = 0.0
    return np.sort(np.asarray(roots, dtype=float)), y


def sign_crossings(f: PwlFunction) -> np.ndarray:
    """Points where ``f`` changes sign strictly inside one of its segments.

    These are exactly the knots :func:`relu_pwl` inserts.
    """
    return _crossings(f)[0]


def relu_pwl(f: PwlFunction) -> PwlFunction:
    """Exact ``max(f, 0)``."""
    roots, y = _crossings(f)
    t, s = f.knots, f.slopes
    if t.size == 0:
        x0, y0 = f.anchor
        if roots.size == 0:
            if y0 > 0 or (y0 == 0.0 and s[0] == 0.0):
                return f
            return make_affine(0.0, 0.0)
        r = roots[0]
        new = [0.0, s[0]] if s[0] > 0 else [s[0], 0.0]
        return PwlFunction([r], new, (r, 0.0))

    knots = np.concatenate((t, roots))
    vals = np.concatenate((y, np.zeros(roots.size)))
    order = np.argsort(knots, kind="stable")
    knots, vals = knots[order], vals[order]

    seg_slopes = s[np.searchsorted(t, knots, side="right")]
    positive = np.empty(knots.size + 1, dtype=bool)
    positive[0] = vals[0] > 0 or (vals[0] == 0.0 and s[0] < 0)
    positive[1:-1] = np.maximum(vals[:-1], vals[1:]) > 0
    positive[-1] = vals[-1] > 0 or (vals[-1] == 0.0 and s[-1] > 0)
    slopes = np.where(positive, np.concatenate(([s[0]], seg_slopes)), 0.0)
    # canonicalize here so the anchor keeps its known value (exactly 0 at a
    # crossing) instead of one re-derived through the slopes
    keep = np.flatnonzero(slopes[1:] != slopes[:-1])
    if keep.size == 0:
        return canonicalize(PwlFunction(knots, slopes, (knots[0], max(vals[0], 0.0))))
    new = np.concatenate(([slopes[0]], slopes[keep + 1]))
    return PwlFunction(knots[keep], new, (knots[keep[0]], max(vals[keep[0]], 0.0)))


def count_breakpoints(f: PwlFunction) -> int:
    """Number of slope changes; the number of linear regions is this plus one."""
    if not f.is_canonical():
        raise InvariantError("count_breakpoints needs a canonical function")
    return f.num_knots


def _check_interval(interval: Iterable[float]) -> tuple[float, float]:
    a, b = (float(v) for v in interval)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise InvalidInterval(f"interval endpoints must be finite, got [{a}, {b}]")
    if a >= b:
        raise InvalidInterval(f"empty interval [{a}, {b}]")
    return a, b


def _scan_points(f: PwlFunction, a: float, b: float) -> np.ndarray:
    inner = f.knots[(f.knots > a) & (f.knots < b)]
    return np.concatenate(([a], inner, [b]))


def sup_norm_diff(f: PwlFunction, g: PwlFunction, interval) -> float:
    """``max |f - g|`` over a closed interval, found by scanning knots of ``f - g``."""
    a, b = _check_interval(interval)
    d = linear_combine([1.0, -1.0], [f, g])
    return float(np.max(np.abs(d(_scan_points(d, a, b)))))


def count_sign_changes(f: PwlFunction, interval) -> int:
    """Strict sign changes of ``f`` inside ``(A, B)``.

    Touching zero without changing sign does not count; a zero plateau counts
    once when the signs on its two sides differ.
    """
    a, b = _check_interval(interval)
    v, tol = f._eval_with_tol(_scan_points(f, a, b))
    sg = np.sign(np.where(np.abs(v) <= tol, 0.0, v))
    sg = sg[sg != 0]
    return int(np.count_nonzero(sg[1:] != sg[:-1]))
