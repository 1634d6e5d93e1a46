"""Infinite-width (NNGP) quantities for 1-D ReLU networks with He weights.

Layer ``l`` below always means the pre-activation feeding layer ``l``'s
ReLU: ``l = 1`` is the affine first layer with variance ``2u^2 + sigma_b^2``
and ``l = L + 1`` is the network output.

The covariance recursion is the arc-cosine kernel::

    C_l(u, v) = sigma_b^2 + 2 X (sin t + (pi - t) cos t),
    X = sqrt(V_{l-1}(u) V_{l-1}(v)) / (2 pi),   t = arccos rho_{l-1}(u, v).

Near the diagonal ``1 - rho`` is O(eps^2) and forming it as ``1 - cov/norm``
loses half the digits, so :func:`cov_step` also carries the gap
``sqrt(V_u V_v) - C`` through algebraically rearranged, cancellation-free
formulas.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidCorrelation, InvalidInterval, InvalidLayer, InvalidVariance

__all__ = [
    "GpPairState",
    "variance",
    "arccos_kernel",
    "base_state",
    "cov_step",
    "rho_pair",
    "expansion_coefficient",
    "theta_linearized",
    "sign_change_prob",
    "crossing_density",
    "expected_crossings",
    "theory_rows",
    "crossing_rows",
    "write_theory_tables",
]

RHO_TOL = 1e-12


def _check_layer(layer: int) -> int:
    if int(layer) != layer or layer < 1:
        raise InvalidLayer(f"layer must be an integer >= 1, got {layer!r}")
    return int(layer)


def _clamp_rho(rho: float) -> float:
    if not abs(rho) <= 1.0 + RHO_TOL:
        raise InvalidCorrelation(f"|rho| = {abs(rho)!r} exceeds 1")
    return min(1.0, max(-1.0, rho))


def variance(layer: int, u: float, sigma_b: float) -> float:
    """``V_l(u) = 2u^2 + l sigma_b^2``."""
    layer = _check_layer(layer)
    return 2.0 * u * u + layer * sigma_b * sigma_b


def arccos_kernel(var_u_prev: float, var_v_prev: float, rho_prev: float) -> float:
    """``E[relu(Z1) relu(Z2)]`` for centred Gaussians with the given variances and correlation."""
    if not (var_u_prev > 0 and var_v_prev > 0):
        raise InvalidVariance(f"variances must be positive, got {var_u_prev}, {var_v_prev}")
    theta = math.acos(_clamp_rho(rho_prev))
    x = math.sqrt(var_u_prev * var_v_prev) / (2.0 * math.pi)
    return x * (math.sin(theta) + (math.pi - theta) * math.cos(theta))


def _j_deficit(theta: float) -> float:
    """``pi - sin t - (pi - t) cos t`` without cancellation at small ``t``."""
    if theta < 1e-2:
        t2 = theta * theta
        # pi (1 - cos t) + (t cos t - sin t)
        one_minus_cos = 2.0 * math.sin(0.5 * theta) ** 2
        tail = -theta * t2 * (1.0 / 3.0 - t2 * (1.0 / 30.0 - t2 / 840.0))
        return math.pi * one_minus_cos + tail
    return math.pi - math.sin(theta) - (math.pi - theta) * math.cos(theta)


@dataclass(frozen=True)
class GpPairState:
    """Joint NNGP statistics of one pre-activation at inputs ``u`` and ``v``.

    ``gap`` is ``sqrt(var_u * var_v) - cov``; ``one_minus_rho`` and ``theta``
    are derived from it so they stay accurate when ``rho`` is close to 1.
    """

    layer: int
    u: float
    v: float
    var_u: float
    var_v: float
    cov: float
    gap: float

    @property
    def norm(self) -> float:
        return math.sqrt(self.var_u * self.var_v)

    @property
    def one_minus_rho(self) -> float:
        return self.gap / self.norm

    @property
    def rho(self) -> float:
        return _clamp_rho(self.cov / self.norm)

    @property
    def theta(self) -> float:
        t = min(max(self.one_minus_rho, 0.0), 2.0)
        return 2.0 * math.asin(math.sqrt(0.5 * t))


def base_state(u: float, v: float, sigma_b: float) -> GpPairState:
    """First-layer statistics: ``C_1(u, v) = 2uv + sigma_b^2``."""
    s2 = sigma_b * sigma_b
    vu, vv = 2.0 * u * u + s2, 2.0 * v * v + s2
    cov = 2.0 * u * v + s2
    # V_u V_v - C^2 = 2 sigma_b^2 (u - v)^2
    gap = 2.0 * s2 * (u - v) ** 2 / (math.sqrt(vu * vv) + cov) if cov > 0 else math.sqrt(vu * vv) - cov
    return GpPairState(1, float(u), float(v), vu, vv, cov, gap)


def cov_step(prev: GpPairState, sigma_b: float) -> GpPairState:
    """Advance the pair statistics through one ReLU layer."""
    if not (prev.var_u > 0 and prev.var_v > 0):
        raise InvalidVariance("variances must be positive")
    s2 = sigma_b * sigma_b
    theta = prev.theta
    p = prev.norm
    cov = s2 + p * (math.sin(theta) + (math.pi - theta) * math.cos(theta)) / math.pi
    var_u, var_v = prev.var_u + s2, prev.var_v + s2
    q = math.sqrt(var_u * var_v)
    # q - p - s2 = s2 (sqrt(V_u) - sqrt(V_v))^2 / (q + p + s2)
    lead = s2 * (math.sqrt(prev.var_u) - math.sqrt(prev.var_v)) ** 2 / (q + p + s2)
    gap = lead + p * _j_deficit(theta) / math.pi
    return GpPairState(prev.layer + 1, prev.u, prev.v, var_u, var_v, cov, gap)


def rho_pair(layer: int, u: float, v: float, sigma_b: float) -> GpPairState:
    layer = _check_layer(layer)
    state = base_state(u, v, sigma_b)
    for _ in range(layer - 1):
        state = cov_step(state, sigma_b)
    return state


def expansion_coefficient(layer: int, x: float, sigma_b: float) -> float:
    """``A_l(x) = l sigma_b^2 / (2x^2 + l sigma_b^2)^2``, the limit of ``(1 - rho)/eps^2``."""
    layer = _check_layer(layer)
    v = variance(layer, x, sigma_b)
    return layer * sigma_b * sigma_b / (v * v)


def theta_linearized(layer: int, x: float, eps: float, sigma_b: float) -> float:
    layer = _check_layer(layer)
    return math.sqrt(2.0 * layer) * sigma_b * eps / variance(layer, x, sigma_b)


def sign_change_prob(rho: float) -> float:
    """Probability that two centred Gaussians with correlation ``rho`` differ in sign."""
    return math.acos(_clamp_rho(rho)) / math.pi


def crossing_density(layer, x, sigma_b: float):
    """Expected zero crossings per unit length; accepts scalar or array ``x``."""
    layer = _check_layer(layer)
    x = np.asarray(x, dtype=float)
    out = math.sqrt(2.0 * layer) * sigma_b / (math.pi * (2.0 * x * x + layer * sigma_b * sigma_b))
    return float(out) if out.ndim == 0 else out


def expected_crossings(layer: int, a: float, b: float, sigma_b: float) -> float:
    """Expected number of zero crossings on ``[a, b]``; infinite endpoints are allowed."""
    layer = _check_layer(layer)
    a, b = float(a), float(b)
    if math.isnan(a) or math.isnan(b) or a >= b:
        raise InvalidInterval(f"need a < b, got [{a}, {b}]")
    scale = math.sqrt(2.0) / (math.sqrt(layer) * sigma_b)

    def at(t):
        if math.isinf(t):
            return math.copysign(math.pi / 2, t)
        return math.atan(scale * t)

    if math.isinf(a) and math.isinf(b):
        return 1.0
    return (at(b) - at(a)) / math.pi


def theory_rows(layers: Iterable[int], xs: Sequence[float], sigma_b: float):
    """Rows ``(layer, x, variance, density, A_coeff)``."""
    for ell in layers:
        for x in xs:
            yield (
                ell,
                float(x),
                variance(ell, x, sigma_b),
                crossing_density(ell, x, sigma_b),
                expansion_coefficient(ell, x, sigma_b),
            )


def crossing_rows(layers: Iterable[int], intervals, sigma_b: float):
    """Rows ``(layer, A, B, expected_crossings)``."""
    for ell in layers:
        for a, b in intervals:
            yield ell, float(a), float(b), expected_crossings(ell, a, b, sigma_b)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(v)
    return "%.17g" % v


def write_theory_tables(path, layers, xs, intervals, sigma_b: float):
    """Write the density table to ``path`` and the crossing table next to it.

    Returns the two paths written.
    """
    from pathlib import Path

    path = Path(path)
    second = path.with_name(path.stem + "_crossings" + (path.suffix or ".csv"))
    layers = list(layers)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["layer", "x", "variance", "density", "A_coeff"])
        for row in theory_rows(layers, xs, sigma_b):
            w.writerow([_fmt(v) for v in row])
    with open(second, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["layer", "A", "B", "expected_crossings"])
        for row in crossing_rows(layers, intervals, sigma_b):
            w.writerow([_fmt(v) for v in row])
    return path, second
