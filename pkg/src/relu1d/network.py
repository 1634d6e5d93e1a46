"""Random 1-D ReLU networks and their exact piecewise-linear forward pass.

Weights follow He scaling (variance ``2 / fan_in``) and biases have variance
``sigma_b**2``.  Every row of every layer draws from its own Philox stream
keyed by ``(seed, layer, row)``; within a row the column index is the stream
position.  Parameters are therefore independent of the order in which rows
are generated, and extra rows beyond a layer's width (see :func:`draw_row`)
are well defined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidSigma, InvalidValue
from .pwl import (
    PwlFunction,
    count_breakpoints,
    linear_combine,
    make_affine,
    relu_pwl,
)

__all__ = [
    "Topology",
    "NetworkParams",
    "draw_row",
    "init_network",
    "numeric_forward",
    "hidden_activations",
    "preactivations",
    "preactivation_pwl",
    "forward_pwl",
    "count_regions",
]


@dataclass(frozen=True)
class Topology:
    """Layer widths ``(1, n_1, ..., n_L, 1)``; only the hidden widths are stored."""

    hidden_widths: tuple[int, ...]

    def __post_init__(self):
        widths = tuple(int(n) for n in self.hidden_widths)
        if not widths:
            raise InvalidValue("need at least one hidden layer")
        if any(n < 1 for n in widths):
            raise InvalidValue(f"hidden widths must be positive, got {widths}")
        object.__setattr__(self, "hidden_widths", widths)

    @classmethod
    def of(cls, *widths: int) -> "Topology":
        return cls(tuple(widths))

    @property
    def depth(self) -> int:
        """Number of hidden layers ``L``."""
        return len(self.hidden_widths)

    @property
    def widths(self) -> tuple[int, ...]:
        return (1, *self.hidden_widths, 1)

    @property
    def total_hidden(self) -> int:
        return sum(self.hidden_widths)

    def __str__(self) -> str:
        return "(1, [" + ", ".join(map(str, self.hidden_widths)) + "], 1)"


def _row_generator(seed: int, layer: int, row: int) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed), int(layer), int(row)])
    return np.random.Generator(np.random.Philox(ss))


def draw_row(seed: int, layer: int, row: int, fan_in: int, sigma_b: float):
    """Weights and bias of one neuron, as :func:`init_network` would draw them.

    Returns ``(weights, bias)`` with ``weights`` of length ``fan_in``.
    """
    g = _row_generator(seed, layer, row)
    w = g.standard_normal(fan_in) * math.sqrt(2.0 / fan_in)
    b = g.standard_normal() * sigma_b
    return w, float(b)


@dataclass(frozen=True, eq=False)
class NetworkParams:
    topology: Topology
    sigma_b: float
    seed: int
    weights: tuple[np.ndarray, ...] = field(repr=False)
    biases: tuple[np.ndarray, ...] = field(repr=False)

    @classmethod
    def from_arrays(cls, weights, biases, sigma_b: float = 1.0, seed: int = 0):
        """Build a network from explicit matrices (shapes are checked)."""
        ws = tuple(np.array(w, dtype=float, ndmin=2) for w in weights)
        bs = tuple(np.array(b, dtype=float).reshape(-1) for b in biases)
        if len(ws) != len(bs) or len(ws) < 2:
            raise InvalidValue("need matching weight/bias lists with at least 2 layers")
        hidden = tuple(w.shape[0] for w in ws[:-1])
        topo = Topology(hidden)
        widths = topo.widths
        for ell, (w, b) in enumerate(zip(ws, bs), start=1):
            if w.shape != (widths[ell], widths[ell - 1]) or b.shape != (widths[ell],):
                raise InvalidValue(f"layer {ell}: bad shapes {w.shape}, {b.shape}")
        for a in ws + bs:
            a.setflags(write=False)
        return cls(topo, float(sigma_b), int(seed), ws, bs)

    @property
    def depth(self) -> int:
        return self.topology.depth

    def to_dict(self) -> dict:
        return {
            "topology": list(self.topology.hidden_widths),
            "sigma_b": self.sigma_b,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkParams":
        return init_network(Topology(tuple(data["topology"])), data["sigma_b"], data["seed"])

    def debug_dict(self) -> dict:
        """``to_dict`` plus every weight and bias value."""
        d = self.to_dict()
        d["weights"] = [w.tolist() for w in self.weights]
        d["biases"] = [b.tolist() for b in self.biases]
        return d


def init_network(topology: Topology, sigma_b: float, seed: int) -> NetworkParams:
    """Sample ``W[l] ~ N(0, 2/n_{l-1})`` and ``b[l] ~ N(0, sigma_b^2)`` deterministically."""
    sigma_b = float(sigma_b)
    if not (math.isfinite(sigma_b) and sigma_b > 0):
        raise InvalidSigma(f"sigma_b must be positive, got {sigma_b}")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise InvalidValue(f"seed must be a 64-bit unsigned integer, got {seed}")
    widths = topology.widths
    weights, biases = [], []
    for ell in range(1, len(widths)):
        rows = [draw_row(seed, ell, j, widths[ell - 1], sigma_b) for j in range(widths[ell])]
        w = np.stack([r[0] for r in rows])
        b = np.array([r[1] for r in rows])
        w.setflags(write=False)
        b.setflags(write=False)
        weights.append(w)
        biases.append(b)
    return NetworkParams(topology, sigma_b, seed, tuple(weights), tuple(biases))


def numeric_forward(params: NetworkParams, x) -> np.ndarray:
    """Plain matrix/ReLU evaluation of the network at the points ``x``."""
    h = np.atleast_1d(np.asarray(x, dtype=float))[None, :]
    last = len(params.weights) - 1
    for ell, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = w @ h + b[:, None]
        if ell < last:
            h = np.maximum(h, 0.0)
    return h[0]


def _check_layer(params: NetworkParams, layer: int) -> None:
    if not 1 <= layer <= params.depth + 1:
        raise IndexError(f"layer {layer} outside [1, {params.depth + 1}]")


def hidden_activations(params: NetworkParams, upto: int) -> list[PwlFunction]:
    """Post-activation functions of every neuron in hidden layer ``upto``.

    ``upto = 0`` returns the identity (the network input).
    """
    if not 0 <= upto <= params.depth:
        raise IndexError(f"hidden layer {upto} outside [0, {params.depth}]")
    posts = [make_affine(1.0, 0.0)]
    for ell in range(1, upto + 1):
        posts = [relu_pwl(s) for s in _layer_pre(params, ell, posts)]
    return posts


def _layer_pre(params, ell, posts, rows=None):
    w, b = params.weights[ell - 1], params.biases[ell - 1]
    idx = range(w.shape[0]) if rows is None else rows
    if ell == 1:
        return [make_affine(w[j, 0], b[j]) for j in idx]
    return [linear_combine(w[j], posts, b[j]) for j in idx]


def preactivations(params: NetworkParams, layer: int) -> list[PwlFunction]:
    """Pre-activation functions of every neuron in ``layer`` (1-based, ``L+1`` is the output)."""
    _check_layer(params, layer)
    return _layer_pre(params, layer, hidden_activations(params, layer - 1))


def preactivation_pwl(params: NetworkParams, layer: int, neuron: int) -> PwlFunction:
    _check_layer(params, layer)
    width = params.topology.widths[layer]
    if not 0 <= neuron < width:
        raise IndexError(f"neuron {neuron} outside [0, {width})")
    return _layer_pre(params, layer, hidden_activations(params, layer - 1), [neuron])[0]


def forward_pwl(params: NetworkParams) -> PwlFunction:
    """Exact piecewise-linear form of the network output over all of R."""
    return preactivation_pwl(params, params.depth + 1, 0)


def count_regions(params: NetworkParams) -> int:
    return count_breakpoints(forward_pwl(params)) + 1


def hand_network(weights: Sequence, biases: Sequence) -> NetworkParams:
    """Shorthand for :meth:`NetworkParams.from_arrays` with default sigma/seed."""
    return NetworkParams.from_arrays(weights, biases)
