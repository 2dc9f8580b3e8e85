"""EUAF activation, feedforward networks and small network algebra.

A network is ``L_L o sigma o L_{L-1} o ... o sigma o L_0`` where every
``L_i`` is affine.  Networks are immutable; the helpers below build new
networks out of old ones (sequential composition, side-by-side stacking,
zero padding) without touching their inputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import CompositionError, NonFiniteError

# Inputs this close to an even integer are snapped onto the wave's zero.
SEAM_TOL = 1e-12
TEMPLATE_WIDTH = 36
TEMPLATE_DEPTH = 5


def _euaf(x: np.ndarray) -> np.ndarray:
    r = x - 2.0 * np.floor((x + 1.0) * 0.5)
    r = np.abs(r)
    r[r <= SEAM_TOL] = 0.0
    neg = x < 0
    if neg.any():
        xn = x[neg]
        r[neg] = xn / (np.abs(xn) + 1.0)
    return r


def euaf(x):
    """Elementary universal activation function.

    Period-2 triangle wave ``|x - 2 floor((x+1)/2)|`` on ``x >= 0`` and the
    soft sign ``x / (|x| + 1)`` on ``x < 0``.  Accepts scalars or arrays.
    """
    arr = np.array(x, dtype=float, ndmin=1)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError("euaf received a non-finite input")
    out = _euaf(arr)
    if np.ndim(x) == 0:
        return float(out[0])
    return out.reshape(np.shape(x))


def _frozen(a, ndim: int) -> np.ndarray:
    arr = np.array(a, dtype=float, ndmin=ndim)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class AffineLayer:
    """``y -> weight @ y + bias``, optionally followed by the activation."""

    weight: np.ndarray
    bias: np.ndarray
    activated: bool = True

    def __post_init__(self):
        w = _frozen(self.weight, 2)
        b = _frozen(self.bias, 1)
        if w.shape[0] != b.shape[0]:
            raise ValueError(f"weight has {w.shape[0]} rows but bias has length {b.shape[0]}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise NonFiniteError("layer parameters must be finite")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "activated", bool(self.activated))

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    def __eq__(self, other):
        if not isinstance(other, AffineLayer):
            return NotImplemented
        return (self.activated == other.activated
                and np.array_equal(self.weight, other.weight)
                and np.array_equal(self.bias, other.bias))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class FeedforwardNetwork:
    """A sigma network: every layer but the last is followed by the EUAF."""

    input_dim: int
    layers: tuple
    metadata: Mapping = field(default_factory=dict)

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("a network needs at least one affine layer")
        if self.input_dim < 1:
            raise ValueError("input_dim must be positive")
        prev = self.input_dim
        for i, layer in enumerate(layers):
            if layer.in_dim != prev:
                raise ValueError(f"layer {i} expects input dimension {layer.in_dim}, got {prev}")
            last = i == len(layers) - 1
            if layer.activated == last:
                raise ValueError("all layers except the last must be activated")
            prev = layer.out_dim
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "input_dim", int(self.input_dim))
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def depth(self) -> int:
        """Number of hidden activation applications."""
        return len(self.layers) - 1

    @property
    def widths(self) -> tuple:
        return tuple(layer.out_dim for layer in self.layers[:-1])

    @property
    def width(self) -> int:
        return max(self.widths, default=0)

    @property
    def hidden_neurons(self) -> int:
        return sum(self.widths)

    @property
    def first_layer(self) -> AffineLayer:
        return self.layers[0]

    def max_abs_param(self) -> float:
        return max(max(np.abs(l.weight).max(initial=0.0), np.abs(l.bias).max(initial=0.0))
                   for l in self.layers)

    def with_metadata(self, **extra) -> "FeedforwardNetwork":
        return FeedforwardNetwork(self.input_dim, self.layers, {**self.metadata, **extra})

    def __call__(self, x):
        return evaluate_network(self, x)

    def __eq__(self, other):
        if not isinstance(other, FeedforwardNetwork):
            return NotImplemented
        return (self.input_dim == other.input_dim
                and len(self.layers) == len(other.layers)
                and all(a == b for a, b in zip(self.layers, other.layers))
                and self.metadata == other.metadata)

    __hash__ = None


def evaluate_batch(net: FeedforwardNetwork, xs, activation: Callable | None = None) -> np.ndarray:
    """Evaluate ``net`` on every row of ``xs`` (shape ``(N, input_dim)``)."""
    h = np.array(xs, dtype=float, ndmin=2)
    if h.shape[1] != net.input_dim:
        raise ValueError(f"network takes {net.input_dim} inputs, got {h.shape[1]}")
    act = _euaf if activation is None else activation
    with np.errstate(over="ignore", invalid="ignore"):
        for i, layer in enumerate(net.layers):
            h = h @ layer.weight.T + layer.bias
            if layer.activated:
                h = act(h)
            if not np.all(np.isfinite(h)):
                raise NonFiniteError(f"non-finite value after layer {i}", layer=i)
    return h


def evaluate_network(net: FeedforwardNetwork, x, activation: Callable | None = None) -> np.ndarray:
    """Evaluate ``net`` at a single input vector; returns the output vector."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != net.input_dim:
        raise ValueError(f"network takes {net.input_dim} inputs, got {x.shape[0]}")
    return evaluate_batch(net, x[None, :], activation)[0]


def scalar_fn(net: FeedforwardNetwork) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized view of a 1-in/1-out network as a function of a 1-d array."""
    if net.input_dim != 1 or net.output_dim != 1:
        raise ValueError("scalar_fn needs a 1-in/1-out network")
    return lambda t: evaluate_batch(net, np.asarray(t, dtype=float).reshape(-1, 1))[:, 0]


# -- building blocks -----------------------------------------------------------

def clip01_fragment() -> FeedforwardNetwork:
    """Three-neuron network equal to ``min(max(t, 0), 1)`` for t in [-1, 2].

    Uses ``1.5 * sigma(t/3 + 1/3) - 0.5 * sigma(t + 1)``.
    """
    return FeedforwardNetwork(1, (
        AffineLayer([[1.0 / 3.0], [1.0]], [1.0 / 3.0, 1.0]),
        AffineLayer([[1.5, -0.5]], [0.0], activated=False),
    ), {"role": "clip"})


def has_clip_tail(net: FeedforwardNetwork) -> bool:
    """True when the last two stages of ``net`` are the clip fragment."""
    if net.depth < 1 or net.output_dim != 1:
        return False
    last, prev = net.layers[-1], net.layers[-2]
    if prev.out_dim != 2 or not (np.array_equal(last.weight, [[1.5, -0.5]]) and last.bias[0] == 0.0):
        return False
    # second neuron input is t + 1, first is t/3 + 1/3 for the same t
    w, b = prev.weight, prev.bias
    return bool(np.allclose(w[0] * 3.0, w[1], atol=1e-12, rtol=1e-12)
                and np.isclose(b[0] * 3.0, b[1], atol=1e-12, rtol=1e-12))


def identity_lane(depth: int, a: float = 0.0, b: float = 1.0) -> FeedforwardNetwork:
    """Depth-``depth`` network returning ``(x - a)/(b - a)`` exactly on [a, b].

    Every hidden neuron sees an argument in [0, 1], where the EUAF is the
    identity.
    """
    if depth < 1:
        raise ValueError("identity lane needs depth >= 1")
    scale = 1.0 / (b - a)
    layers = [AffineLayer([[scale]], [-a * scale])]
    layers += [AffineLayer([[1.0]], [0.0]) for _ in range(depth - 1)]
    layers.append(AffineLayer([[1.0]], [0.0], activated=False))
    return FeedforwardNetwork(1, tuple(layers), {"role": "lane"})


def constant_network(value: float, input_dim: int = 1, widths: Sequence[int] = ()) -> FeedforwardNetwork:
    """Zero-weight network of the given hidden widths that outputs ``value``."""
    layers, prev = [], input_dim
    for w in widths:
        layers.append(AffineLayer(np.zeros((w, prev)), np.zeros(w)))
        prev = w
    layers.append(AffineLayer(np.zeros((1, prev)), [float(value)], activated=False))
    return FeedforwardNetwork(input_dim, tuple(layers))


def compose_networks(outer: FeedforwardNetwork, inner: FeedforwardNetwork, **metadata) -> FeedforwardNetwork:
    """``outer o inner``; inner's output affine is folded into outer's first layer."""
    if inner.output_dim != outer.input_dim:
        raise ValueError(f"cannot feed {inner.output_dim} outputs into {outer.input_dim} inputs")
    lo, fo = inner.layers[-1], outer.layers[0]
    merged = AffineLayer(fo.weight @ lo.weight, fo.weight @ lo.bias + fo.bias, fo.activated)
    layers = inner.layers[:-1] + (merged,) + outer.layers[1:]
    return FeedforwardNetwork(inner.input_dim, layers, metadata)


def stack_networks(nets: Sequence[FeedforwardNetwork], **metadata) -> FeedforwardNetwork:
    """Run equal-depth networks side by side on a shared input; outputs concatenate."""
    nets = list(nets)
    depth, dim = nets[0].depth, nets[0].input_dim
    if any(n.depth != depth or n.input_dim != dim for n in nets):
        raise ValueError("stacked networks must share depth and input dimension")
    layers = []
    for i in range(depth + 1):
        parts = [n.layers[i] for n in nets]
        if i == 0:
            w = np.vstack([p.weight for p in parts])
        else:
            w = _block_diag([p.weight for p in parts])
        b = np.concatenate([p.bias for p in parts])
        layers.append(AffineLayer(w, b, parts[0].activated))
    return FeedforwardNetwork(dim, tuple(layers), metadata)


def _block_diag(blocks):
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols))
    r = c = 0
    for b in blocks:
        out[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def map_output(net: FeedforwardNetwork, weight, bias, **metadata) -> FeedforwardNetwork:
    """Apply the affine map ``y -> weight @ y + bias`` to the outputs of ``net``."""
    weight = np.array(weight, dtype=float, ndmin=2)
    bias = np.array(bias, dtype=float, ndmin=1)
    last = net.layers[-1]
    new_last = AffineLayer(weight @ last.weight, weight @ last.bias + bias, activated=False)
    return FeedforwardNetwork(net.input_dim, net.layers[:-1] + (new_last,),
                              {**net.metadata, **metadata})


def pad_to_width(net: FeedforwardNetwork, width: int) -> FeedforwardNetwork:
    """Pad every hidden layer with idle neurons (zero weights, EUAF(0) = 0)."""
    if net.width > width:
        raise ValueError(f"network width {net.width} exceeds {width}")
    layers, extra_prev = [], 0
    for layer in net.layers:
        w = layer.weight
        if extra_prev:
            w = np.hstack([w, np.zeros((w.shape[0], extra_prev))])
        b = layer.bias
        extra = width - w.shape[0] if layer.activated else 0
        if extra:
            w = np.vstack([w, np.zeros((extra, w.shape[1]))])
            b = np.concatenate([b, np.zeros(extra)])
        layers.append(AffineLayer(w, b, layer.activated))
        extra_prev = extra
    return FeedforwardNetwork(net.input_dim, tuple(layers), net.metadata)


# -- neuron counting -----------------------------------------------------------

@dataclass(frozen=True)
class NeuronCount:
    inner: tuple
    lambda_combination: int
    outer: int
    final_sum: int

    @property
    def total(self) -> int:
        return sum(self.inner) + self.lambda_combination + self.outer + self.final_sum

    def breakdown(self) -> str:
        if len(set(self.inner)) == 1:
            head = f"{self.inner[0]}×{len(self.inner)}"
        else:
            head = " + ".join(str(c) for c in self.inner)
        return f"{self.total} = {head} + {self.lambda_combination} + {self.outer} + {self.final_sum}"

    def as_dict(self) -> dict:
        return {"total": self.total, "inner": list(self.inner),
                "lambda_combination": self.lambda_combination,
                "outer": self.outer, "final_sum": self.final_sum,
                "breakdown": self.breakdown()}


def inner_intrinsic_neurons(net: FeedforwardNetwork) -> int:
    """Hidden neurons of the raw inner network plus the 3 clip neurons."""
    if has_clip_tail(net):
        return net.hidden_neurons - 2 + 3
    return net.hidden_neurons + 3


def count_intrinsic_neurons(comp) -> NeuronCount:
    """Count each distinct neuron of a KST composition once.

    Each inner branch contributes its raw hidden neurons plus the three clip
    neurons; the lambda inner product and the final summation are one neuron
    each; the shared outer network is counted once.
    """
    inner, outer = getattr(comp, "inner", None), getattr(comp, "outer", None)
    d = getattr(comp, "d", None)
    if inner is None or outer is None or d is None or len(inner) != 2 * d + 1:
        raise CompositionError("malformed composition: need d, 2d+1 inner networks and one outer")
    return NeuronCount(tuple(inner_intrinsic_neurons(n) for n in inner), 1, outer.hidden_neurons, 1)


def full_width_count(d: int, width: int = TEMPLATE_WIDTH, depth: int = TEMPLATE_DEPTH) -> NeuronCount:
    """Count for a composition whose inner and outer nets are width x depth templates."""
    per = width * depth
    return NeuronCount(tuple([per + 3] * (2 * d + 1)), 1, per, 1)
