"""Multilayer perceptron with analytically differentiable activations.

The forward pass caches every pre-activation so that layer derivative
matrices can be formed afterwards without re-evaluation.  Activation
derivatives are exact closed forms (no numerics): tanh derivatives are
polynomials in tanh, GELU is the erf-based x*Phi(x) whose derivatives
are Hermite-polynomial factors times the normal pdf.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import erf

SERIAL_FORMAT = "mlptaylor-mlp-v1"

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class UnsupportedOrder(ValueError):
    """Requested derivative order exceeds the activation's supported order."""


class ShapeError(ValueError):
    """Input or parameter dimensions do not match the architecture."""


def _normal_pdf(x):
    return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def _normal_cdf(x):
    return 0.5 * (1.0 + erf(x / _SQRT2))


@lru_cache(maxsize=None)
def _hermite_coeffs(k: int) -> tuple[float, ...]:
    """Coefficients (ascending) of the probabilists' Hermite polynomial He_k."""
    if k == 0:
        return (1.0,)
    if k == 1:
        return (0.0, 1.0)
    prev2, prev = _hermite_coeffs(k - 2), _hermite_coeffs(k - 1)
    # He_k = x*He_{k-1} - (k-1)*He_{k-2}
    coeffs = [0.0] * (k + 1)
    for i, c in enumerate(prev):
        coeffs[i + 1] += c
    for i, c in enumerate(prev2):
        coeffs[i] -= (k - 1) * c
    return tuple(coeffs)


@lru_cache(maxsize=None)
def _tanh_deriv_coeffs(p: int) -> tuple[float, ...]:
    """Coefficients (ascending, in t = tanh x) of d^p tanh / dx^p.

    Uses d/dx P(t) = P'(t) * (1 - t^2).
    """
    if p == 0:
        return (0.0, 1.0)
    prev = _tanh_deriv_coeffs(p - 1)
    dprev = tuple(i * c for i, c in enumerate(prev))[1:] or (0.0,)
    # multiply dP/dt by (1 - t^2)
    coeffs = [0.0] * (len(dprev) + 2)
    for i, c in enumerate(dprev):
        coeffs[i] += c
        coeffs[i + 2] -= c
    return tuple(coeffs)


def _polyval_ascending(coeffs: tuple[float, ...], t):
    out = np.zeros_like(t)
    for c in reversed(coeffs):
        out = out * t + c
    return out


@dataclass(frozen=True)
class Activation:
    """Neuron activation with exact derivatives up to ``max_order``.

    kind is one of "identity", "tanh", "gelu".  GELU is the erf-based
    definition x*Phi(x) with Phi the standard normal CDF, so all
    derivative orders exist in closed form.
    """

    kind: str
    max_order: int = 4

    KINDS = ("identity", "tanh", "gelu")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown activation kind {self.kind!r}")
        if self.max_order < 4:
            raise ValueError(f"max_order must be >= 4, got {self.max_order}")

    def deriv(self, p: int, x):
        """p-th derivative evaluated elementwise at x (p=0 is the function)."""
        if p < 0 or p > self.max_order:
            raise UnsupportedOrder(f"order {p} outside supported range 0..{self.max_order}")
        x = np.asarray(x, dtype=float)
        if self.kind == "identity":
            if p == 0:
                return x.copy()
            if p == 1:
                return np.ones_like(x)
            return np.zeros_like(x)
        if self.kind == "tanh":
            return _polyval_ascending(_tanh_deriv_coeffs(p), np.tanh(x))
        # gelu
        if p == 0:
            return x * _normal_cdf(x)
        if p == 1:
            return _normal_cdf(x) + x * _normal_pdf(x)
        # d^p [x Phi] = x phi^(p-1) + p phi^(p-2), phi^(k) = (-1)^k He_k phi
        phi = _normal_pdf(x)
        he1 = _polyval_ascending(_hermite_coeffs(p - 1), x)
        he2 = _polyval_ascending(_hermite_coeffs(p - 2), x)
        return phi * (x * he1 * (-1) ** (p - 1) + p * he2 * (-1) ** (p - 2))

    def __call__(self, x):
        return self.deriv(0, x)


IDENTITY = Activation("identity")
TANH = Activation("tanh")
GELU = Activation("gelu")


def activation_deriv(act: Activation, p: int, x: float) -> float:
    """Scalar convenience wrapper over :meth:`Activation.deriv`."""
    return float(act.deriv(p, np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class Mlp:
    """Fully connected network y = a_L(W_L a_{L-1}(...) + b_L).

    ``weights[i]`` maps layer i activations to layer i+1 pre-activations,
    shape (dims[i+1], dims[i]).  The output layer is always
    identity-activated with a zero bias, which the constructor enforces.
    """

    layer_dims: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    activations: tuple[Activation, ...]

    def __post_init__(self):
        dims = self.layer_dims
        L = len(dims) - 1
        if L < 2:
            raise ShapeError(f"need at least 2 layers (one hidden), got {L}")
        if not (len(self.weights) == len(self.biases) == len(self.activations) == L):
            raise ShapeError("weights/biases/activations must all have one entry per layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[i + 1], dims[i]):
                raise ShapeError(f"layer {i + 1}: weight shape {w.shape} != {(dims[i + 1], dims[i])}")
            if b.shape != (dims[i + 1],):
                raise ShapeError(f"layer {i + 1}: bias shape {b.shape} != {(dims[i + 1],)}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i + 1}: non-finite parameters")
        if self.activations[-1].kind != "identity":
            raise ShapeError("output layer must be identity-activated")
        if np.any(self.biases[-1] != 0.0):
            raise ShapeError("output layer bias must be zero")

    @property
    def n_layers(self) -> int:
        return len(self.layer_dims) - 1

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]


@dataclass(frozen=True)
class ForwardTrace:
    """Input plus every pre-activation z and activation y of one forward pass.

    ``zs[i]`` / ``ys[i]`` belong to layer i+1; the layer-0 activation is
    the input itself.
    """

    x: np.ndarray
    zs: tuple[np.ndarray, ...]
    ys: tuple[np.ndarray, ...]

    def y(self, layer: int) -> np.ndarray:
        """Activation vector of the given layer, layer 0 being the input."""
        return self.x if layer == 0 else self.ys[layer - 1]

    def z(self, layer: int) -> np.ndarray:
        """Pre-activation vector of the given layer (1-based)."""
        return self.zs[layer - 1]

    @property
    def output(self) -> np.ndarray:
        return self.ys[-1]


def forward(net: Mlp, x) -> ForwardTrace:
    """Evaluate the network on a single input, caching all intermediates."""
    x = np.asarray(x, dtype=float)
    if x.shape != (net.input_dim,):
        raise ShapeError(f"input shape {x.shape} != ({net.input_dim},)")
    zs, ys = [], []
    y = x
    for w, b, act in zip(net.weights, net.biases, net.activations):
        z = w @ y + b
        y = act(z)
        zs.append(z)
        ys.append(y)
    return ForwardTrace(x=x, zs=tuple(zs), ys=tuple(ys))


def he_init(layer_dims, activations, seed) -> Mlp:
    """He-initialized network: weights ~ Normal(0, 2/fan_in), biases zero.

    ``seed`` may be an int or a numpy SeedSequence/Generator; the same
    seed always yields identical parameters.
    """
    dims = tuple(int(d) for d in layer_dims)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    acts = tuple(activations)
    weights, biases = [], []
    for i in range(len(dims) - 1):
        std = np.sqrt(2.0 / dims[i])
        weights.append(rng.normal(0.0, std, size=(dims[i + 1], dims[i])))
        biases.append(np.zeros(dims[i + 1]))
    return Mlp(layer_dims=dims, weights=tuple(weights), biases=tuple(biases), activations=acts)


def _floats_to_hex(a: np.ndarray) -> list[str]:
    return [float(v).hex() for v in np.asarray(a, dtype=float).ravel()]


def _hex_to_floats(values, shape) -> np.ndarray:
    return np.array([float.fromhex(v) for v in values]).reshape(shape)


def to_json(net: Mlp) -> str:
    """Serialize to a versioned JSON document.

    Float values are stored as hexadecimal float literals so the
    round-trip is bit-exact.
    """
    doc = {
        "format": SERIAL_FORMAT,
        "layer_dims": list(net.layer_dims),
        "activations": [a.kind for a in net.activations],
        "max_order": net.activations[0].max_order,
        "weights": [_floats_to_hex(w) for w in net.weights],
        "biases": [_floats_to_hex(b) for b in net.biases],
    }
    return json.dumps(doc, indent=1)


def from_json(text: str) -> Mlp:
    doc = json.loads(text)
    if doc.get("format") != SERIAL_FORMAT:
        raise ValueError(f"unsupported serialization format {doc.get('format')!r}")
    dims = tuple(doc["layer_dims"])
    max_order = doc.get("max_order", 4)
    acts = tuple(Activation(kind, max_order) for kind in doc["activations"])
    weights = tuple(
        _hex_to_floats(w, (dims[i + 1], dims[i])) for i, w in enumerate(doc["weights"])
    )
    biases = tuple(_hex_to_floats(b, (dims[i + 1],)) for i, b in enumerate(doc["biases"]))
    return Mlp(layer_dims=dims, weights=weights, biases=biases, activations=acts)
