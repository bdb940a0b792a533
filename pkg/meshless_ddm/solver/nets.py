"""
Dense tanh networks evaluated together with their first and second spatial derivatives.

The forward pass propagates second-order Taylor data ``(a, da/dx, d2a/dx2)`` through each
layer analytically and keeps a per-batch record of the intermediate quantities, so the
gradient of any scalar loss built from values, gradients and Hessian entries can be
accumulated in reverse over that record.

Hessian entries are stored in the order ``(xx, yy, xy)`` everywhere in this module.
"""
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from meshless_ddm.solver.exceptions import DivergenceError, InvalidConfigError

FloatArray = NDArray[np.float64]

XX, YY, XY = 0, 1, 2

INPUT_DIM = 2
OUTPUT_DIM = 1


@dataclass(frozen=True)
class Layer:
    weight: FloatArray  # (fan_out, fan_in)
    bias: FloatArray  # (fan_out,)


class Mlp:
    """
    Feed-forward network ``R^2 -> R`` with tanh on hidden layers and identity on the output.

    Parameter arrays are owned by the network and updated in place by the optimizers.
    """

    def __init__(self, layers: Sequence[Layer]):
        if not layers:
            raise InvalidConfigError("a network needs at least one layer")
        fan_in = INPUT_DIM
        for index, layer in enumerate(layers):
            if layer.weight.ndim != 2 or layer.weight.shape[1] != fan_in:
                raise InvalidConfigError(
                    f"layer {index} weight has shape {layer.weight.shape}, expected (*, {fan_in})"
                )
            if layer.bias.shape != (layer.weight.shape[0],):
                raise InvalidConfigError(f"layer {index} bias has shape {layer.bias.shape}")
            if not (np.all(np.isfinite(layer.weight)) and np.all(np.isfinite(layer.bias))):
                raise InvalidConfigError(f"layer {index} holds non-finite parameters")
            fan_in = layer.weight.shape[0]
        if fan_in != OUTPUT_DIM:
            raise InvalidConfigError(f"network output dimension is {fan_in}, expected {OUTPUT_DIM}")
        self.layers: tuple[Layer, ...] = tuple(layers)

    @classmethod
    def from_arrays(cls, weights: Sequence[ArrayLike], biases: Sequence[ArrayLike]) -> "Mlp":
        if len(weights) != len(biases):
            raise InvalidConfigError("weights and biases must have the same number of layers")
        return cls(
            [
                Layer(np.array(w, dtype=np.float64, ndmin=2), np.array(b, dtype=np.float64, ndmin=1))
                for w, b in zip(weights, biases)
            ]
        )

    @classmethod
    def glorot(cls, widths: Sequence[int], rng: np.random.Generator) -> "Mlp":
        """Glorot-uniform weights and zero biases for the full width list ``[2, ..., 1]``."""
        widths = list(widths)
        if len(widths) < 2 or widths[0] != INPUT_DIM or widths[-1] != OUTPUT_DIM:
            raise InvalidConfigError(f"widths must start at {INPUT_DIM} and end at {OUTPUT_DIM}, got {widths}")
        if any(w < 1 for w in widths):
            raise InvalidConfigError(f"widths must be positive, got {widths}")
        layers = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            layers.append(Layer(rng.uniform(-limit, limit, size=(fan_out, fan_in)), np.zeros(fan_out)))
        return cls(layers)

    @property
    def widths(self) -> list[int]:
        return [INPUT_DIM] + [layer.weight.shape[0] for layer in self.layers]

    def parameters(self) -> list[FloatArray]:
        """Live parameter arrays in the order ``[W0, b0, W1, b1, ...]``."""
        return [array for layer in self.layers for array in (layer.weight, layer.bias)]

    @property
    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def flatten(self) -> FloatArray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def copy(self) -> "Mlp":
        return Mlp([Layer(layer.weight.copy(), layer.bias.copy()) for layer in self.layers])

    def predict(self, points: ArrayLike) -> FloatArray:
        """Values only, without derivative propagation."""
        a = _as_points(points)
        for layer in self.layers[:-1]:
            a = np.tanh(a @ layer.weight.T + layer.bias)
        last = self.layers[-1]
        return (a @ last.weight.T + last.bias)[:, 0]

    def __repr__(self) -> str:
        return f"Mlp(widths={self.widths})"


@dataclass(frozen=True)
class JetEval:
    value: float
    grad: FloatArray
    hess_diag: FloatArray
    cross: float

    def laplacian(self) -> float:
        return float(self.hess_diag[0] + self.hess_diag[1])


@dataclass
class JetBatch:
    """
    Values and spatial derivatives over a batch of points.

    The same container carries loss cotangents (derivatives of a scalar with respect to
    each entry) on the way back.
    """

    value: FloatArray  # (N,)
    grad: FloatArray  # (N, 2)
    hess: FloatArray  # (N, 3)

    @classmethod
    def zeros(cls, n: int) -> "JetBatch":
        return cls(np.zeros(n), np.zeros((n, 2)), np.zeros((n, 3)))

    def __len__(self) -> int:
        return self.value.shape[0]

    def __getitem__(self, index: int) -> JetEval:
        return JetEval(
            value=float(self.value[index]),
            grad=self.grad[index].copy(),
            hess_diag=self.hess[index, [XX, YY]].copy(),
            cross=float(self.hess[index, XY]),
        )

    def slice(self, selection: slice) -> "JetBatch":
        return JetBatch(self.value[selection], self.grad[selection], self.hess[selection])

    def laplacian(self) -> FloatArray:
        return self.hess[:, XX] + self.hess[:, YY]

    def normal_derivative(self, normals: ArrayLike) -> FloatArray:
        return np.sum(self.grad * np.asarray(normals, dtype=np.float64), axis=-1)


@dataclass
class _TanhRecord:
    t: FloatArray
    s: FloatArray
    r: FloatArray
    dz: FloatArray
    d2z: FloatArray


@dataclass
class _LayerRecord:
    a: FloatArray
    da: FloatArray
    d2a: FloatArray
    activation: _TanhRecord | None = None


@dataclass
class JetTape:
    points: FloatArray
    records: list[_LayerRecord] = field(default_factory=list)


@dataclass
class ParamGrad:
    weights: list[FloatArray]
    biases: list[FloatArray]
    alpha: float | None = None

    def arrays(self) -> list[FloatArray]:
        """Gradient arrays aligned with :meth:`Mlp.parameters`."""
        return [array for pair in zip(self.weights, self.biases) for array in pair]

    def flatten(self) -> FloatArray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def is_finite(self) -> bool:
        finite = all(np.all(np.isfinite(a)) for a in self.arrays())
        return finite and (self.alpha is None or bool(np.isfinite(self.alpha)))


@dataclass
class JetLoss:
    """A scalar loss together with its cotangent with respect to a :class:`JetBatch`."""

    value: float
    cotangent: JetBatch
    alpha_grad: float | None = None


def _as_points(points: ArrayLike) -> FloatArray:
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != INPUT_DIM:
        raise InvalidConfigError(f"points must have shape (N, {INPUT_DIM}), got {x.shape}")
    return x


def _affine(stacked: FloatArray, matrix: FloatArray) -> FloatArray:
    """Apply ``matrix`` on the last axis of an ``(N, K, d)`` stack as a single matrix product."""
    n, k, d = stacked.shape
    return (stacked.reshape(n * k, d) @ matrix).reshape(n, k, matrix.shape[1])


def _contract(cotangent: FloatArray, inputs: FloatArray) -> FloatArray:
    """``sum_{n,k} cotangent[n,k,o] * inputs[n,k,i]`` as an ``(o, i)`` array."""
    return cotangent.reshape(-1, cotangent.shape[-1]).T @ inputs.reshape(-1, inputs.shape[-1])


def forward_jet_batch(net: Mlp, points: ArrayLike) -> tuple[JetBatch, JetTape]:
    x = _as_points(points)
    n = x.shape[0]
    a = x
    da = np.broadcast_to(np.eye(INPUT_DIM), (n, INPUT_DIM, INPUT_DIM)).copy()
    d2a = np.zeros((n, 3, INPUT_DIM))
    tape = JetTape(points=x)
    last = len(net.layers) - 1
    for index, layer in enumerate(net.layers):
        z = a @ layer.weight.T + layer.bias
        dz = _affine(da, layer.weight.T)
        d2z = _affine(d2a, layer.weight.T)
        record = _LayerRecord(a=a, da=da, d2a=d2a)
        tape.records.append(record)
        if index == last:
            return JetBatch(value=z[:, 0].copy(), grad=dz[:, :, 0].copy(), hess=d2z[:, :, 0].copy()), tape
        t = np.tanh(z)
        s = 1.0 - t * t
        r = -2.0 * t * s
        record.activation = _TanhRecord(t=t, s=s, r=r, dz=dz, d2z=d2z)
        a = t
        da = s[:, None, :] * dz
        d2a = np.empty_like(d2z)
        d2a[:, XX] = r * dz[:, 0] ** 2 + s * d2z[:, XX]
        d2a[:, YY] = r * dz[:, 1] ** 2 + s * d2z[:, YY]
        d2a[:, XY] = r * dz[:, 0] * dz[:, 1] + s * d2z[:, XY]
    raise AssertionError("unreachable")


def forward_jet(net: Mlp, point: ArrayLike) -> JetEval:
    jet, _ = forward_jet_batch(net, point)
    return jet[0]


def _tanh_backward(
    rec: _TanhRecord, g_a: FloatArray, g_da: FloatArray, g_d2a: FloatArray
) -> tuple[FloatArray, FloatArray, FloatArray]:
    t, s, r, dz, d2z = rec.t, rec.s, rec.r, rec.dz, rec.d2z
    g_d2z = s[:, None, :] * g_d2a
    g_dz = s[:, None, :] * g_da
    g_dz[:, 0] += r * (2.0 * g_d2a[:, XX] * dz[:, 0] + g_d2a[:, XY] * dz[:, 1])
    g_dz[:, 1] += r * (2.0 * g_d2a[:, YY] * dz[:, 1] + g_d2a[:, XY] * dz[:, 0])
    g_s = np.sum(g_da * dz, axis=1) + np.sum(g_d2a * d2z, axis=1)
    g_r = g_d2a[:, XX] * dz[:, 0] ** 2 + g_d2a[:, YY] * dz[:, 1] ** 2 + g_d2a[:, XY] * dz[:, 0] * dz[:, 1]
    # s = 1 - t^2 and r = -2t + 2t^3
    g_t = g_a - 2.0 * t * g_s + (6.0 * t * t - 2.0) * g_r
    return g_t * s, g_dz, g_d2z


def jet_backward(net: Mlp, tape: JetTape, cotangent: JetBatch) -> ParamGrad:
    """Reverse accumulation of a :class:`JetBatch` cotangent into parameter gradients."""
    if len(cotangent) != tape.points.shape[0]:
        raise InvalidConfigError("cotangent and tape cover different batches")
    g_z = cotangent.value[:, None]
    g_dz = cotangent.grad[:, :, None]
    g_d2z = cotangent.hess[:, :, None]
    weights: list[FloatArray] = [np.empty(0)] * len(net.layers)
    biases: list[FloatArray] = [np.empty(0)] * len(net.layers)
    for index in reversed(range(len(net.layers))):
        layer, rec = net.layers[index], tape.records[index]
        if rec.activation is not None:
            g_z, g_dz, g_d2z = _tanh_backward(rec.activation, g_z, g_dz, g_d2z)
        weights[index] = g_z.T @ rec.a + _contract(g_dz, rec.da) + _contract(g_d2z, rec.d2a)
        biases[index] = g_z.sum(axis=0)
        if index:
            g_z = g_z @ layer.weight
            g_dz = _affine(g_dz, layer.weight)
            g_d2z = _affine(g_d2z, layer.weight)
    return ParamGrad(weights=weights, biases=biases)


def loss_backward(
    net: Mlp, points: ArrayLike, loss: Callable[[JetBatch], JetLoss], *, group: str | None = None
) -> tuple[float, ParamGrad]:
    """
    Evaluate ``loss`` on the jets of ``net`` at ``points`` and return it with its exact
    parameter gradient, including the paths through the spatial derivatives.
    """
    jet, tape = forward_jet_batch(net, points)
    result = loss(jet)
    if not np.isfinite(result.value):
        raise DivergenceError("loss is not finite", group=group, diagnostics={"loss": result.value})
    grad = jet_backward(net, tape, result.cotangent)
    grad.alpha = result.alpha_grad
    return float(result.value), grad
