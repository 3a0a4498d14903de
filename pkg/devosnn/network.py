"""Time-unrolled LIF network: forward pass and surrogate-gradient BPTT.

Layer dynamics for conv/fc layers (all but the readout)::

    U[t] = tau * U[t-1] * (1 - X[t-1]) + W @ X_in[t] + B
    X[t] = 1 if U[t] >= v_th else 0

The readout layer integrates the same way but never fires or resets; the
logits are the mean of its membrane potential over the time window.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from devosnn.mask import StructureMask
from devosnn.ops import (
    avgpool2d,
    avgpool2d_backward,
    conv2d,
    conv2d_backward,
    maxpool2d,
    maxpool2d_backward,
)
from devosnn.spec import POOL_KINDS, LayerSpec, NetworkSpec

log = logging.getLogger(__name__)


class ContractError(ValueError):
    """Raised when arrays handed to the network violate its shape/value contract."""


@dataclass
class Parameters:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __len__(self) -> int:
        return len(self.weights)

    def copy(self) -> Parameters:
        return Parameters([w.copy() for w in self.weights], [b.copy() for b in self.biases])


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def zeros_like(cls, params: Parameters) -> Gradients:
        return cls([np.zeros_like(w) for w in params.weights], [np.zeros_like(b) for b in params.biases])

    def all_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.weights + self.biases)


@dataclass
class Model:
    spec: NetworkSpec
    params: Parameters
    mask: StructureMask


@dataclass
class LayerTrace:
    kind: str
    inputs: np.ndarray              # (T, B, ...) what the layer received
    potentials: np.ndarray | None   # (T, B, ...) membrane potentials; None for pools
    outputs: np.ndarray             # spikes, pooled maps, or readout potentials


@dataclass
class LifState:
    layers: list[LayerTrace]

    @property
    def spike_rate(self) -> float:
        """Mean firing probability over every spiking unit, sample and step."""
        spiking = [t.outputs for t in self.layers[:-1] if t.potentials is not None]
        total = sum(s.size for s in spiking)
        if total == 0:
            return 0.0
        return float(sum(s.sum() for s in spiking) / total)


def init_parameters(spec: NetworkSpec, rng: np.random.Generator) -> Parameters:
    """Uniform fan-in initialization: every entry drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
    weights: list[np.ndarray] = []
    biases: list[np.ndarray] = []
    for shape in spec.weight_shapes():
        fan_in = int(np.prod(shape[1:]))
        bound = np.sqrt(1.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=shape))
        biases.append(rng.uniform(-bound, bound, size=shape[0]))
    return Parameters(weights, biases)


def apply_mask(params: Parameters, mask: StructureMask) -> Parameters:
    """Return parameters with dead synapses and biases of dead units set to exactly 0.

    A unit with no alive incoming synapse counts as dead here even if its flag is still set.
    """
    return Parameters(
        [np.where(alive, w, 0.0) for w, alive in zip(params.weights, mask.syn_alive)],
        [np.where(alive, b, 0.0) for b, alive in zip(params.biases, mask.live_units())],
    )


def check_shapes(spec: NetworkSpec, params: Parameters, mask: StructureMask) -> None:
    shapes = spec.weight_shapes()
    if not (len(params.weights) == len(params.biases) == len(mask) == len(shapes)):
        raise ContractError(
            f"expected {len(shapes)} weighted layers, got {len(params.weights)} weights, "
            f"{len(params.biases)} biases, {len(mask)} mask layers"
        )
    for i, shape in enumerate(shapes):
        if params.weights[i].shape != shape or mask.syn_alive[i].shape != shape:
            raise ContractError(
                f"weighted layer {i}: expected shape {shape}, got weights {params.weights[i].shape} "
                f"and mask {mask.syn_alive[i].shape}"
            )
        if params.biases[i].shape != (shape[0],) or mask.unit_alive[i].shape != (shape[0],):
            raise ContractError(f"weighted layer {i}: bias/unit mask must have shape ({shape[0]},)")


def _is_binary(x: np.ndarray) -> bool:
    return bool(np.all((x == 0.0) | (x == 1.0)))


def lif_step(
    u_prev: np.ndarray,
    x_prev: np.ndarray,
    input_current: np.ndarray,
    spec: NetworkSpec,
) -> tuple[np.ndarray, np.ndarray]:
    """One LIF update; ``input_current`` already includes the bias."""
    u_prev = np.asarray(u_prev, dtype=np.float64)
    x_prev = np.asarray(x_prev, dtype=np.float64)
    input_current = np.asarray(input_current, dtype=np.float64)
    if not (u_prev.shape == x_prev.shape == input_current.shape):
        raise ContractError(
            f"lif_step shape mismatch: u_prev {u_prev.shape}, x_prev {x_prev.shape}, "
            f"input {input_current.shape}"
        )
    if not _is_binary(x_prev):
        raise ContractError("lif_step: previous spikes must be binary")
    u = spec.tau * u_prev * (1.0 - x_prev) + input_current
    x = (u >= spec.v_th).astype(np.float64)
    return u, x


def spike_surrogate_grad(u: np.ndarray, spec: NetworkSpec) -> np.ndarray:
    """Rectangular surrogate of dX/dU: 1/a inside |U - v_th| < a/2, else 0."""
    inside = np.abs(np.asarray(u, dtype=np.float64) - spec.v_th) < spec.a / 2.0
    return inside * (1.0 / spec.a)


def _input_current(layer: LayerSpec, x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    t, b = x.shape[:2]
    if layer.kind == "conv":
        flat = x.reshape((t * b,) + x.shape[2:])
        out = conv2d(flat, weight, layer.stride, layer.padding) + bias[None, :, None, None]
        return out.reshape((t, b) + out.shape[1:])
    return x.reshape(t, b, -1) @ weight.T + bias


def _current_backward(
    layer: LayerSpec,
    inputs: np.ndarray,
    weight: np.ndarray,
    grad_current: np.ndarray,
    need_input_grad: bool,
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    t, b = inputs.shape[:2]
    if layer.kind == "conv":
        flat_g = grad_current.reshape((t * b,) + grad_current.shape[2:])
        flat_in = inputs.reshape((t * b,) + inputs.shape[2:])
        grad_in, grad_w = conv2d_backward(flat_g, flat_in, weight, layer.stride, layer.padding, need_input_grad)
        grad_b = flat_g.sum(axis=(0, 2, 3))
        if grad_in is not None:
            grad_in = grad_in.reshape(inputs.shape)
        return grad_w, grad_b, grad_in
    flat_g = grad_current.reshape(t * b, -1)
    flat_in = inputs.reshape(t * b, -1)
    grad_w = flat_g.T @ flat_in
    grad_b = flat_g.sum(axis=0)
    grad_in = (flat_g @ weight).reshape(inputs.shape) if need_input_grad else None
    return grad_w, grad_b, grad_in


def _silent_units(weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Units whose effective input current is identically zero."""
    rows = weight.reshape(weight.shape[0], -1)
    return ~rows.any(axis=1) & (bias == 0.0)


def forward_pass(
    spec: NetworkSpec,
    params: Parameters,
    mask: StructureMask,
    batch: np.ndarray,
) -> tuple[LifState, np.ndarray]:
    """Run the network over a (batch, T, C, H, W) input; return traces and logits."""
    batch = np.asarray(batch, dtype=np.float64)
    expected = (spec.time_steps,) + tuple(spec.input_shape)
    if batch.ndim != 5 or batch.shape[1:] != expected:
        raise ContractError(f"batch must have shape (B, {', '.join(map(str, expected))}), got {batch.shape}")
    check_shapes(spec, params, mask)
    eff = apply_mask(params, mask)

    x = np.ascontiguousarray(batch.swapaxes(0, 1))
    steps, size = x.shape[:2]
    traces: list[LayerTrace] = []
    last = len(spec.layers) - 1
    wi = 0
    logits = np.zeros((size, spec.class_count))

    for li, layer in enumerate(spec.layers):
        if layer.kind in POOL_KINDS:
            if not _is_binary(x):
                raise ContractError(f"layer {li} ({layer.token()}): pool input must be binary spikes")
            flat = x.reshape((steps * size,) + x.shape[2:])
            pooled = (avgpool2d if layer.kind == "avgpool" else maxpool2d)(flat, layer.window, layer.stride)
            out = pooled.reshape((steps, size) + pooled.shape[1:])
            traces.append(LayerTrace(layer.kind, x, None, out))
            x = out
            continue

        current = _input_current(layer, x, eff.weights[wi], eff.biases[wi])
        wi += 1
        potentials = np.empty_like(current)
        if li == last:
            acc = np.zeros(current.shape[1:])
            for t in range(steps):
                acc = spec.tau * acc + current[t]
                potentials[t] = acc
            traces.append(LayerTrace(layer.kind, x, potentials, potentials))
            logits = potentials.mean(axis=0)
            break

        spikes = np.empty_like(current)
        u = np.zeros(current.shape[1:])
        s = np.zeros(current.shape[1:])
        for t in range(steps):
            u, s = lif_step(u, s, current[t], spec)
            potentials[t] = u
            spikes[t] = s
        traces.append(LayerTrace(layer.kind, x, potentials, spikes))
        x = spikes

    return LifState(traces), logits


def backward_pass(
    spec: NetworkSpec,
    states: LifState,
    params: Parameters,
    mask: StructureMask,
    loss_grad: np.ndarray,
) -> Gradients:
    """BPTT through the LIF recurrence using the rectangular surrogate.

    Gradients are produced for every synapse, dead ones included (their
    effective weight is 0). Units whose effective input is identically zero
    are evaluated at the surrogate peak so their incoming synapses get a
    defined gradient; nothing flows from them to any other parameter.
    """
    check_shapes(spec, params, mask)
    if len(states.layers) != len(spec.layers):
        raise ContractError(f"state has {len(states.layers)} layers, network has {len(spec.layers)}")
    eff = apply_mask(params, mask)
    readout = states.layers[-1]
    steps, size = readout.potentials.shape[:2]
    loss_grad = np.asarray(loss_grad, dtype=np.float64)
    if loss_grad.shape != (size, spec.class_count):
        raise ContractError(f"loss_grad must have shape ({size}, {spec.class_count}), got {loss_grad.shape}")

    grad_w: list[np.ndarray] = [np.empty(0)] * len(params)
    grad_b: list[np.ndarray] = [np.empty(0)] * len(params)
    grad_x: np.ndarray | None = None
    last = len(spec.layers) - 1
    wi = len(params) - 1

    for li in range(last, -1, -1):
        layer, trace = spec.layers[li], states.layers[li]
        if trace.kind != layer.kind:
            raise ContractError(f"layer {li}: state kind {trace.kind!r} does not match {layer.kind!r}")

        if layer.kind in POOL_KINDS:
            flat_g = grad_x.reshape((steps * size,) + grad_x.shape[2:])
            flat_in = trace.inputs.reshape((steps * size,) + trace.inputs.shape[2:])
            if layer.kind == "avgpool":
                flat_dx = avgpool2d_backward(flat_g, flat_in.shape, layer.window, layer.stride)
            else:
                flat_dx = maxpool2d_backward(flat_g, flat_in, layer.window, layer.stride)
            grad_x = flat_dx.reshape(trace.inputs.shape)
            continue

        u = trace.potentials
        grad_u = np.empty_like(u)
        carry = np.zeros(u.shape[1:])  # dL/dU[t+1]
        if li == last:
            share = loss_grad / steps
            for t in range(steps - 1, -1, -1):
                carry = share + spec.tau * carry
                grad_u[t] = carry
        else:
            x = trace.outputs
            surrogate = spike_surrogate_grad(u, spec)
            silent = _silent_units(eff.weights[wi], eff.biases[wi])
            if silent.any():
                surrogate[:, :, silent] = 1.0 / spec.a
            for t in range(steps - 1, -1, -1):
                grad_xt = grad_x[t] - carry * spec.tau * u[t]
                carry = grad_xt * surrogate[t] + carry * spec.tau * (1.0 - x[t])
                grad_u[t] = carry

        gw, gb, grad_x = _current_backward(layer, trace.inputs, eff.weights[wi], grad_u, need_input_grad=wi > 0)
        grad_w[wi] = gw
        grad_b[wi] = gb
        wi -= 1

    return Gradients(grad_w, grad_b)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient w.r.t. the logits."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    size = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    rows = np.arange(size)
    loss = float(-log_probs[rows, labels].mean())
    grad = np.exp(log_probs)
    grad[rows, labels] -= 1.0
    return loss, grad / size
