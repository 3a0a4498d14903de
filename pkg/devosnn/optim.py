"""Masked Adam optimizer over explicit state."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from devosnn.mask import StructureMask
from devosnn.network import Gradients, Parameters


class NonFiniteGradientError(RuntimeError):
    """Raised when a gradient contains NaN or Inf."""


@dataclass
class AdamSettings:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class AdamState:
    step: int
    m_w: list[np.ndarray]
    v_w: list[np.ndarray]
    m_b: list[np.ndarray]
    v_b: list[np.ndarray]

    @classmethod
    def zeros_like(cls, params: Parameters) -> AdamState:
        return cls(
            step=0,
            m_w=[np.zeros_like(w) for w in params.weights],
            v_w=[np.zeros_like(w) for w in params.weights],
            m_b=[np.zeros_like(b) for b in params.biases],
            v_b=[np.zeros_like(b) for b in params.biases],
        )

    def reset_synapses(self, index: int, where: np.ndarray) -> None:
        """Clear the moments of the selected synapses of weighted layer ``index``."""
        self.m_w[index][where] = 0.0
        self.v_w[index][where] = 0.0

    def reset_units(self, index: int, where: np.ndarray) -> None:
        self.m_b[index][where] = 0.0
        self.v_b[index][where] = 0.0


def _adam_update(param, grad, alive, m, v, hyper: AdamSettings, step: int):
    g = np.where(alive, grad, 0.0)
    m *= hyper.beta1
    m += (1.0 - hyper.beta1) * g
    v *= hyper.beta2
    v += (1.0 - hyper.beta2) * g * g
    m_hat = m / (1.0 - hyper.beta1 ** step)
    v_hat = v / (1.0 - hyper.beta2 ** step)
    updated = param - hyper.lr * m_hat / (np.sqrt(v_hat) + hyper.eps)
    return np.where(alive, updated, 0.0)


def optimizer_step(
    params: Parameters,
    grads: Gradients,
    mask: StructureMask,
    state: AdamState,
    hyper: AdamSettings,
) -> Parameters:
    """Adam update restricted to alive synapses and biases of alive units.

    Dead entries come out exactly 0 and their moments receive zero gradient.
    ``state`` is advanced in place; the returned parameters are new arrays.
    """
    if len(grads.weights) != len(params.weights):
        raise ValueError(f"gradient has {len(grads.weights)} layers, parameters have {len(params.weights)}")
    for i, (w, g) in enumerate(zip(params.weights, grads.weights)):
        if w.shape != g.shape or params.biases[i].shape != grads.biases[i].shape:
            raise ValueError(f"weighted layer {i}: gradient shape does not match parameters")
    if not grads.all_finite():
        bad = [i for i, g in enumerate(grads.weights) if not np.isfinite(g).all()]
        bad += [i for i, g in enumerate(grads.biases) if not np.isfinite(g).all() and i not in bad]
        raise NonFiniteGradientError(f"non-finite gradient in weighted layer(s) {sorted(bad)} at step {state.step + 1}")

    state.step += 1
    weights = [
        _adam_update(w, g, alive, m, v, hyper, state.step)
        for w, g, alive, m, v in zip(params.weights, grads.weights, mask.syn_alive, state.m_w, state.v_w)
    ]
    biases = [
        _adam_update(b, g, alive, m, v, hyper, state.step)
        for b, g, alive, m, v in zip(params.biases, grads.biases, mask.live_units(), state.m_b, state.v_b)
    ]
    return Parameters(weights, biases)
