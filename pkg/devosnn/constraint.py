"""Per-synapse boundary constraint with adaptive expansion and contraction.

Each synapse owns a positive boundary ``r_pos`` and a negative boundary
``r_neg``. Once per epoch, weights outside the interval are clamped onto it
and three streak counters are advanced:

* ``n_pos``/``c_pos`` - consecutive epochs above ``r_pos`` and the summed excess
* ``n_neg``/``c_neg`` - the same below ``r_neg``
* ``n_decay``         - consecutive epochs in which ``|w|`` shrank

A streak longer than ``t_num`` expands the boundary by the mean excess
(``c / t_num``) or, for decay, contracts both boundaries by ``epsilon``.
Counters restart from zero after every boundary update.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from devosnn.mask import StructureMask
from devosnn.network import Parameters

log = logging.getLogger(__name__)


@dataclass
class ConstraintConfig:
    t_num: int = 18
    epsilon: float = 0.75


@dataclass
class SynapseBounds:
    r_pos: list[np.ndarray]
    r_neg: list[np.ndarray]
    n_pos: list[np.ndarray]
    n_neg: list[np.ndarray]
    n_decay: list[np.ndarray]
    c_pos: list[np.ndarray]
    c_neg: list[np.ndarray]

    FIELDS = ("r_pos", "r_neg", "n_pos", "n_neg", "n_decay", "c_pos", "c_neg")

    def __len__(self) -> int:
        return len(self.r_pos)

    def copy(self) -> SynapseBounds:
        return SynapseBounds(**{name: [a.copy() for a in getattr(self, name)] for name in self.FIELDS})


def init_boundaries(params: Parameters) -> SynapseBounds:
    """Every synapse of a layer starts at (max|W|, -max|W|) taken over that layer."""
    r_pos: list[np.ndarray] = []
    r_neg: list[np.ndarray] = []
    for w in params.weights:
        peak = float(np.abs(w).max()) if w.size else 0.0
        r_pos.append(np.full(w.shape, peak))
        r_neg.append(np.full(w.shape, -peak))
    return SynapseBounds(
        r_pos=r_pos,
        r_neg=r_neg,
        n_pos=[np.zeros(w.shape, dtype=np.int64) for w in params.weights],
        n_neg=[np.zeros(w.shape, dtype=np.int64) for w in params.weights],
        n_decay=[np.zeros(w.shape, dtype=np.int64) for w in params.weights],
        c_pos=[np.zeros(w.shape) for w in params.weights],
        c_neg=[np.zeros(w.shape) for w in params.weights],
    )


def apply_constraint(
    w_curr: Parameters,
    w_prev: Parameters,
    bounds: SynapseBounds,
    cfg: ConstraintConfig,
    mask: StructureMask | None = None,
) -> tuple[Parameters, SynapseBounds]:
    """Clamp weights onto their boundaries and adapt the boundaries.

    ``w_prev`` holds last epoch's clamped weights. The decay streak compares
    the pre-clamp current weights with them. With a ``mask``, dead synapses
    are left untouched (weights, boundaries and counters).
    """
    if not (len(w_curr) == len(w_prev) == len(bounds)):
        raise ValueError(
            f"layer count mismatch: current {len(w_curr)}, previous {len(w_prev)}, bounds {len(bounds)}"
        )
    out = bounds.copy()
    weights: list[np.ndarray] = []
    clamped = expanded = contracted = 0

    for i, (w0, prev) in enumerate(zip(w_curr.weights, w_prev.weights)):
        if w0.shape != prev.shape or w0.shape != bounds.r_pos[i].shape:
            raise ValueError(f"weighted layer {i}: shape mismatch between weights and bounds")
        live = mask.syn_alive[i] if mask is not None else np.ones(w0.shape, dtype=bool)
        rp, rn = out.r_pos[i], out.r_neg[i]
        n_pos, n_neg, n_decay = out.n_pos[i], out.n_neg[i], out.n_decay[i]
        c_pos, c_neg = out.c_pos[i], out.c_neg[i]
        w = w0.copy()

        above = live & (w > rp)
        c_pos[above] += w[above] - rp[above]
        n_pos[above] += 1
        w[above] = rp[above]
        n_pos[live & ~above] = 0
        c_pos[live & ~above] = 0.0

        below = live & (w < rn)
        c_neg[below] += rn[below] - w[below]
        n_neg[below] += 1
        w[below] = rn[below]
        n_neg[live & ~below] = 0
        c_neg[live & ~below] = 0.0

        decay = live & (np.abs(w0) < np.abs(prev))
        n_decay[decay] += 1
        n_decay[live & ~decay] = 0

        grow = live & (n_pos > cfg.t_num)
        rp[grow] += c_pos[grow] / cfg.t_num
        n_pos[grow] = 0
        c_pos[grow] = 0.0

        sink = live & (n_neg > cfg.t_num)
        rn[sink] -= c_neg[sink] / cfg.t_num
        n_neg[sink] = 0
        c_neg[sink] = 0.0

        shrink = live & (n_decay > cfg.t_num)
        rp[shrink] *= cfg.epsilon
        rn[shrink] *= cfg.epsilon
        n_decay[shrink] = 0

        # weights stay inside the boundaries they are returned with
        w[live] = np.clip(w[live], rn[live], rp[live])

        weights.append(w)
        clamped += int(above.sum() + below.sum())
        expanded += int(grow.sum() + sink.sum())
        contracted += int(shrink.sum())

    log.debug("constraint: clamped=%d expanded=%d contracted=%d", clamped, expanded, contracted)
    return Parameters(weights, [b.copy() for b in w_curr.biases]), out


def synapse_range(bounds: SynapseBounds) -> list[np.ndarray]:
    """Boundary width r_pos - r_neg of every synapse."""
    return [rp - rn for rp, rn in zip(bounds.r_pos, bounds.r_neg)]
