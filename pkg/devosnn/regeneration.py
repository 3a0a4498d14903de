"""Gradient-triggered revival of dead synapses with a growing regeneration rate."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from devosnn.mask import StructureMask
from devosnn.network import Gradients

log = logging.getLogger(__name__)

RHO_G_CAP = 99.0


@dataclass
class RegenState:
    rho_g: float = 1.0     # percent of the network's gradients considered "top"
    gamma: float = 1.1
    t_num: int = 18
    t_g: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def initial(cls, mask: StructureMask, rho_g: float = 1.0, gamma: float = 1.1, t_num: int = 18) -> RegenState:
        return cls(rho_g=rho_g, gamma=gamma, t_num=t_num,
                   t_g=[np.zeros(s.shape, dtype=np.int64) for s in mask.syn_alive])

    def copy(self) -> RegenState:
        return dataclasses.replace(self, t_g=[t.copy() for t in self.t_g])


def update_regen_rate(state: RegenState, epoch: int, start_epoch: int) -> RegenState:
    """rho_g += gamma^(epoch - START), held at 99%."""
    if epoch <= start_epoch:
        raise ValueError(f"update_regen_rate: epoch {epoch} must be after the pruning start {start_epoch}")
    rho_g = min(state.rho_g + state.gamma ** (epoch - start_epoch), RHO_G_CAP)
    return dataclasses.replace(state, rho_g=rho_g)


def gradient_threshold(grads: Gradients, rho_g: float) -> float:
    """The (100 - rho_g) percentile of |gradient| pooled over every synapse."""
    pooled = np.concatenate([np.abs(g).ravel() for g in grads.weights])
    if pooled.size == 0:
        return float("inf")
    return float(np.percentile(pooled, 100.0 - rho_g))


def regenerate_step(
    grads: Gradients,
    mask: StructureMask,
    state: RegenState,
) -> tuple[StructureMask, RegenState]:
    """Advance the hit streak of every dead synapse and revive long streaks.

    A dead synapse scores a hit when its |gradient| is nonzero and reaches the
    network-wide top-rho_g threshold; a miss resets its streak. Synapses whose
    streak exceeds ``t_num`` come back alive (their weight is still 0) and
    their unit is alive again.
    """
    if len(grads.weights) != len(mask):
        raise ValueError(f"gradient has {len(grads.weights)} layers, mask has {len(mask)}")
    if mask.dead_synapse_count() == 0:
        return mask.copy(), dataclasses.replace(state, t_g=[np.zeros_like(t) for t in state.t_g])

    threshold = gradient_threshold(grads, state.rho_g)
    out = mask.copy()
    streaks: list[np.ndarray] = []
    revived_total = 0
    for i, g in enumerate(grads.weights):
        dead = ~out.syn_alive[i]
        magnitude = np.abs(g)
        hit = dead & (magnitude > 0.0) & (magnitude >= threshold)
        t_g = np.where(hit, state.t_g[i] + 1, 0)
        revive = dead & (t_g > state.t_num)
        if revive.any():
            out.syn_alive[i] |= revive
            out.syn_revived[i] |= revive
            out.unit_alive[i] |= revive.reshape(revive.shape[0], -1).any(axis=1)
            t_g[revive] = 0
            revived_total += int(revive.sum())
        streaks.append(t_g)

    log.debug("regeneration: threshold=%.3e rho_g=%.2f revived=%d", threshold, state.rho_g, revived_total)
    return out, dataclasses.replace(state, t_g=streaks)
