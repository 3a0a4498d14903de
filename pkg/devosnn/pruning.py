"""Importance scoring, adaptive pruning rates and structured unit pruning."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from devosnn.constraint import SynapseBounds, synapse_range
from devosnn.mask import StructureMask
from devosnn.network import Parameters

log = logging.getLogger(__name__)


class LayerCollapseError(RuntimeError):
    """Raised when a rate update finds the next layer without alive units."""


@dataclass
class PruneSchedule:
    rho_conv: float = 10.0   # percent of original conv channels to be dead
    rho_fc: float = 35.0     # percent of original fc neurons to be dead
    alpha: float = 1.0
    beta: float = 0.00075
    start_epoch: int = 36
    mid_epoch: int = 60
    rho_cap: float = 95.0
    per_layer: bool = False
    layer_rates: dict[int, float] = field(default_factory=dict)

    def rate_for(self, index: int, kind: str) -> float:
        """Current target rate (percent) of weighted layer ``index``."""
        if self.per_layer and index in self.layer_rates:
            return self.layer_rates[index]
        return self.rho_conv if kind == "conv" else self.rho_fc


def prunable_layers(kinds: Sequence[str]) -> list[int]:
    """Every weighted layer except the readout."""
    return list(range(len(kinds) - 1))


def neuron_importance(bounds: SynapseBounds, mask: StructureMask, index: int) -> np.ndarray:
    """D of every unit of weighted layer ``index``: summed Range of its alive incoming synapses."""
    ranges = synapse_range(bounds)[index]
    alive = mask.syn_alive[index]
    rows = np.where(alive, ranges, 0.0).reshape(ranges.shape[0], -1)
    return rows.sum(axis=1)


def delta_schedule(epoch: int, sched: PruneSchedule) -> float:
    """Fast-then-slow rate increment: alpha*exp(-(epoch-START)) up to MID, beta after."""
    if epoch < sched.start_epoch:
        raise ValueError(f"delta_schedule: epoch {epoch} is before the pruning start {sched.start_epoch}")
    if epoch <= sched.mid_epoch:
        return sched.alpha * math.exp(-(epoch - sched.start_epoch))
    return sched.beta


def update_prune_rates(
    sched: PruneSchedule,
    epoch: int,
    alive_counts: Sequence[int],
    kinds: Sequence[str],
) -> PruneSchedule:
    """Grow each rate by delta * N^l / N^(l+1), capped at ``rho_cap``.

    Shared mode updates rho_conv and rho_fc from the deepest prunable layer of
    that kind; per-layer mode updates every prunable layer from its own ratio.
    """
    if len(alive_counts) != len(kinds):
        raise ValueError(f"got {len(alive_counts)} alive counts for {len(kinds)} weighted layers")
    delta = delta_schedule(epoch, sched)

    def increment(index: int) -> float:
        following = alive_counts[index + 1]
        if following == 0:
            raise LayerCollapseError(
                f"weighted layer {index + 1} has no alive units; cannot update the rate of layer {index}"
            )
        return delta * alive_counts[index] / following

    layers = prunable_layers(kinds)
    if sched.per_layer:
        rates = dict(sched.layer_rates)
        for i in layers:
            current = rates.get(i, sched.rate_for(i, kinds[i]))
            rates[i] = min(current + increment(i), sched.rho_cap)
        return dataclasses.replace(sched, layer_rates=rates)

    updates: dict[str, float] = {}
    for kind, name in (("conv", "rho_conv"), ("fc", "rho_fc")):
        of_kind = [i for i in layers if kinds[i] == kind]
        if of_kind:
            deepest = of_kind[-1]
            updates[name] = min(getattr(sched, name) + increment(deepest), sched.rho_cap)
    return dataclasses.replace(sched, **updates)


def prune_step(
    importance: Sequence[np.ndarray],
    mask: StructureMask,
    sched: PruneSchedule,
    kinds: Sequence[str],
) -> StructureMask:
    """Kill the least important alive units until each layer meets its target.

    The target dead count is floor(rate% of the layer's original units),
    capped so at least one unit stays alive. Ties in D go to the lower index.
    The readout layer is never pruned.
    """
    out = mask.copy()
    for i in prunable_layers(kinds):
        alive = out.unit_alive[i]
        original = alive.size
        target = math.floor(sched.rate_for(i, kinds[i]) * original / 100.0)
        if target > original - 1:
            log.warning(
                "layer %d: pruning target %d of %d units clamped to keep one unit alive", i, target, original
            )
            target = original - 1
        shortfall = target - (original - int(alive.sum()))
        if shortfall <= 0:
            continue
        candidates = np.flatnonzero(alive)
        order = candidates[np.argsort(importance[i][candidates], kind="stable")]
        victims = order[:shortfall]
        out.kill_units(i, victims)
        log.debug("layer %d: pruned units %s", i, victims.tolist())
    return out


def compression_rate(mask: StructureMask, params: Parameters | None = None) -> float:
    """Percent of conv/fc synapses that are dead (biases excluded)."""
    if params is not None and len(params.weights) != len(mask):
        raise ValueError(f"mask has {len(mask)} layers, parameters have {len(params.weights)}")
    total = mask.total_synapse_count()
    if total == 0:
        return 0.0
    return 100.0 * mask.dead_synapse_count() / total
