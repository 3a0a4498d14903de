"""Per-layer structure report of a trained network."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from rich.table import Table

from devosnn.constraint import SynapseBounds
from devosnn.mask import StructureMask
from devosnn.pruning import neuron_importance


@dataclass
class LayerReport:
    layer: int
    importance: np.ndarray      # D per unit
    alive_synapses: np.ndarray  # alive incoming synapses per unit
    alive: np.ndarray           # unit flags
    revived: np.ndarray         # revived incoming synapses per unit
    fan_in: int

    @property
    def units(self) -> int:
        return int(self.alive.size)

    @property
    def pruned_units(self) -> int:
        return int((~self.alive).sum())

    @property
    def pruned_pct(self) -> float:
        return 100.0 * self.pruned_units / self.units if self.units else 0.0

    @property
    def regrown_units(self) -> np.ndarray:
        """Alive units whose every alive synapse was regenerated, i.e. units that came back from pruning."""
        return self.alive & (self.revived > 0) & (self.revived == self.alive_synapses)

    @property
    def regenerated_synapses(self) -> int:
        return int(self.revived[self.regrown_units].sum())

    @property
    def regenerated_pct(self) -> float:
        total = self.units * self.fan_in
        return 100.0 * self.regenerated_synapses / total if total else 0.0


def structure_report(bounds: SynapseBounds, mask: StructureMask, layer: int) -> LayerReport:
    if not 0 <= layer < len(mask):
        raise ValueError(f"layer must lie in [0, {len(mask)}), got {layer}")
    rows = mask.unit_rows(layer)
    revived = mask.syn_revived[layer].reshape(rows.shape)
    return LayerReport(
        layer=layer,
        importance=neuron_importance(bounds, mask, layer),
        alive_synapses=rows.sum(axis=1),
        alive=mask.unit_alive[layer].copy(),
        revived=revived.sum(axis=1),
        fan_in=int(rows.shape[1]),
    )


def report_table(report: LayerReport, limit: int = 40) -> Table:
    """Units sorted by importance, least important first."""
    table = Table(title=f"Weighted layer {report.layer}: {report.units} units, fan-in {report.fan_in}")
    for column in ("unit", "D", "alive syn.", "revived syn.", "state"):
        table.add_column(column, justify="right")
    regrown = report.regrown_units
    for unit in np.argsort(report.importance, kind="stable")[:limit]:
        state = "regrown" if regrown[unit] else "alive" if report.alive[unit] else "pruned"
        table.add_row(
            str(unit), f"{report.importance[unit]:.4f}", str(report.alive_synapses[unit]),
            str(report.revived[unit]), state,
        )
    return table
