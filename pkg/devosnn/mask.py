"""Structure mask: per-unit and per-synapse alive flags for every weighted layer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from devosnn.spec import NetworkSpec


@dataclass
class StructureMask:
    unit_alive: list[np.ndarray]   # bool (units,)
    syn_alive: list[np.ndarray]    # bool, weight-shaped; axis 0 is the owning unit
    syn_revived: list[np.ndarray]  # bool, weight-shaped; set on revival, cleared on death

    @classmethod
    def full(cls, spec: NetworkSpec) -> StructureMask:
        shapes = spec.weight_shapes()
        return cls(
            unit_alive=[np.ones(s[0], dtype=bool) for s in shapes],
            syn_alive=[np.ones(s, dtype=bool) for s in shapes],
            syn_revived=[np.zeros(s, dtype=bool) for s in shapes],
        )

    def __len__(self) -> int:
        return len(self.syn_alive)

    def copy(self) -> StructureMask:
        return StructureMask(
            unit_alive=[u.copy() for u in self.unit_alive],
            syn_alive=[s.copy() for s in self.syn_alive],
            syn_revived=[r.copy() for r in self.syn_revived],
        )

    def unit_rows(self, index: int) -> np.ndarray:
        """Synapse flags of layer ``index`` as (units, fan_in)."""
        syn = self.syn_alive[index]
        return syn.reshape(syn.shape[0], -1)

    def alive_synapses_per_unit(self, index: int) -> np.ndarray:
        return self.unit_rows(index).sum(axis=1)

    def live_units(self) -> list[np.ndarray]:
        """Alive units that keep at least one alive incoming synapse; the others are treated as dead."""
        return [u & s.reshape(s.shape[0], -1).any(axis=1) for u, s in zip(self.unit_alive, self.syn_alive)]

    def alive_unit_counts(self) -> list[int]:
        return [int(u.sum()) for u in self.unit_alive]

    def dead_synapse_count(self) -> int:
        return int(sum(s.size - int(s.sum()) for s in self.syn_alive))

    def total_synapse_count(self) -> int:
        return int(sum(s.size for s in self.syn_alive))

    def kill_units(self, index: int, units: np.ndarray) -> None:
        """Mark units dead together with all their incoming synapses."""
        self.unit_alive[index][units] = False
        self.syn_alive[index][units] = False
        self.syn_revived[index][units] = False

    def equals(self, other: StructureMask) -> bool:
        pairs = zip(
            self.unit_alive + self.syn_alive + self.syn_revived,
            other.unit_alive + other.syn_alive + other.syn_revived,
        )
        return len(self) == len(other) and all(np.array_equal(a, b) for a, b in pairs)
