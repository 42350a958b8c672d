"""Structure-of-arrays storage of the tissue state."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .base import CellModel


@dataclass
class ModelGroup:
    """All nodes sharing one cell model; ``S`` has one row per node."""

    model: CellModel
    nodes: np.ndarray
    S: np.ndarray


@dataclass
class NodeStateArray:
    V: np.ndarray
    groups: list[ModelGroup]
    last_dvdt: np.ndarray
    t: float = 0.0

    @property
    def n_nodes(self) -> int:
        return int(self.V.shape[0])

    @classmethod
    def at_rest(cls, node_models: Mapping[str, CellModel], node_tags: np.ndarray) -> "NodeStateArray":
        """Every node starts from its model's rest state; ``node_models`` maps tag -> model."""
        tags = np.asarray(node_tags).astype(str)
        missing = sorted(set(tags) - set(node_models))
        if missing:
            raise KeyError(f"no cell model assigned to node tag(s) {missing}")
        V = np.empty(tags.size)
        by_name: dict[str, tuple[CellModel, list[np.ndarray]]] = {}
        for tag in sorted(set(tags)):
            model = node_models[tag]
            nodes = np.flatnonzero(tags == tag)
            by_name.setdefault(model.name, (model, []))[1].append(nodes)
        groups = []
        for name in sorted(by_name):
            model, parts = by_name[name]
            nodes = np.sort(np.concatenate(parts)).astype(np.int64)
            V[nodes] = model.rest_v
            S = np.ascontiguousarray(np.tile(model.rest_state, (nodes.size, 1)))
            groups.append(ModelGroup(model, nodes, S))
        return cls(V, groups, np.zeros(tags.size), 0.0)

    def check(self) -> None:
        seen = np.zeros(self.n_nodes, dtype=np.int64)
        for g in self.groups:
            if g.S.shape != (g.nodes.size, g.model.n_states):
                raise ValueError(f"group {g.model.name}: state block shape {g.S.shape} is inconsistent")
            seen[g.nodes] += 1
        if np.any(seen != 1):
            raise ValueError("every node must belong to exactly one model group")
        if self.last_dvdt.shape != self.V.shape:
            raise ValueError("last_dvdt must have one entry per node")

    def copy(self) -> "NodeStateArray":
        return NodeStateArray(self.V.copy(),
                              [ModelGroup(g.model, g.nodes.copy(), g.S.copy()) for g in self.groups],
                              self.last_dvdt.copy(), self.t)

    def save(self, path: str | Path) -> None:
        arrays = {"V": self.V, "last_dvdt": self.last_dvdt, "t": np.array(self.t)}
        names = []
        for i, g in enumerate(self.groups):
            arrays[f"nodes_{i}"] = g.nodes
            arrays[f"S_{i}"] = g.S
            names.append(g.model.name)
        arrays["models"] = np.array(names)
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path: str | Path, models: Mapping[str, CellModel]) -> "NodeStateArray":
        """Reload a saved state; ``models`` maps model name -> CellModel."""
        with np.load(path) as data:
            groups = [ModelGroup(models[str(name)], data[f"nodes_{i}"], data[f"S_{i}"])
                      for i, name in enumerate(data["models"])]
            return cls(data["V"], groups, data["last_dvdt"], float(data["t"]))
