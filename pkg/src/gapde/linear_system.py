"""Translate a genome and a meta-dataset into ``U_T = Theta zeta``."""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .errors import StructuralError
from .genome import Genome


@dataclass
class LinearSystem:
    target: np.ndarray
    design: np.ndarray

    def __post_init__(self):
        if self.design.ndim != 2 or self.design.shape[0] != self.target.shape[0]:
            raise StructuralError("design must have one row per target entry")

    @property
    def n_rows(self):
        return self.design.shape[0]

    @property
    def n_cols(self):
        return self.design.shape[1]


def evaluate_module(module, jet) -> float:
    """Product over genes of the matching derivative in ``jet`` (u, u_x, ...)."""
    jet = np.asarray(jet, dtype=float)
    value = 1.0
    for gene in module:
        if gene >= jet.shape[0]:
            raise StructuralError(
                f"gene order {gene} exceeds available derivative order {jet.shape[0] - 1}"
            )
        value *= jet[gene]
    return float(value)


class ModuleColumnCache:
    """Design-matrix columns keyed by canonical module.

    Lookups are lock-free; insertion takes a lock so each key is computed
    into the cache at most once.
    """

    def __init__(self, spatial: np.ndarray):
        self.spatial = spatial
        self._columns = {}
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._columns)

    def column(self, module) -> np.ndarray:
        key = tuple(sorted(module))
        col = self._columns.get(key)
        if col is not None:
            return col
        with self._lock:
            col = self._columns.get(key)
            if col is None:
                col = module_column(key, self.spatial)
                col.setflags(write=False)
                self._columns[key] = col
        return col


def module_column(module, spatial: np.ndarray) -> np.ndarray:
    max_order = spatial.shape[1] - 1
    if any(g > max_order for g in module):
        raise StructuralError(
            f"module {list(module)} needs derivative order {max(module)}, "
            f"data provides up to {max_order}"
        )
    col = np.ones(spatial.shape[0])
    for gene in module:
        col = col * spatial[:, gene]
    return col


def target_column(data, order: int) -> np.ndarray:
    if order > data.max_temporal_order:
        raise StructuralError(
            f"lhs order {order} exceeds available temporal order {data.max_temporal_order}"
        )
    return data.temporal[:, order]


def build_system(g: Genome, data, cache: ModuleColumnCache | None = None) -> LinearSystem:
    """Stack the lhs derivative and one column per rhs module."""
    target = target_column(data, g.lhs)
    if cache is None:
        cols = [module_column(m, data.spatial) for m in g.rhs]
    else:
        cols = [cache.column(m) for m in g.rhs]
    return LinearSystem(target, np.column_stack(cols))
