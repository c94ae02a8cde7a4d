"""
Adapted processes and random times on a scenario tree.

Processes are stored leaf-expanded as arrays [n_levels, n_leaves] so that
conditional expectations, products and increments are plain numpy
operations. Node views are read through the tree.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .tree import InvalidSpec, LevelMismatch, ScenarioTree, TOL


logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AdaptedProcess:
    """
    A process adapted to the tree filtration.

    Args:
        tree: The scenario tree
        values: Array [n_levels, n_leaves]; row k is constant on level-k nodes
        name: Optional name used in exports and messages

    Raises:
        LevelMismatch: If a row is not measurable at its level
    """
    tree: ScenarioTree
    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        expected = (self.tree.n_levels, self.tree.n_leaves)
        if values.shape != expected:
            raise LevelMismatch(f"process {self.name!r} has shape {values.shape}, "
                                f"expected {expected}")
        for k in range(self.tree.n_levels):
            err = self.tree.measurability_error(values[k], k)
            if err > 1e-9:
                raise LevelMismatch(f"process {self.name!r} is not measurable at level {k} "
                                    f"(deviation {err:.3g})")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def from_nodes(cls, tree: ScenarioTree, node_values: List[List[float]],
                   name: str = "") -> "AdaptedProcess":
        """Build from per-level lists of node values."""
        if len(node_values) != tree.n_levels:
            raise LevelMismatch(f"expected {tree.n_levels} levels of node values")
        rows = []
        for k, row in enumerate(node_values):
            row = np.asarray(row, dtype=float)
            if row.shape != (tree.n_nodes(k),):
                raise LevelMismatch(f"level {k} needs {tree.n_nodes(k)} node values")
            rows.append(tree.expand(row, k))
        return cls(tree, np.array(rows), name)

    @classmethod
    def constant(cls, tree: ScenarioTree, value: float, name: str = "") -> "AdaptedProcess":
        return cls(tree, np.full((tree.n_levels, tree.n_leaves), float(value)), name)

    @classmethod
    def deterministic(cls, tree: ScenarioTree, path: List[float],
                      name: str = "") -> "AdaptedProcess":
        path = np.asarray(path, dtype=float)
        return cls(tree, np.repeat(path[:, None], tree.n_leaves, axis=1), name)

    def at(self, k: int) -> np.ndarray:
        """Node values at level k."""
        return self.tree.node_values(self.values[k], k)

    def leaf(self, k: int) -> np.ndarray:
        return self.values[k]

    def increments(self) -> np.ndarray:
        """Increments with the convention that the level-0 increment is X_0."""
        return np.diff(self.values, axis=0, prepend=0.0)

    def named(self, name: str) -> "AdaptedProcess":
        return AdaptedProcess(self.tree, self.values, name)

    def _wrap(self, values: np.ndarray) -> "AdaptedProcess":
        return AdaptedProcess(self.tree, values, self.name)

    def _other(self, other) -> Union[float, np.ndarray]:
        if isinstance(other, AdaptedProcess):
            if other.tree is not self.tree:
                raise LevelMismatch("processes live on different trees")
            return other.values
        return other

    def __add__(self, other):
        return self._wrap(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.values - self._other(other))

    def __rsub__(self, other):
        return self._wrap(self._other(other) - self.values)

    def __mul__(self, other):
        return self._wrap(self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return self._wrap(-self.values)

    def to_rows(self) -> List[Tuple[int, str, float]]:
        """(level, node, value) rows in level then node order."""
        rows = []
        for k in range(self.tree.n_levels):
            for label, value in zip(self.tree.node_labels[k], self.at(k)):
                rows.append((k, label, float(value)))
        return rows

    def export_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["level", "node", "value"])
            for k, label, value in self.to_rows():
                writer.writerow([k, label, repr(value)])
        logger.debug(f"Exported process {self.name!r} to {path}")
        return path


@dataclass(frozen=True, eq=False)
class RandomTime:
    """
    A random time valued in the grid or infinity.

    Args:
        tree: The scenario tree
        index: Integer array [n_leaves] of u-axis indices (infinity slot for
            infinity)
    """
    tree: ScenarioTree
    index: np.ndarray

    def __post_init__(self):
        index = np.array(self.index, dtype=int)
        grid = self.tree.grid
        if index.shape != (self.tree.n_leaves,):
            raise InvalidSpec(f"random time needs {self.tree.n_leaves} leaf values")
        if np.any(index < 0) or np.any(index > grid.infinity_index):
            raise InvalidSpec("random time values must lie on the grid or at infinity")
        if not grid.has_infinity and np.any(index == grid.infinity_index):
            raise InvalidSpec("random time takes the value infinity on a grid without it")
        index.flags.writeable = False
        object.__setattr__(self, "index", index)

    @classmethod
    def from_mapping(cls, tree: ScenarioTree,
                     mapping: Dict[str, Union[float, str]]) -> "RandomTime":
        """Build from {leaf label: time or 'inf'}."""
        missing = set(tree.leaf_labels) - set(mapping)
        if missing:
            raise InvalidSpec(f"random time undefined on leaves {sorted(missing)}")
        return cls(tree, np.array([tree.grid.index_of(mapping[label])
                                   for label in tree.leaf_labels]))

    @classmethod
    def never(cls, tree: ScenarioTree) -> "RandomTime":
        return cls(tree, np.full(tree.n_leaves, tree.grid.infinity_index))

    @property
    def times(self) -> np.ndarray:
        return self.tree.grid.u_points()[self.index]

    def indicator_le(self, u: int) -> np.ndarray:
        """Leaf indicator of {tau <= u} for a u-axis index."""
        return (self.index <= u).astype(float)

    def indicator_eq(self, u: int) -> np.ndarray:
        return (self.index == u).astype(float)

    def stopped(self, k: int) -> np.ndarray:
        """The map tau∤t_k: tau where tau <= t_k, infinity otherwise."""
        return np.where(self.index <= k, self.index, self.tree.grid.infinity_index)

    def jump_process(self) -> np.ndarray:
        """Raw path family 1{tau <= t_k}, array [n_levels, n_leaves]."""
        return np.array([self.indicator_le(k) for k in range(self.tree.n_levels)])


def cond_expect(tree: ScenarioTree, X: Union[np.ndarray, AdaptedProcess], k: int,
                level: Optional[int] = None) -> np.ndarray:
    """
    Conditional expectation E[X | F_k], leaf-expanded.

    Args:
        tree: The scenario tree
        X: Leaf values [..., n_leaves] or an AdaptedProcess
        k: Target level
        level: Level of X when X is a process (defaults to the last level);
            for plain arrays, the level X is known to be measurable at

    Returns:
        Leaf array constant on level-k nodes

    Raises:
        LevelMismatch: If k exceeds the level of X or is off the tree
    """
    tree.check_level(k)
    if isinstance(X, AdaptedProcess):
        s = tree.last_level if level is None else level
        tree.check_level(s)
        values = X.values[s]
    else:
        s = level
        values = np.asarray(X, dtype=float)
        if values.shape[-1] != tree.n_leaves:
            raise LevelMismatch(f"expected {tree.n_leaves} leaf values, got {values.shape}")
    if s is not None and k > s:
        raise LevelMismatch(f"cannot condition level-{s} values on later level {k}")
    return tree.average(values, k)


def optional_projection(tree: ScenarioTree, raw: np.ndarray, name: str = "") -> AdaptedProcess:
    """Project a raw path family [n_levels, n_leaves] level by level."""
    raw = np.asarray(raw, dtype=float)
    return AdaptedProcess(tree, np.array([tree.average(raw[k], k)
                                          for k in range(tree.n_levels)]), name)


def martingale_residual(tree: ScenarioTree, X: Union[AdaptedProcess, np.ndarray],
                        start: int = 0) -> float:
    """Max over levels k > start of |E[X_k | F_{k-1}] - X_{k-1}|."""
    values = X.values if isinstance(X, AdaptedProcess) else np.asarray(X, dtype=float)
    worst = 0.0
    for k in range(start + 1, tree.n_levels):
        gap = tree.average(values[k], k - 1) - values[k - 1]
        worst = max(worst, float(np.max(np.abs(gap))))
    return worst


def is_martingale(tree: ScenarioTree, X: AdaptedProcess, tol: float = TOL) -> bool:
    return martingale_residual(tree, X) <= tol
