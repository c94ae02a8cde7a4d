"""
Finite scenario trees.

A ScenarioTree is a finite filtration given as a refining sequence of
partitions of a set of leaves with exact probabilities. Level k is the
information available at grid time t_k; the terminal level doubles as the
information at t = infinity. Leaves may be finer than the terminal
partition, which is how random times that are not measurable at the
horizon (Cox times) are represented.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np


logger = logging.getLogger(__name__)

# Masses are validated against this tolerance, then renormalized
MASS_TOL = 1e-9
# Exact-arithmetic tolerance used by martingale and measurability checks
TOL = 1e-12
# Increments below this are treated as zero mass
ATOM_EPS = 1e-14


class InvalidSpec(Exception):
    """Raised when a tree description violates the tree invariants."""
    pass


class LevelMismatch(Exception):
    """Raised when values are not measurable at the requested level."""
    pass


@dataclass(frozen=True)
class TimeGrid:
    """
    Time points of the finite filtration.

    Args:
        times: Strictly increasing time points starting at 0
        has_infinity: Whether the u-axis carries the sentinel point infinity
        horizon_index: Number of levels on which [0, T) is checked;
            ``len(times) + 1`` stands for T = infinity
    """
    times: Tuple[float, ...]
    has_infinity: bool = True
    horizon_index: Optional[int] = None

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        object.__setattr__(self, "times", times)
        if not times:
            raise InvalidSpec("time grid is empty")
        if times[0] != 0.0:
            raise InvalidSpec(f"time grid must start at 0, got {times[0]}")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InvalidSpec(f"time grid is not strictly increasing: {times}")
        if self.horizon_index is None:
            object.__setattr__(self, "horizon_index", len(times) + 1)
        if not 1 <= self.horizon_index <= len(times) + 1:
            raise InvalidSpec(
                f"horizon_index {self.horizon_index} outside [1, {len(times) + 1}]"
            )

    @property
    def n_levels(self) -> int:
        return len(self.times)

    @property
    def last_level(self) -> int:
        return len(self.times) - 1

    @property
    def infinity_index(self) -> int:
        """Index of the infinity slot on the u-axis."""
        return len(self.times)

    @property
    def u_size(self) -> int:
        """Number of u-axis slots (grid points plus the infinity slot)."""
        return len(self.times) + 1

    @property
    def horizon_levels(self) -> int:
        """Number of levels strictly before the horizon T."""
        return min(self.horizon_index, self.n_levels)

    def u_points(self) -> np.ndarray:
        return np.array(list(self.times) + [np.inf])

    def index_of(self, t: Union[float, str]) -> int:
        """
        Map a time (or "inf") to its u-axis index.

        Raises:
            InvalidSpec: If t is not a grid point
        """
        if isinstance(t, str):
            if t.strip().lower() in ("inf", "infinity", "∞"):
                t = np.inf
            else:
                t = float(t)
        if np.isinf(t):
            if not self.has_infinity:
                raise InvalidSpec("grid has no infinity slot")
            return self.infinity_index
        for i, s in enumerate(self.times):
            if abs(s - t) <= 1e-12 * max(1.0, abs(s)):
                return i
        raise InvalidSpec(f"time {t} is not on the grid {self.times}")

    def label(self, u: int) -> str:
        if u == self.infinity_index:
            return "inf"
        return f"{self.times[u]:g}"


@dataclass(frozen=True, eq=False)
class ScenarioTree:
    """
    Immutable refining partition tree with exact probabilities.

    Args:
        grid: The time grid
        leaf_labels: One label per leaf
        leaf_prob: Leaf masses (renormalized to sum to 1)
        node_of_leaf: Integer array [n_levels, n_leaves]; node index of each
            leaf at each level
        node_labels: Node labels per level

    Raises:
        InvalidSpec: If masses are not positive, level 0 is not a single node,
            or a level does not refine the previous one
    """
    grid: TimeGrid
    leaf_labels: Tuple[str, ...]
    leaf_prob: np.ndarray
    node_of_leaf: np.ndarray
    node_labels: Tuple[Tuple[str, ...], ...]
    _indicator: Tuple[np.ndarray, ...] = field(default=(), repr=False)
    _node_prob: Tuple[np.ndarray, ...] = field(default=(), repr=False)
    _parent: Tuple[np.ndarray, ...] = field(default=(), repr=False)

    def __post_init__(self):
        prob = np.asarray(self.leaf_prob, dtype=float)
        nodes = np.asarray(self.node_of_leaf, dtype=int)
        n_levels, n_leaves = self.grid.n_levels, len(self.leaf_labels)

        if prob.shape != (n_leaves,):
            raise InvalidSpec(f"expected {n_leaves} leaf masses, got {prob.shape}")
        if np.any(prob <= 0):
            bad = self.leaf_labels[int(np.argmin(prob))]
            raise InvalidSpec(f"leaf {bad} has non-positive mass")
        total = prob.sum()
        if abs(total - 1.0) > MASS_TOL:
            raise InvalidSpec(f"leaf masses sum to {total:.12g}, expected 1")
        prob = prob / total

        if nodes.shape != (n_levels, n_leaves):
            raise InvalidSpec(
                f"node map has shape {nodes.shape}, expected {(n_levels, n_leaves)}"
            )
        if np.any(nodes[0] != 0):
            raise InvalidSpec("level 0 must consist of a single node")

        indicators, node_probs, parents = [], [], []
        for k in range(n_levels):
            count = int(nodes[k].max()) + 1
            if set(np.unique(nodes[k])) != set(range(count)):
                raise InvalidSpec(f"level {k} node indices are not contiguous")
            if len(self.node_labels[k]) != count:
                raise InvalidSpec(f"level {k} has {count} nodes but "
                                  f"{len(self.node_labels[k])} labels")
            indicator = np.zeros((count, n_leaves))
            indicator[nodes[k], np.arange(n_leaves)] = 1.0
            indicators.append(indicator)
            node_probs.append(indicator @ prob)
            if k == 0:
                parents.append(np.zeros(1, dtype=int))
                continue
            parent = np.full(count, -1, dtype=int)
            for leaf in range(n_leaves):
                child, up = nodes[k, leaf], nodes[k - 1, leaf]
                if parent[child] == -1:
                    parent[child] = up
                elif parent[child] != up:
                    raise InvalidSpec(
                        f"level {k} node {self.node_labels[k][child]} straddles "
                        f"two level-{k - 1} nodes (partition does not refine)"
                    )
            parents.append(parent)

        for arr in [prob, nodes] + indicators + node_probs + parents:
            arr.flags.writeable = False
        object.__setattr__(self, "leaf_prob", prob)
        object.__setattr__(self, "node_of_leaf", nodes)
        object.__setattr__(self, "_indicator", tuple(indicators))
        object.__setattr__(self, "_node_prob", tuple(node_probs))
        object.__setattr__(self, "_parent", tuple(parents))

    @property
    def n_levels(self) -> int:
        return self.grid.n_levels

    @property
    def last_level(self) -> int:
        return self.grid.last_level

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_labels)

    def n_nodes(self, k: int) -> int:
        return self._indicator[k].shape[0]

    def node_prob(self, k: int) -> np.ndarray:
        return self._node_prob[k]

    def parent(self, k: int) -> np.ndarray:
        """Parent index (at level k-1) of every level-k node."""
        return self._parent[k]

    def children(self, k: int, node: int) -> List[int]:
        """Level-(k+1) nodes below a level-k node."""
        return [int(c) for c in np.flatnonzero(self._parent[k + 1] == node)]

    def node_label(self, k: int, leaf: int) -> str:
        """Label of the level-k node containing a leaf."""
        return self.node_labels[k][int(self.node_of_leaf[k, leaf])]

    def leaf_index(self, label: str) -> int:
        try:
            return self.leaf_labels.index(label)
        except ValueError:
            raise InvalidSpec(f"unknown leaf label {label!r}")

    def node_index(self, k: int, label: str) -> int:
        try:
            return self.node_labels[k].index(label)
        except ValueError:
            raise InvalidSpec(f"unknown level-{k} node label {label!r}")

    def check_level(self, k: int):
        if not 0 <= k < self.n_levels:
            raise LevelMismatch(f"level {k} outside [0, {self.last_level}]")

    def node_average(self, values: np.ndarray, k: int) -> np.ndarray:
        """
        Probability-weighted node averages at level k.

        Args:
            values: Leaf-indexed array [..., n_leaves]
            k: Level index

        Returns:
            Array [..., n_nodes(k)]
        """
        self.check_level(k)
        values = np.asarray(values, dtype=float)
        weighted = (values * self.leaf_prob) @ self._indicator[k].T
        return weighted / self._node_prob[k]

    def expand(self, node_values: np.ndarray, k: int) -> np.ndarray:
        """Broadcast level-k node values back onto the leaves."""
        return np.asarray(node_values)[..., self.node_of_leaf[k]]

    def average(self, values: np.ndarray, k: int) -> np.ndarray:
        """E[values | F_k], leaf-expanded."""
        return self.expand(self.node_average(values, k), k)

    def node_values(self, values: np.ndarray, k: int) -> np.ndarray:
        """Read the per-node value of a level-k measurable leaf array."""
        self.check_level(k)
        first = np.array([int(np.flatnonzero(self.node_of_leaf[k] == i)[0])
                          for i in range(self.n_nodes(k))])
        return np.asarray(values)[..., first]

    def measurability_error(self, values: np.ndarray, k: int) -> float:
        """Largest deviation of a leaf array from its level-k node values."""
        values = np.asarray(values, dtype=float)
        return float(np.max(np.abs(values - self.expand(self.node_values(values, k), k)),
                            initial=0.0))

    def is_measurable(self, values: np.ndarray, k: int, tol: float = TOL) -> bool:
        return self.measurability_error(values, k) <= tol

    def expectation(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=float) @ self.leaf_prob


def _common_label(members: Sequence[str], fallback: str) -> str:
    prefix = members[0]
    for label in members[1:]:
        while not label.startswith(prefix):
            prefix = prefix[:-1]
    return prefix or fallback


def _tree_from_levels(grid: TimeGrid, masses: Dict[str, float],
                      levels: Sequence[Sequence[Sequence[str]]],
                      node_labels: Optional[Sequence[Sequence[str]]] = None) -> ScenarioTree:
    labels = tuple(masses.keys())
    if len(levels) != grid.n_levels:
        raise InvalidSpec(f"expected {grid.n_levels} levels, got {len(levels)}")
    index = {label: i for i, label in enumerate(labels)}
    nodes = np.full((grid.n_levels, len(labels)), -1, dtype=int)
    all_labels = []
    for k, partition in enumerate(levels):
        level_labels = []
        for i, block in enumerate(partition):
            for label in block:
                if label not in index:
                    raise InvalidSpec(f"level {k} names unknown leaf {label!r}")
                if nodes[k, index[label]] != -1:
                    raise InvalidSpec(f"leaf {label!r} appears twice at level {k}")
                nodes[k, index[label]] = i
            if node_labels is not None:
                level_labels.append(str(node_labels[k][i]))
            elif k == 0:
                level_labels.append("root")
            else:
                level_labels.append(_common_label(list(block), f"n{k}.{i}"))
        if np.any(nodes[k] < 0):
            missing = [labels[j] for j in np.flatnonzero(nodes[k] < 0)]
            raise InvalidSpec(f"level {k} does not cover leaves {missing}")
        if len(set(level_labels)) != len(level_labels):
            level_labels = [f"n{k}.{i}" for i in range(len(level_labels))]
        all_labels.append(tuple(level_labels))
    return ScenarioTree(grid=grid, leaf_labels=labels,
                        leaf_prob=np.array([float(masses[l]) for l in labels]),
                        node_of_leaf=nodes, node_labels=tuple(all_labels))


def _tree_from_branching(grid: TimeGrid, branching: Sequence, symbols: Optional[str],
                         hidden: Optional[Sequence[float]]) -> ScenarioTree:
    if len(branching) != grid.n_levels - 1:
        raise InvalidSpec(
            f"branching must list {grid.n_levels - 1} steps, got {len(branching)}"
        )
    # paths: (label, mass, node index per level)
    paths = [("", 1.0, [0])]
    for k, step in enumerate(branching):
        new_paths = []
        for node, (label, mass, trail) in enumerate(paths):
            probs = step[node] if step and isinstance(step[0], (list, tuple)) else step
            probs = [float(p) for p in probs]
            if not probs or any(p <= 0 for p in probs):
                raise InvalidSpec(f"step {k} node {label or 'root'}: child masses must be positive")
            if abs(sum(probs) - 1.0) > MASS_TOL:
                raise InvalidSpec(
                    f"step {k} node {label or 'root'}: children masses sum to "
                    f"{sum(probs):.12g} of parent"
                )
            alphabet = symbols if symbols and len(symbols) >= len(probs) else None
            for j, p in enumerate(probs):
                if len(probs) == 1:
                    sym = "s"
                else:
                    sym = alphabet[j] if alphabet else str(j)
                new_paths.append((label + sym, mass * p, trail + [len(new_paths)]))
        paths = new_paths

    leaves, masses, node_rows = [], [], []
    for label, mass, trail in paths:
        if hidden:
            if abs(sum(hidden) - 1.0) > MASS_TOL or any(h <= 0 for h in hidden):
                raise InvalidSpec(f"hidden split {hidden} must be positive and sum to 1")
            for j, h in enumerate(hidden):
                leaves.append(f"{label}#{j}")
                masses.append(mass * float(h))
                node_rows.append(trail)
        else:
            leaves.append(label)
            masses.append(mass)
            node_rows.append(trail)
    nodes = np.array(node_rows, dtype=int).T
    node_labels = []
    for k in range(grid.n_levels):
        names = {}
        for leaf, trail in zip(leaves, node_rows):
            names.setdefault(trail[k], leaf.split("#")[0][:k] or "root")
        node_labels.append(tuple(names[i] for i in range(len(names))))
    return ScenarioTree(grid=grid, leaf_labels=tuple(leaves), leaf_prob=np.array(masses),
                        node_of_leaf=nodes, node_labels=tuple(node_labels))


def build_tree(spec: dict) -> ScenarioTree:
    """
    Build a validated tree from a description.

    Two formats are accepted. The explicit format gives ``leaves`` (label to
    mass) and ``levels`` (one partition of leaf labels per level). The
    branching format gives ``branching``: per step either one list of
    conditional child probabilities shared by all nodes or one list per
    node, plus optional ``symbols`` for child labels and ``hidden`` to split
    every terminal node into leaves invisible to the filtration.

    Args:
        spec: Tree description with ``times`` and optional ``has_infinity``
            and ``horizon_index``

    Returns:
        ScenarioTree

    Raises:
        InvalidSpec: If masses don't sum or partitions don't refine
    """
    if "times" not in spec:
        raise InvalidSpec("tree spec is missing 'times'")
    grid = TimeGrid(times=tuple(spec["times"]),
                    has_infinity=bool(spec.get("has_infinity", True)),
                    horizon_index=spec.get("horizon_index"))
    if "levels" in spec:
        leaves = spec.get("leaves")
        if not isinstance(leaves, dict) or not leaves:
            raise InvalidSpec("explicit tree spec needs a 'leaves' mapping")
        tree = _tree_from_levels(grid, leaves, spec["levels"], spec.get("node_labels"))
    elif "branching" in spec:
        tree = _tree_from_branching(grid, spec["branching"], spec.get("symbols", "ud"),
                                    spec.get("hidden"))
    else:
        raise InvalidSpec("tree spec needs either 'levels' or 'branching'")
    logger.debug(f"Built tree: {tree.n_levels} levels, {tree.n_leaves} leaves")
    return tree


def load_tree_spec(path: Union[str, Path]) -> ScenarioTree:
    """Read a JSON tree description from disk and build it."""
    path = Path(path)
    try:
        with open(path) as f:
            spec = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise InvalidSpec(f"cannot read tree spec {path}: {e}")
    return build_tree(spec)


def binary_tree(n_steps: int, p_up: float = 0.5, times: Optional[Sequence[float]] = None,
                hidden: Optional[Sequence[float]] = None) -> ScenarioTree:
    """Recombination-free binary tree with labels built from 'u'/'d'."""
    times = list(times) if times is not None else list(range(n_steps + 1))
    return build_tree({"times": times, "branching": [[p_up, 1.0 - p_up]] * n_steps,
                       "symbols": "ud", "hidden": hidden})


def random_tree(rng: np.random.Generator, max_levels: int = 4, max_leaves: int = 16,
                hidden_prob: float = 0.3) -> ScenarioTree:
    """
    Draw a small random tree for property sweeps.

    The number of levels is uniform on [2, max_levels]; every node gets one to
    three children while the leaf budget allows, with Dirichlet masses.
    Terminal nodes are split into two hidden leaves with probability
    ``hidden_prob`` when the budget allows.
    """
    n_levels = int(rng.integers(2, max_levels + 1))
    paths = [("", 1.0)]
    branching: List[List[List[float]]] = []
    for _ in range(n_levels - 1):
        step, new_paths = [], []
        for i, (label, mass) in enumerate(paths):
            remaining = len(paths) - i - 1
            room = max_leaves - len(new_paths) - remaining
            n_children = int(rng.integers(1, min(3, max(room, 1)) + 1))
            probs = rng.dirichlet(np.ones(n_children)) if n_children > 1 else np.ones(1)
            probs = np.maximum(probs, 0.02)
            probs = probs / probs.sum()
            step.append([float(p) for p in probs])
            new_paths.extend((label + str(j), mass * p) for j, p in enumerate(probs))
        branching.append(step)
        paths = new_paths
    spec = {"times": [float(k) for k in range(n_levels)], "branching": branching,
            "symbols": "0123456789"}
    if 2 * len(paths) <= max_leaves and rng.random() < hidden_prob:
        h = float(rng.uniform(0.2, 0.8))
        spec["hidden"] = [h, 1.0 - h]
    return build_tree(spec)
