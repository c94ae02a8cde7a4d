"""
Per-step representation of a supermartingale model.

A StepModel holds, for every step k and path p, the Azema supermartingale
Z, the increments of its decomposition and of the driver Y. Tree leaves
and Monte Carlo paths share this layout so one Euler engine serves both;
on a tree each leaf is a path weighted by its mass and the recursion is
exact.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.filtration import TOL, Decomposition, ScenarioTree, martingale_residual


logger = logging.getLogger(__name__)

# ^p(1-Z) at or below this is treated as zero
PP_EPS = 1e-14


class HyZViolated(Exception):
    """Raised when 1 - Z vanishes at a positive time where it must stay positive."""
    pass


class ZeroPredictableProjection(Exception):
    """Raised when ^p(1-Z) vanishes on a step where M moves."""
    pass


def mtilde_increments(pp: np.ndarray, dM: np.ndarray, tol: float = TOL) -> np.ndarray:
    """
    dm = -dM / ^p(1-Z), set to 0 where ^p(1-Z) and dM both vanish.

    Raises:
        ZeroPredictableProjection: Where ^p(1-Z) vanishes but dM does not
    """
    zero = pp <= PP_EPS
    stuck = zero & (np.abs(dM) > tol)
    if np.any(stuck):
        k, p = np.unravel_index(int(np.argmax(stuck)), stuck.shape)
        raise ZeroPredictableProjection(
            f"^p(1-Z) vanishes at step {k} on path {p} while M moves by {dM[k, p]:.3g}"
        )
    return np.where(zero, 0.0, -dM / np.where(zero, 1.0, pp))


@dataclass(frozen=True, eq=False)
class StepModel:
    """
    Args:
        times: Step times [K]
        weights: Path weights [P] summing to 1
        Z: Supermartingale values [K, P]
        dA: Compensator increments [K, P] (row 0 is 0)
        dM: Martingale increments [K, P] (row 0 is 0)
        dY: Driver increments [K, P, m] (row 0 is 0)
        tree: Source tree when the paths are tree leaves
        seed: Master seed when the paths are simulated
        step: Nominal step size
    """
    times: np.ndarray
    weights: np.ndarray
    Z: np.ndarray
    dA: np.ndarray
    dM: np.ndarray
    dY: np.ndarray
    tree: Optional[ScenarioTree] = None
    seed: Optional[int] = None
    step: Optional[float] = None

    def __post_init__(self):
        K, P = np.shape(self.Z)
        for name in ("dA", "dM"):
            if np.shape(getattr(self, name)) != (K, P):
                raise ValueError(f"{name} must have shape {(K, P)}")
        dY = np.asarray(self.dY, dtype=float)
        if dY.ndim == 2:
            dY = dY[:, :, None]
        if dY.shape[:2] != (K, P):
            raise ValueError(f"dY must have shape {(K, P)} + (m,)")
        object.__setattr__(self, "dY", dY)
        for name in ("times", "weights", "Z", "dA", "dM"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        pp = np.empty((K, P))
        pp[0] = 1.0 - self.Z[0]
        pp[1:] = 1.0 - self.Z[:-1] + self.dA[1:]
        object.__setattr__(self, "_pp", pp)
        object.__setattr__(self, "_dm", mtilde_increments(pp, self.dM))

    @property
    def n_steps(self) -> int:
        return self.Z.shape[0]

    @property
    def n_paths(self) -> int:
        return self.Z.shape[1]

    @property
    def dim(self) -> int:
        return self.dY.shape[2]

    @property
    def exact(self) -> bool:
        return self.tree is not None

    @property
    def pp(self) -> np.ndarray:
        """^p(1-Z)_k = 1 - Z_{k-1} + dA_k."""
        return self._pp

    @property
    def dm(self) -> np.ndarray:
        return self._dm

    @property
    def A(self) -> np.ndarray:
        return np.cumsum(self.dA, axis=0)

    @classmethod
    def from_tree(cls, decomp: Decomposition, driver: Optional["TreeDriver"] = None) -> "StepModel":
        """Leaf paths of a tree decomposition; the driver defaults to zero."""
        tree = decomp.tree
        dY = driver.increments if driver is not None else np.zeros((tree.n_levels, tree.n_leaves, 1))
        return cls(times=np.array(tree.grid.times), weights=tree.leaf_prob,
                   Z=decomp.Z.values, dA=decomp.dA, dM=decomp.dM, dY=dY, tree=tree)

    def mean(self, values: np.ndarray) -> np.ndarray:
        """Weighted mean over the path axis (last axis)."""
        return np.asarray(values) @ self.weights


@dataclass(frozen=True, eq=False)
class MTilde:
    """
    Attributes:
        increments: dm per (level, leaf) or (step, path)
        pp: ^p(1-Z) on the same layout
    """
    increments: np.ndarray
    pp: np.ndarray
    tree: Optional[ScenarioTree] = None

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.increments, axis=0)

    def stochastic_exponential(self, start: int = 0) -> np.ndarray:
        """prod_{start < j <= k} (1 + dm_j), rows before start are NaN."""
        out = np.full_like(self.increments, np.nan)
        out[start] = 1.0
        for k in range(start + 1, self.increments.shape[0]):
            out[k] = out[k - 1] * (1.0 + self.increments[k])
        return out


def build_mtilde(decomp: Decomposition, enforce_hy: bool = False) -> MTilde:
    """
    Increments dm_k = -dM_k / ^p(1-Z)_k of a tree decomposition.

    Args:
        decomp: Decomposition of the Azema supermartingale
        enforce_hy: Require 1 - Z_k > 0 at every level k >= 1, the positive
            reading of the hypothesis whose printed form has the inequality
            reversed

    Raises:
        HyZViolated: If enforce_hy is set and 1 - Z vanishes at a positive level
        ZeroPredictableProjection: If ^p(1-Z) vanishes where M moves
    """
    tree = decomp.tree
    Z = decomp.Z.values
    if enforce_hy:
        bad = (1.0 - Z[1:]) <= 0
        if np.any(bad):
            k, leaf = np.unravel_index(int(np.argmax(bad)), bad.shape)
            raise HyZViolated(f"1 - Z vanishes at level {k + 1} on node "
                              f"{tree.node_label(k + 1, leaf)}")
    pp = decomp.predictable_one_minus_z()
    dM = decomp.dM
    increments = mtilde_increments(pp, dM)
    residual = martingale_residual(tree, np.cumsum(increments, axis=0))
    if residual > 1e-10:
        logger.warning(f"m-tilde martingale residual {residual:.3g}")
    return MTilde(increments=increments, pp=pp, tree=tree)


@dataclass(frozen=True, eq=False)
class TreeDriver:
    """
    Martingale driver on a tree.

    Args:
        tree: The scenario tree
        increments: Array [n_levels, n_leaves, m]; row k constant on level-k
            nodes with zero conditional mean given level k-1

    Raises:
        ValueError: If the increments are not adapted martingale increments
    """
    tree: ScenarioTree
    increments: np.ndarray

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=float)
        if inc.ndim == 2:
            inc = inc[:, :, None]
        tree = self.tree
        if inc.shape[:2] != (tree.n_levels, tree.n_leaves):
            raise ValueError(f"driver increments must have shape "
                             f"{(tree.n_levels, tree.n_leaves)} + (m,)")
        for k in range(tree.n_levels):
            for j in range(inc.shape[2]):
                if not tree.is_measurable(inc[k, :, j], k, 1e-10):
                    raise ValueError(f"driver increment at level {k} is not adapted")
                if k and np.max(np.abs(tree.average(inc[k, :, j], k - 1))) > 1e-10:
                    raise ValueError(f"driver increment at level {k} has nonzero mean")
        if np.any(inc[0] != 0):
            raise ValueError("driver starts with a zero increment")
        object.__setattr__(self, "increments", inc)


def alternating_driver(tree: ScenarioTree, scale: float = 1.0, m: int = 1) -> TreeDriver:
    """
    Centred alternating increments: children of a node get +scale, -scale,
    +scale, ... in order, then the node mean is removed. Single-child nodes
    get zero. Component j > 0 alternates in blocks of j + 1 children.
    """
    inc = np.zeros((tree.n_levels, tree.n_leaves, m))
    for k in range(1, tree.n_levels):
        rank = np.zeros(tree.n_nodes(k), dtype=int)
        for parent in range(tree.n_nodes(k - 1)):
            for i, child in enumerate(tree.children(k - 1, parent)):
                rank[child] = i
        for j in range(m):
            sign = np.where((rank // (j + 1)) % 2 == 0, 1.0, -1.0) * scale
            raw = tree.expand(sign, k)
            inc[k, :, j] = raw - tree.average(raw, k - 1)
    return TreeDriver(tree, inc)
