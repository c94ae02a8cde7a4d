"""
Optional splitting of processes adapted to the enlarged filtration.

X = X' on [0, tau) and X = X''(tau) on [tau, infinity), with X' adapted to
the base filtration and X'' a field indexed by the default time.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.filtration import ATOM_EPS, AdaptedProcess, RandomTime, ScenarioTree

from .progressive import NotGAdapted, g_atoms, g_measurability_error


logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SplitPair:
    """
    Attributes:
        pre: X' as an adapted process (node fill value where the pre-default atom is empty)
        post: X''_k(leaf, u), array [n_levels, n_leaves, u_size]
        pre_defined: Leaf mask [n_levels, n_leaves] of charged pre-default atoms
        post_defined: Mask [n_levels, n_leaves, u_size] of charged atoms (node, tau = u)
    """
    tree: ScenarioTree
    tau: RandomTime
    pre: AdaptedProcess
    post: np.ndarray
    pre_defined: np.ndarray
    post_defined: np.ndarray

    def reconstruct(self, up_to: Optional[int] = None) -> np.ndarray:
        """X'_k 1{t_k < tau} + X''_k(tau) 1{tau <= t_k}."""
        tree = self.tree
        up_to = tree.n_levels if up_to is None else up_to
        leaves = np.arange(tree.n_leaves)
        out = np.empty((up_to, tree.n_leaves))
        for k in range(up_to):
            alive = self.tau.index > k
            out[k] = np.where(alive, self.pre.values[k], self.post[k, leaves, self.tau.index])
        return out


def optional_split(tree: ScenarioTree, tau: RandomTime, X: np.ndarray,
                   horizon: Optional[int] = None) -> SplitPair:
    """
    Split a G-adapted process into its pre- and post-default parts.

    Atoms (node, tau = u) and (node, tau > t_k) without mass take the value
    of the node's pre-default atom, or of its first charged default atom when
    every leaf of the node has defaulted, so an F-adapted X splits into
    X' = X''(u) = X for every u.

    Args:
        tree: The scenario tree
        tau: The random time
        X: Leaf values [n_levels, n_leaves]
        horizon: Levels k < horizon are split (defaults to every level)

    Raises:
        NotGAdapted: If a row is not constant on the G-atoms of its level
    """
    X = np.asarray(X, dtype=float)
    horizon = tree.n_levels if horizon is None else horizon
    U = tree.grid.u_size
    pre = np.zeros((tree.n_levels, tree.n_leaves))
    post = np.zeros((tree.n_levels, tree.n_leaves, U))
    pre_defined = np.zeros((tree.n_levels, tree.n_leaves), dtype=bool)
    post_defined = np.zeros((tree.n_levels, tree.n_leaves, U), dtype=bool)
    weighted = np.flatnonzero(tree.leaf_prob > ATOM_EPS)
    for k in range(horizon):
        err = g_measurability_error(tree, tau, X[k], k)
        if err > 1e-9:
            raise NotGAdapted(f"process is not G-adapted at level {k} (deviation {err:.3g})")
        n_nodes, slots = tree.n_nodes(k), k + 2
        labels = g_atoms(tree, tau, k)
        present, first = np.unique(labels[weighted], return_index=True)
        values = np.zeros(n_nodes * slots)
        values[present] = X[k, weighted[first]]
        charged = np.zeros(n_nodes * slots, dtype=bool)
        charged[present] = True
        values, charged = values.reshape(n_nodes, slots), charged.reshape(n_nodes, slots)

        first_slot = np.argmax(charged, axis=1)
        fill = np.where(charged[:, -1], values[:, -1], values[np.arange(n_nodes), first_slot])
        values = np.where(charged, values, fill[:, None])

        pre[k] = tree.expand(values[:, -1], k)
        pre_defined[k] = tree.expand(charged[:, -1], k)
        post[k, :, :k + 1] = tree.expand(values[:, :-1].T, k).T
        post[k, :, k + 1:] = tree.expand(fill, k)[:, None]
        post_defined[k, :, :k + 1] = tree.expand(charged[:, :-1].T, k).T
        logger.debug(f"Level {k}: {present.size} charged G-atoms split")
    return SplitPair(tree=tree, tau=tau, pre=AdaptedProcess(tree, pre, "X'"), post=post,
                     pre_defined=pre_defined, post_defined=post_defined)


def split_residual(pair: SplitPair, X: np.ndarray, up_to: Optional[int] = None) -> float:
    """Max |X - reconstruction| over charged leaves."""
    X = np.asarray(X, dtype=float)
    recon = pair.reconstruct(up_to)
    charged = pair.tree.leaf_prob > ATOM_EPS
    return float(np.max(np.abs(recon - X[:recon.shape[0]])[:, charged], initial=0.0))
