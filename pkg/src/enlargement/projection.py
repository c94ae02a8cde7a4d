"""
Parametered optional projections.

For a function F(leaf, u) the projection ^oF_k(u) is, for every fixed u,
the optional projection of F(., u) at level k. The diagonal k -> ^oF_k(t_k)
is an adapted process.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from src.cox import cox_conditional_expectation, cox_measure
from src.families import increments_of
from src.filtration import ATOM_EPS, AdaptedProcess, LevelMismatch, ScenarioTree


logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ParamProjection:
    """
    Attributes:
        tree: The scenario tree
        values: Array [n_levels, n_leaves, u_size] of ^oF_k(leaf, u)
    """
    tree: ScenarioTree
    values: np.ndarray

    def at(self, k: int, u: int) -> np.ndarray:
        """Node values of ^oF_k(u)."""
        return self.tree.node_values(self.values[k, :, u], k)

    def diagonal(self) -> AdaptedProcess:
        """k -> ^oF_k(t_k)."""
        n = self.tree.n_levels
        return AdaptedProcess(self.tree, self.values[np.arange(n), :, np.arange(n)], "oF_t(t)")


def _tabulate(tree: ScenarioTree, F: Union[np.ndarray, Callable[[int, int], float]]) -> np.ndarray:
    if callable(F):
        F = np.array([[F(leaf, u) for u in range(tree.grid.u_size)]
                      for leaf in range(tree.n_leaves)], dtype=float)
    F = np.asarray(F, dtype=float)
    if F.shape != (tree.n_leaves, tree.grid.u_size):
        raise LevelMismatch(f"F must have shape {(tree.n_leaves, tree.grid.u_size)}, got {F.shape}")
    return F


def parametered_projection(tree: ScenarioTree,
                           F: Union[np.ndarray, Callable[[int, int], float]]) -> ParamProjection:
    """
    ^oF_k(u) = E[F(., u) | F_k] for every level and u slot.

    Args:
        tree: The scenario tree
        F: Array [n_leaves, u_size] or callable (leaf, u) -> value
    """
    F = _tabulate(tree, F)
    values = np.array([tree.average(F.T, k).T for k in range(tree.n_levels)])
    return ParamProjection(tree, values)


def projection_identity_residual(tree: ScenarioTree, A: AdaptedProcess, F: np.ndarray,
                      projection: ParamProjection, t: int, f: np.ndarray) -> float:
    """
    |E[sum_{u <= t} f(u) F(u) dA_u] - E[sum_{u <= t} f(u) ^oF_t(u) dA_u]|
    for a test function f(leaf, u) measurable at level t.
    """
    F = _tabulate(tree, F)
    f = np.asarray(f, dtype=float)
    for u in range(t + 1):
        if not tree.is_measurable(f[:, u], t):
            raise LevelMismatch(f"test function is not measurable at level {t} for u={u}")
    dA = increments_of(tree, A)[:t + 1].T
    lhs = tree.expectation(np.sum(f[:, :t + 1] * F[:, :t + 1] * dA, axis=1))
    rhs = tree.expectation(np.sum(f[:, :t + 1] * projection.values[t, :, :t + 1] * dA, axis=1))
    return abs(float(lhs - rhs))


def projection_identity_sweep(tree: ScenarioTree, A: AdaptedProcess, F: np.ndarray) -> float:
    """
    Worst residual of the projection identity over every indicator test
    function 1{node at level t} 1{u = v}, v <= t.
    """
    F = _tabulate(tree, F)
    projection = parametered_projection(tree, F)
    worst = 0.0
    for t in range(tree.n_levels):
        for node in range(tree.n_nodes(t)):
            indicator = (tree.node_of_leaf[t] == node).astype(float)
            for v in range(t + 1):
                f = np.zeros((tree.n_leaves, tree.grid.u_size))
                f[:, v] = indicator
                worst = max(worst, projection_identity_residual(tree, A, F, projection, t, f))
    return worst


def cox_projection_residual(tree: ScenarioTree, A: AdaptedProcess, F: np.ndarray) -> float:
    """
    Under the Cox measure the conditional expectation of F on the product
    atom (node, u <= k) equals ^oF_k(u) wherever dA_u > 0.
    """
    F = _tabulate(tree, F)
    projection = parametered_projection(tree, F)
    Q = cox_measure(tree, A)
    dA = increments_of(tree, A)
    worst = 0.0
    for k in range(tree.n_levels):
        cox = cox_conditional_expectation(Q, F, k)
        for u in range(k + 1):
            charged = (dA[u] > ATOM_EPS) & (tree.leaf_prob > ATOM_EPS)
            gap = np.abs(cox[:, u] - projection.values[k, :, u])
            worst = max(worst, float(np.max(np.where(charged, gap, 0.0))))
    return worst
