"""
Measures on the product space (leaves x u-axis).

The image measure of (tree, tau) puts the leaf mass on the slot tau(leaf).
The Cox measure of (tree, A) spreads each leaf mass along u according to
dA, with the remainder at infinity; under it the conditional law of u
given F_t is A_u for u <= t.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from src.filtration import ATOM_EPS, MASS_TOL, TOL, AdaptedProcess, RandomTime, ScenarioTree


logger = logging.getLogger(__name__)

IMAGE = "image"
COX = "cox"


class BadNormalization(Exception):
    """Raised when A does not define a probability on the u-axis."""
    pass


@dataclass(frozen=True, eq=False)
class ProductMeasure:
    """
    Args:
        tree: The scenario tree
        weights: Mass per (leaf, u slot), array [n_leaves, u_size]
        tag: "image" or "cox"
    """
    tree: ScenarioTree
    weights: np.ndarray
    tag: str

    def __post_init__(self):
        weights = np.array(self.weights, dtype=float)
        if weights.shape != (self.tree.n_leaves, self.tree.grid.u_size):
            raise BadNormalization(f"weights have shape {weights.shape}")
        if np.any(weights < -TOL):
            raise BadNormalization("product weights must be nonnegative")
        marginal = weights.sum(axis=1)
        if np.max(np.abs(marginal - self.tree.leaf_prob)) > MASS_TOL:
            raise BadNormalization("u-marginal does not reproduce the leaf masses")
        weights = np.maximum(weights, 0.0)
        weights.flags.writeable = False
        object.__setattr__(self, "weights", weights)

    def leaf_marginal(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    def u_marginal(self) -> np.ndarray:
        return self.weights.sum(axis=0)

    def integrate(self, h: np.ndarray) -> float:
        """E[h] for h an array [n_leaves, u_size]."""
        return float(np.sum(self.weights * np.asarray(h, dtype=float)))

    def export_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        grid = self.tree.grid
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["leaf", "u", "weight"])
            for i, leaf in enumerate(self.tree.leaf_labels):
                for u in range(grid.u_size):
                    writer.writerow([leaf, grid.label(u), repr(float(self.weights[i, u]))])
        return path


def image_measure(tree: ScenarioTree, tau: RandomTime) -> ProductMeasure:
    """weight(leaf, u) = mass(leaf) 1{tau(leaf) = u}."""
    weights = np.zeros((tree.n_leaves, tree.grid.u_size))
    weights[np.arange(tree.n_leaves), tau.index] = tree.leaf_prob
    return ProductMeasure(tree, weights, IMAGE)


def cox_measure(tree: ScenarioTree, A: AdaptedProcess,
                infinity_mass: Optional[np.ndarray] = None) -> ProductMeasure:
    """
    weight(leaf, u) = mass(leaf) dA_u(leaf), with 1 - A_n placed at infinity.

    Args:
        tree: The scenario tree
        A: Nondecreasing adapted process with A_n <= 1
        infinity_mass: Optional declared mass at infinity; must equal 1 - A_n

    Raises:
        BadNormalization: If A decreases, exceeds 1, or the declared infinity
            mass does not complete A to 1
    """
    dA = A.increments()
    if np.any(dA < -TOL) or np.any(A.values < -TOL):
        raise BadNormalization("A must be nonnegative and nondecreasing")
    terminal = A.values[-1]
    if np.any(terminal > 1.0 + TOL):
        raise BadNormalization(f"A reaches {terminal.max():.12g} > 1 before infinity")
    at_infinity = 1.0 - terminal
    if infinity_mass is not None:
        declared = np.broadcast_to(np.asarray(infinity_mass, dtype=float), at_infinity.shape)
        if np.max(np.abs(declared - at_infinity)) > MASS_TOL:
            raise BadNormalization(
                f"terminal mass {float(np.min(terminal + declared)):.12g} differs from 1"
            )
    weights = np.zeros((tree.n_leaves, tree.grid.u_size))
    weights[:, :tree.n_levels] = (np.maximum(dA, 0.0) * tree.leaf_prob).T
    weights[:, -1] = np.maximum(at_infinity, 0.0) * tree.leaf_prob
    return ProductMeasure(tree, weights, COX)


def product_atoms(tree: ScenarioTree, k: int) -> np.ndarray:
    """
    Atom labels [n_leaves, u_size] of F_k v sigma(u stopped at t_k).

    Atom (node, u) for u <= k and one lump (node, u > k) per level-k node.
    """
    slots = np.minimum(np.arange(tree.grid.u_size), k + 1)
    return tree.node_of_leaf[k][:, None] * (k + 2) + slots[None, :]


def atom_masses(Q: ProductMeasure, k: int) -> np.ndarray:
    labels = product_atoms(Q.tree, k)
    return np.bincount(labels.ravel(), weights=Q.weights.ravel(),
                       minlength=Q.tree.n_nodes(k) * (k + 2))


def describe_atom(tree: ScenarioTree, k: int, label: int) -> dict:
    node, slot = divmod(int(label), k + 2)
    return {"level": k, "node": tree.node_labels[k][node],
            "u": tree.grid.label(slot) if slot <= k else f">{tree.grid.label(k)}"}


def check_cox_property(tree: ScenarioTree, Q: ProductMeasure, A: AdaptedProcess) -> float:
    """Max |Q[u' <= u | F_t] - A_u| over u <= t, node-wise."""
    worst = 0.0
    cumulative = np.cumsum(Q.weights, axis=1)
    for t in range(tree.n_levels):
        for u in range(t + 1):
            cond = tree.node_average(cumulative[:, u] / tree.leaf_prob, t)
            worst = max(worst, float(np.max(np.abs(cond - tree.node_values(A.values[u], t)))))
    return worst


def cox_conditional_expectation(Q: ProductMeasure, F: np.ndarray, k: int) -> np.ndarray:
    """
    E^Q[F | product atoms at level k], returned per (leaf, u) cell; NaN on
    null atoms.
    """
    labels = product_atoms(Q.tree, k)
    F = np.asarray(F, dtype=float)
    size = Q.tree.n_nodes(k) * (k + 2)
    mass = np.bincount(labels.ravel(), weights=Q.weights.ravel(), minlength=size)
    total = np.bincount(labels.ravel(), weights=(Q.weights * F).ravel(), minlength=size)
    ratio = np.where(mass > ATOM_EPS, total / np.where(mass > ATOM_EPS, mass, 1.0), np.nan)
    return ratio[labels]
