"""
Density fields of differentiable families.

A family is differentiable with respect to A when M^u_k is the sum of
p_k(v) dA_v over v <= u. On a tree the density is the ratio of the
u-increment of M to dA at every atom of A; increments of M off the atoms
of A mean the family is not differentiable, and so does survival past t_k
on a node where a normalized A has already reached 1.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from src.filtration import ATOM_EPS, TOL, AdaptedProcess, LevelMismatch, ScenarioTree

from .family import IMFamily


logger = logging.getLogger(__name__)


class NotDifferentiable(Exception):
    """Raised when a family moves in u where A carries no mass."""

    def __init__(self, message: str, level: int = None, node: str = None, u: str = None):
        super().__init__(message)
        self.level = level
        self.node = node
        self.u = u


@dataclass(frozen=True, eq=False)
class DensityField:
    """
    Density p_k(leaf, v) for v <= k < up_to.

    Attributes:
        tree: The scenario tree
        values: Array [n_levels, n_leaves, u_size]; zero off atoms and for v > k
        atoms: Boolean array [u_size, n_leaves]; dA_v > ATOM_EPS
        dA: Increments of A, array [u_size, n_leaves] (zero in the infinity slot)
        up_to: Levels k < up_to are populated
    """
    tree: ScenarioTree
    values: np.ndarray
    atoms: np.ndarray
    dA: np.ndarray
    up_to: int

    def at(self, k: int, v: int) -> np.ndarray:
        """Node values of p_k(v)."""
        return self.tree.node_values(self.values[k, :, v], k)

    def on_time(self, k: int, index: np.ndarray) -> np.ndarray:
        """p_k(tau) for a leaf array of u-indices (zero where tau > k)."""
        index = np.asarray(index)
        safe = np.minimum(index, self.values.shape[2] - 1)
        vals = self.values[k, np.arange(self.tree.n_leaves), safe]
        return np.where(index <= k, vals, 0.0)

    def export_csv(self, path: Union[str, Path]) -> Path:
        """Write (level, node, u, value) rows at atoms."""
        path = Path(path)
        grid = self.tree.grid
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["level", "node", "u", "value"])
            for k in range(self.up_to):
                for v in range(k + 1):
                    values = self.at(k, v)
                    atoms = self.tree.node_values(self.atoms[v], k)
                    for label, value, atom in zip(self.tree.node_labels[k], values, atoms):
                        if atom:
                            writer.writerow([k, label, grid.label(v), repr(float(value))])
        return path


def increments_of(tree: ScenarioTree, A: AdaptedProcess) -> np.ndarray:
    """dA on the u-axis: [u_size, n_leaves] with dA_0 = A_0 and nothing at infinity."""
    dA = np.zeros((tree.grid.u_size, tree.n_leaves))
    dA[:tree.n_levels] = A.increments()
    return dA


def _check_survival(im: IMFamily, A: AdaptedProcess, k: int) -> None:
    """Survival mass 1 - M^k_k needs room 1 - A_k left above t_k."""
    tree = im.tree
    mass = tree.expand(tree.node_prob(k), k)
    room = mass * np.maximum(1.0 - A.values[k], 0.0)
    surviving = mass * (1.0 - im.values[k, k])
    stuck = (room <= ATOM_EPS) & (surviving > ATOM_EPS)
    if np.any(stuck):
        leaf = int(np.flatnonzero(stuck)[0])
        node = tree.node_label(k, leaf)
        u = f">{tree.grid.label(k)}"
        raise NotDifferentiable(
            f"A_{k} reaches 1 on node {node} while tau survives with probability "
            f"{1.0 - im.values[k, k, leaf]:.6g}", level=k, node=node, u=u)


def differentiate(im: IMFamily, A: AdaptedProcess, up_to: Optional[int] = None,
                  tol: float = TOL) -> DensityField:
    """
    Density of a family with respect to A on levels k < up_to.

    Args:
        im: The family
        A: Nondecreasing adapted process (normalized or not)
        up_to: Horizon level count; defaults to the grid horizon
        tol: Tolerance on off-atom increments

    Returns:
        DensityField

    Raises:
        NotDifferentiable: At the first (level, node, u) where M moves in u
            while dA_u = 0, or, when A stays below 1, where A_k reaches 1
            while the time still survives t_k (u reported as ">t_k")
    """
    tree = im.tree
    up_to = tree.grid.horizon_levels if up_to is None else up_to
    if not 0 < up_to <= tree.n_levels:
        raise LevelMismatch(f"up_to {up_to} outside [1, {tree.n_levels}]")
    dA = increments_of(tree, A)
    if np.any(dA < -tol):
        raise NotDifferentiable("A is not nondecreasing")
    normalized = bool(np.all(A.values <= 1.0 + tol))
    atoms = dA > ATOM_EPS
    values = np.zeros((tree.n_levels, tree.n_leaves, tree.grid.u_size))
    for k in range(up_to):
        dM = im.u_increments(k)
        for v in range(k + 1):
            off = (~atoms[v]) & (np.abs(dM[v]) > tol)
            if np.any(off):
                leaf = int(np.flatnonzero(off)[0])
                node = tree.node_label(k, leaf)
                raise NotDifferentiable(
                    f"M^u_{k} moves by {dM[v, leaf]:.6g} at u={tree.grid.label(v)} on node "
                    f"{node} where A has no mass", level=k, node=node,
                    u=tree.grid.label(v))
            values[k, :, v] = np.where(atoms[v], dM[v] / np.where(atoms[v], dA[v], 1.0), 0.0)
        if normalized:
            _check_survival(im, A, k)
    atoms.flags.writeable = False
    return DensityField(tree=tree, values=values, atoms=atoms, dA=dA, up_to=up_to)


def reconstruct(p: DensityField) -> np.ndarray:
    """M-hat^u_k = sum_{v <= u} p_k(v) dA_v for u <= k, NaN elsewhere."""
    tree = p.tree
    out = np.full((tree.grid.u_size, tree.n_levels, tree.n_leaves), np.nan)
    for k in range(p.up_to):
        terms = p.values[k, :, :k + 1].T * p.dA[:k + 1]
        out[:k + 1, k] = np.cumsum(terms, axis=0)
    return out


def reconstruction_residual(im: IMFamily, p: DensityField) -> float:
    """Max |M^u_k - sum_{v <= u} p_k(v) dA_v| over u <= k < up_to."""
    recon = reconstruct(p)
    worst = 0.0
    for k in range(p.up_to):
        worst = max(worst, float(np.max(np.abs(im.values[:k + 1, k] - recon[:k + 1, k]))))
    return worst


def density_martingale_residual(p: DensityField) -> float:
    """Max |E[p_k(v) | F_{k-1}] - p_{k-1}(v)| over atoms v <= k-1."""
    tree = p.tree
    worst = 0.0
    for k in range(1, p.up_to):
        for v in range(k):
            gap = tree.average(p.values[k, :, v], k - 1) - p.values[k - 1, :, v]
            gap = np.where(p.atoms[v], gap, 0.0)
            worst = max(worst, float(np.max(np.abs(gap))))
    return worst


def nullset_residual(p: DensityField, b: int) -> float:
    """Max over t > b of |sum_{u <= b} 1{p_b(u) = 0} p_t(u) dA_u|."""
    worst = 0.0
    null = np.abs(p.values[b, :, :b + 1]) <= ATOM_EPS
    for t in range(b + 1, p.up_to):
        charged = np.sum(np.where(null, p.values[t, :, :b + 1], 0.0) * p.dA[:b + 1].T, axis=1)
        worst = max(worst, float(np.max(np.abs(charged))))
    return worst
