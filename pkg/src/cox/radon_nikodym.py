"""
Density of the image measure with respect to the Cox measure.

On the product filtration the density at level k is the ratio of atom
masses. When the family of tau is differentiable with respect to A it
equals the closed form 1{k < u} Z_k / (1 - A_k) + 1{u <= k} p_k(u).
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from src.families import DensityField, increments_of
from src.filtration import (
    ATOM_EPS,
    AdaptedProcess,
    RandomTime,
    ScenarioTree,
    dual_projection,
)

from .product_measure import (
    ProductMeasure,
    atom_masses,
    cox_conditional_expectation,
    cox_measure,
    describe_atom,
    image_measure,
    product_atoms,
)


logger = logging.getLogger(__name__)


class NotAbsolutelyContinuous(Exception):
    """Raised when the image measure charges a Cox-null product atom."""

    def __init__(self, message: str, witness: dict = None):
        super().__init__(message)
        self.witness = witness or {}


@dataclass(frozen=True, eq=False)
class DensityLevel:
    """
    Radon-Nikodym density at one level.

    Attributes:
        level: Level index k
        values: Array [n_leaves, u_size]; NaN on excluded (doubly null) atoms
        defined: Boolean mask of cells on atoms with positive Cox mass
        excluded: Descriptions of atoms null under both measures
    """
    level: int
    values: np.ndarray
    defined: np.ndarray
    excluded: Tuple[dict, ...] = ()


@dataclass(frozen=True, eq=False)
class DensityProcess:
    tree: ScenarioTree
    levels: Tuple[DensityLevel, ...]

    def at(self, k: int) -> DensityLevel:
        return self.levels[k]


def radon_nikodym(Qimg: ProductMeasure, Qcox: ProductMeasure, k: int) -> DensityLevel:
    """
    Ratio of atom masses of Qimg and Qcox at product level k.

    Raises:
        NotAbsolutelyContinuous: On an atom with Cox mass <= ATOM_EPS and image
            mass > ATOM_EPS; the witness names the level, node, u and the
            leaves carrying image mass
    """
    tree = Qimg.tree
    if Qcox.tree is not tree:
        raise ValueError("measures live on different trees")
    tree.check_level(k)
    labels = product_atoms(tree, k)
    img, cox = atom_masses(Qimg, k), atom_masses(Qcox, k)
    bad = np.flatnonzero((cox <= ATOM_EPS) & (img > ATOM_EPS))
    if bad.size:
        witness = describe_atom(tree, k, bad[0])
        cells = labels == bad[0]
        witness["leaves"] = [tree.leaf_labels[i] for i in range(tree.n_leaves)
                             if np.any(cells[i] & (Qimg.weights[i] > ATOM_EPS))]
        raise NotAbsolutelyContinuous(
            f"image measure charges Cox-null atom at level {k}, node {witness['node']}, "
            f"u={witness['u']} (leaves {witness['leaves']})", witness)
    excluded = tuple(describe_atom(tree, k, a)
                     for a in np.flatnonzero(cox <= ATOM_EPS)
                     if np.any(labels == a))
    for atom in excluded:
        logger.debug(f"Excluding atom null under both measures: {atom}")
    positive = cox > ATOM_EPS
    ratio = np.where(positive, img / np.where(positive, cox, 1.0), np.nan)
    return DensityLevel(level=k, values=ratio[labels], defined=positive[labels],
                        excluded=excluded)


def density_process(Qimg: ProductMeasure, Qcox: ProductMeasure,
                    horizon: Optional[int] = None) -> DensityProcess:
    tree = Qimg.tree
    horizon = tree.grid.horizon_levels if horizon is None else horizon
    return DensityProcess(tree, tuple(radon_nikodym(Qimg, Qcox, k) for k in range(horizon)))


def closed_form_density(tree: ScenarioTree, Z: AdaptedProcess, A: AdaptedProcess,
                        p: DensityField, k: int) -> np.ndarray:
    """1{k < u} Z_k / (1 - A_k) + 1{u <= k} p_k(u); NaN where 1 - A_k vanishes."""
    u = np.arange(tree.grid.u_size)
    out = np.array(p.values[k], dtype=float)
    room = 1.0 - A.values[k]
    pre = np.where(room > ATOM_EPS, Z.values[k] / np.where(room > ATOM_EPS, room, 1.0), np.nan)
    out[:, u > k] = pre[:, None]
    return out


@dataclass
class DifferentiabilityDecision:
    differentiable: bool
    density: Optional[DensityField] = None
    witness: Optional[dict] = None
    excluded: List[dict] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.differentiable


def decide_differentiable(tree: ScenarioTree, tau: RandomTime, A: AdaptedProcess,
                          horizon: Optional[int] = None) -> DifferentiabilityDecision:
    """
    Decide differentiability of the family of tau with respect to A through
    absolute continuity of the image measure against the Cox measure.

    Returns:
        DifferentiabilityDecision carrying the density field (same layout as
        the density from the family) or the violating atom
    """
    horizon = tree.grid.horizon_levels if horizon is None else horizon
    Qimg, Qcox = image_measure(tree, tau), cox_measure(tree, A)
    dA = increments_of(tree, A)
    atoms = dA > ATOM_EPS
    values = np.zeros((tree.n_levels, tree.n_leaves, tree.grid.u_size))
    excluded = []
    for k in range(horizon):
        try:
            level = radon_nikodym(Qimg, Qcox, k)
        except NotAbsolutelyContinuous as e:
            logger.info(f"Not differentiable: {e}")
            return DifferentiabilityDecision(False, witness=e.witness)
        finite = np.where(level.defined, level.values, 0.0)
        values[k, :, :k + 1] = np.where(atoms[:k + 1].T, finite[:, :k + 1], 0.0)
        excluded.extend(level.excluded)
    atoms.flags.writeable = False
    density = DensityField(tree=tree, values=values, atoms=atoms, dA=dA, up_to=horizon)
    return DifferentiabilityDecision(True, density=density, excluded=excluded)


def dual_projection_identity(tree: ScenarioTree, tau: RandomTime, A: AdaptedProcess,
                             p: DensityField) -> float:
    """Max |sum_{v <= k} p_v(v) dA_v - optional dual projection of 1{tau <= k}|."""
    projection = dual_projection(tree, tau.jump_process(), mode="optional")
    diag = np.array([p.values[v, :, v] * p.dA[v] for v in range(p.up_to)])
    lhs = np.cumsum(diag, axis=0)
    return float(np.max(np.abs(lhs - projection.values[:p.up_to])))


def girsanov_residual(Qimg: ProductMeasure, Qcox: ProductMeasure, level: DensityLevel) -> float:
    """
    Max over indicators h of level-k product atoms of |E^img[h] - E^cox[h P_k]|,
    together with |E^cox[P_k] - 1|.
    """
    tree = Qimg.tree
    k = level.level
    labels = product_atoms(tree, k)
    P = np.where(level.defined, level.values, 0.0)
    img = np.bincount(labels.ravel(), weights=Qimg.weights.ravel())
    cox = np.bincount(labels.ravel(), weights=(Qcox.weights * P).ravel(),
                      minlength=img.size)
    return float(max(np.max(np.abs(img - cox)), abs(Qcox.integrate(P) - 1.0)))


def density_martingale_residual(Qcox: ProductMeasure, process: DensityProcess) -> float:
    """Max |E^cox[P_{k+1} | level-k atoms] - P_k| over Cox-charged atoms."""
    worst = 0.0
    for k in range(len(process.levels) - 1):
        nxt = process.levels[k + 1]
        cond = cox_conditional_expectation(Qcox, np.where(nxt.defined, nxt.values, 0.0), k)
        cur = process.levels[k]
        gap = np.where(cur.defined, cond - np.where(cur.defined, cur.values, 0.0), 0.0)
        worst = max(worst, float(np.nanmax(np.abs(gap))))
    return worst
