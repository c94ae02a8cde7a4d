"""
Order statistics of several random times.

Given k families M^{j,u} differentiable at level T with respect to a
shared A and a copula C, the joint law of the times given F_T is
(u_1, ..., u_k) -> C(M^{1,u_1}_T, ..., M^{k,u_k}_T). The i-th smallest
time sigma_i is handled through inclusion-exclusion over the i-subsets
of the times, and its density with respect to A through the jump ratios
of the marginal copulas along u.
"""

import csv
import logging
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.filtration import ATOM_EPS, AdaptedProcess, LevelMismatch, RandomTime, ScenarioTree
from src.families import DensityField, IMFamily, NotDifferentiable, differentiate

from .copulas import Copula, InvalidCopula


logger = logging.getLogger(__name__)

MAX_TIMES = 6


class CombinatorialOverflow(Exception):
    """Raised when more times are requested than the subset sums allow."""
    pass


class NotDifferentiableMarginal(Exception):
    """Raised when a marginal family is not differentiable at the horizon."""

    def __init__(self, message: str, marginal: int = None):
        super().__init__(message)
        self.marginal = marginal


@dataclass(frozen=True)
class RankMap:
    """
    Ranking of k values with ties broken by index.

    Attributes:
        values: The inputs
        rank: 1-based ranks R(i)
        order: order[r] is the input index holding rank r + 1
        sorted: values[order], nondecreasing
    """
    values: Tuple[float, ...]
    rank: Tuple[int, ...]
    order: Tuple[int, ...]
    sorted: Tuple[float, ...]


def order_stats(values: Sequence[float]) -> RankMap:
    """
    R(i) = #{j: a_j < a_i} + #{j < i: a_j = a_i} + 1.

    Raises:
        ValueError: If no values are given
    """
    a = [float(v) for v in values]
    if not a:
        raise ValueError("order statistics need at least one value")
    k = len(a)
    rank = tuple(sum(a[j] < a[i] for j in range(k)) + sum(a[j] == a[i] for j in range(i)) + 1
                 for i in range(k))
    order = [0] * k
    for i, r in enumerate(rank):
        order[r - 1] = i
    return RankMap(values=tuple(a), rank=rank, order=tuple(order),
                   sorted=tuple(a[i] for i in order))


def sorted_times(taus: Sequence[RandomTime]) -> np.ndarray:
    """Leaf-wise order statistics of tree times as u-indices [k, n_leaves]."""
    index = np.array([tau.index for tau in taus])
    return np.sort(index, axis=0, kind="stable")


def union_coefficients(k: int, i: int) -> Dict[FrozenSet[int], int]:
    """
    Coefficients c_J with 1{sigma_i <= u} = sum_J c_J prod_{j in J} 1{tau_j <= u}.

    Expands the alternating sum over nonempty collections S of i-subsets
    by the union of S, so only the distinct unions are evaluated.

    Raises:
        CombinatorialOverflow: If k exceeds MAX_TIMES
    """
    if k > MAX_TIMES:
        raise CombinatorialOverflow(f"{k} times exceed the supported maximum of {MAX_TIMES}")
    if not 1 <= i <= k:
        raise ValueError(f"order index {i} outside [1, {k}]")
    signed: Dict[FrozenSet[int], int] = {frozenset(): 1}
    for subset in combinations(range(k), i):
        subset = frozenset(subset)
        updated = dict(signed)
        for union, c in signed.items():
            joined = union | subset
            updated[joined] = updated.get(joined, 0) - c
        signed = updated
    return {J: -c for J, c in signed.items() if J and c}


class JointModel:
    """
    k families coupled by a copula, differentiable at level T with respect to
    the same A.

    Args:
        families: The marginal families, all on one tree
        copula: Copula of dimension k
        A: Shared nondecreasing process
        horizon: Level T

    Raises:
        CombinatorialOverflow: If k exceeds MAX_TIMES
        NotDifferentiableMarginal: If a family is not differentiable at T
    """

    def __init__(self, families: Sequence[IMFamily], copula: Copula, A: AdaptedProcess,
                 horizon: Optional[int] = None):
        if not families:
            raise ValueError("a joint model needs at least one marginal")
        if len(families) > MAX_TIMES:
            raise CombinatorialOverflow(f"{len(families)} times exceed the supported "
                                        f"maximum of {MAX_TIMES}")
        tree = families[0].tree
        if any(f.tree is not tree for f in families) or A.tree is not tree:
            raise LevelMismatch("marginals and A must live on one tree")
        if copula.dim != len(families):
            raise InvalidCopula(f"copula has dimension {copula.dim} for "
                                f"{len(families)} marginals")
        self.tree = tree
        self.families = list(families)
        self.copula = copula
        self.A = A
        self.horizon = tree.last_level if horizon is None else horizon
        tree.check_level(self.horizon)
        self.densities: List[DensityField] = []
        for j, family in enumerate(self.families):
            try:
                self.densities.append(differentiate(family, A, up_to=self.horizon + 1))
            except NotDifferentiable as e:
                raise NotDifferentiableMarginal(f"marginal {j + 1} is not differentiable at "
                                                f"level {self.horizon}: {e}", marginal=j) from e
        self.dA = self.densities[0].dA
        logger.debug(f"Joint model of {self.k} times with {copula!r} at level {self.horizon}")

    @property
    def k(self) -> int:
        return len(self.families)

    def marginal_cdfs(self, u: int) -> np.ndarray:
        """M^{j,u}_T for every marginal, array [n_leaves, k]."""
        return np.stack([f.values[u, self.horizon] for f in self.families], axis=-1)

    def joint_cdf(self, J: Sequence[int], u: int) -> np.ndarray:
        """Q[tau_j <= u for j in J | F_T] = C_J(M^{J,u}_T), leaf array."""
        J = sorted(J)
        return self.copula.marginal_cdf(self.marginal_cdfs(u)[:, J], J)

    def check_level(self, t: int):
        if t > self.horizon:
            raise LevelMismatch(f"level {t} lies beyond the horizon {self.horizon}")


def _check_u(u: int, t: int):
    if u > t:
        raise LevelMismatch(f"u index {u} lies after level {t}")


def order_cdf(source: Union[JointModel, Sequence[RandomTime]], i: int, u: int, t: int,
              tree: Optional[ScenarioTree] = None) -> np.ndarray:
    """
    Q[sigma_i <= u | F_t] by inclusion-exclusion, leaf-expanded.

    Args:
        source: A JointModel or times realized on a tree
        i: 1-based order index
        u: u-axis index with u <= t
        t: Level

    Raises:
        CombinatorialOverflow: If more than MAX_TIMES times are given
    """
    _check_u(u, t)
    if isinstance(source, JointModel):
        source.check_level(t)
        coefficients = union_coefficients(source.k, i)
        total = sum(c * source.joint_cdf(J, u) for J, c in coefficients.items())
        return source.tree.average(total, t)
    taus = list(source)
    tree = tree or taus[0].tree
    coefficients = union_coefficients(len(taus), i)
    total = np.zeros(tree.n_leaves)
    for J, c in coefficients.items():
        total += c * np.prod([taus[j].indicator_le(u) for j in J], axis=0)
    return tree.average(total, t)


def brute_force_order_cdf(taus: Sequence[RandomTime], i: int, u: int, t: int) -> np.ndarray:
    """Q[sigma_i <= u | F_t] by sorting the realized times leaf by leaf."""
    _check_u(u, t)
    tree = taus[0].tree
    sigma = sorted_times(taus)[i - 1]
    return tree.average((sigma <= u).astype(float), t)


def brute_force_joint_order_cdf(joint: JointModel, i: int, u: int, t: int) -> np.ndarray:
    """
    Q[sigma_i <= u | F_t] summed over the 2^k default patterns.

    The probability that exactly the times in D are <= u is
    sum_{E >= D} (-1)^{|E - D|} C_E.
    """
    _check_u(u, t)
    joint.check_level(t)
    k = joint.k
    subsets = [frozenset(c) for r in range(k + 1) for c in combinations(range(k), r)]
    C = {E: (np.ones(joint.tree.n_leaves) if not E else joint.joint_cdf(E, u))
         for E in subsets}
    total = np.zeros(joint.tree.n_leaves)
    for D in subsets:
        if len(D) < i:
            continue
        total += sum((-1) ** len(E - D) * C[E] for E in subsets if D <= E)
    return joint.tree.average(total, t)


def rank_conservation_residual(taus: Sequence[RandomTime]) -> float:
    """Max over leaves and u of |sum_i 1{sigma_i <= u} - sum_j 1{tau_j <= u}|."""
    index = np.array([tau.index for tau in taus])
    sigma = sorted_times(taus)
    worst = 0.0
    for u in range(taus[0].tree.grid.u_size):
        gap = np.sum(sigma <= u, axis=0) - np.sum(index <= u, axis=0)
        worst = max(worst, float(np.max(np.abs(gap))))
    return worst


def xi_density(joint: JointModel, J: Sequence[int]) -> np.ndarray:
    """
    Density xi_J(s) of u -> C_J(M^{J,u}_T) with respect to A.

    On a tree every increase of A is an atom, so xi_J(s) is the jump ratio
    [C_J(M^{J,s}_T) - C_J(M^{J,s-}_T)] / dA_s, and zero where A is flat.

    Returns:
        Array [n_leaves, horizon + 1]

    Raises:
        InvalidCopula: If the copula is not continuously differentiable
    """
    if not joint.copula.continuously_differentiable:
        raise InvalidCopula(f"{joint.copula.name} copula is not continuously differentiable; "
                            f"only order_cdf is available")
    T = joint.horizon
    previous = np.zeros(joint.tree.n_leaves)
    xi = np.zeros((joint.tree.n_leaves, T + 1))
    for s in range(T + 1):
        current = joint.joint_cdf(J, s)
        dA = joint.dA[s]
        atom = dA > ATOM_EPS
        xi[:, s] = np.where(atom, (current - previous) / np.where(atom, dA, 1.0), 0.0)
        previous = current
    return xi


def xi_density_continuous(copula: Copula, J: Sequence[int], cdfs: np.ndarray,
                          densities: np.ndarray) -> np.ndarray:
    """
    Continuous-part density sum_j dC_J/dx_j(M^{J,s-}) p^j(s).

    Args:
        copula: The copula
        J: Coordinates of the marginal copula
        cdfs: Left limits M^{j,s-}_T, array [..., len(J)]
        densities: p^j_T(s), array [..., len(J)]
    """
    J = sorted(J)
    cdfs = np.asarray(cdfs, dtype=float)
    densities = np.asarray(densities, dtype=float)
    total = np.zeros(cdfs.shape[:-1])
    for pos, j in enumerate(J):
        total = total + copula.marginal_partial(cdfs, J, j) * densities[..., pos]
    return total


def xi_density_on_paths(copula: Copula, J: Sequence[int], cdfs: np.ndarray,
                        densities: np.ndarray) -> np.ndarray:
    """
    Continuous-part density along a step grid with atomless A.

    Step i combines the left limits M^{j,s_{i-1}}_T with the densities
    p^j_T(s_i); step 0 carries no mass.

    Args:
        copula: Continuously differentiable copula
        J: Coordinates of the marginal copula
        cdfs: M^{j,s}_T per step, array [steps + 1, ..., len(J)] in sorted J order
        densities: p^j_T(s) per step, same shape

    Returns:
        Array [steps + 1, ...]

    Raises:
        InvalidCopula: If the copula is not continuously differentiable
        LevelMismatch: If the arrays disagree in shape
    """
    if not copula.continuously_differentiable:
        raise InvalidCopula(f"{copula.name} copula is not continuously differentiable")
    cdfs = np.asarray(cdfs, dtype=float)
    densities = np.asarray(densities, dtype=float)
    if cdfs.shape != densities.shape or cdfs.shape[-1] != len(J):
        raise LevelMismatch(f"marginal values {cdfs.shape} and densities {densities.shape} "
                            f"do not match {len(J)} coordinates")
    xi = np.zeros(cdfs.shape[:-1])
    xi[1:] = xi_density_continuous(copula, J, cdfs[:-1], densities[1:])
    return xi


def order_density_on_paths(copula: Copula, i: int, cdfs: np.ndarray,
                           densities: np.ndarray) -> np.ndarray:
    """
    Density of sigma_i with respect to an atomless A along a step grid.

    Args:
        copula: Continuously differentiable copula of dimension k
        i: Order index
        cdfs: M^{j,s}_T for every marginal, array [steps + 1, ..., k]
        densities: p^j_T(s), same shape
    """
    total = np.zeros(np.shape(cdfs)[:-1])
    for J, c in union_coefficients(copula.dim, i).items():
        J = sorted(J)
        total += c * xi_density_on_paths(copula, J, np.asarray(cdfs)[..., J],
                                         np.asarray(densities)[..., J])
    return total


def path_reconstruction_residual(copula: Copula, J: Sequence[int], cdfs: np.ndarray,
                                 densities: np.ndarray, dA: np.ndarray) -> float:
    """Max over steps u of |C_J(M^{., u}_T) - C_J(M^{., 0}_T) - sum_{0 < s <= u} xi_J(s) dA_s|."""
    J = sorted(J)
    xi = xi_density_on_paths(copula, J, cdfs, densities)
    integral = np.cumsum(xi * np.asarray(dA, dtype=float), axis=0)
    target = copula.marginal_cdf(cdfs, J)
    return float(np.max(np.abs(target - target[:1] - integral)))


def order_density(joint: JointModel, i: int, t: int) -> np.ndarray:
    """
    Density of sigma_i with respect to A given F_t: the inclusion-exclusion
    combination of E[xi_J(s) | F_t].

    Returns:
        Array [n_leaves, horizon + 1]
    """
    joint.check_level(t)
    coefficients = union_coefficients(joint.k, i)
    total = np.zeros((joint.tree.n_leaves, joint.horizon + 1))
    for J, c in coefficients.items():
        total += c * xi_density(joint, sorted(J))
    return joint.tree.average(total.T, t).T


def integrate_order_density(joint: JointModel, density: np.ndarray, u: int) -> np.ndarray:
    """sum_{s <= u} density(s) dA_s, leaf array."""
    return np.sum(density[:, :u + 1] * joint.dA[:u + 1].T, axis=1)


def order_density_residual(joint: JointModel, i: int, t: int) -> float:
    """Max over u <= t of |integral of the order density - order_cdf|."""
    density = order_density(joint, i, t)
    return max(float(np.max(np.abs(integrate_order_density(joint, density, u)
                                   - order_cdf(joint, i, u, t))))
               for u in range(t + 1))


@dataclass(frozen=True, eq=False)
class JointSample:
    """Draws of (leaf, tau_1..tau_k) with times as u-indices."""
    tree: ScenarioTree
    leaf: np.ndarray
    times: np.ndarray

    def order_frequencies(self, i: int, u: int) -> float:
        sigma = np.sort(self.times, axis=1)[:, i - 1]
        return float(np.mean(sigma <= u))


def sample_joint(joint: JointModel, seed: int, n: int = 10_000,
                 block_size: int = 10_000) -> JointSample:
    """
    Sample leaves by mass, copula uniforms per draw, and invert each
    marginal conditional law u -> M^{j,u}_T.

    Blocks use children of SeedSequence(seed).
    """
    tree = joint.tree
    n_blocks = -(-n // block_size)
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    cdf = np.stack([f.values[:, joint.horizon, :] for f in joint.families])  # [k, U, L]
    leaves, times = [], []
    for b, child in enumerate(children):
        size = min(block_size, n - b * block_size)
        rng = np.random.default_rng(child)
        leaf = rng.choice(tree.n_leaves, size=size, p=tree.leaf_prob)
        uniforms = joint.copula.sample(size, rng)
        block = np.empty((size, joint.k), dtype=int)
        for j in range(joint.k):
            block[:, j] = np.sum(cdf[j][:, leaf] < uniforms[:, j][None, :], axis=0)
        leaves.append(leaf)
        times.append(np.minimum(block, tree.grid.u_size - 1))
    logger.info(f"Sampled {n} joint draws (seed {seed})")
    return JointSample(tree, np.concatenate(leaves), np.concatenate(times))


def export_order_cdf(joint: JointModel, path: Union[str, Path],
                     t: Optional[int] = None) -> Path:
    """Write E[Q[sigma_i <= u | F_t]] as (i, u, t, value) rows for u <= t."""
    path = Path(path)
    grid = joint.tree.grid
    levels = range(joint.horizon + 1) if t is None else [t]
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["i", "u", "t", "value"])
        for level in levels:
            for i in range(1, joint.k + 1):
                for u in range(level + 1):
                    value = joint.tree.expectation(order_cdf(joint, i, u, level))
                    writer.writerow([i, grid.label(u), grid.label(level), repr(float(value))])
    return path
