"""
Increasing families of martingales.

An IMFamily stores M^u_t for every u-axis slot (grid points plus infinity)
and every level, leaf-expanded: values[u, k, leaf].
"""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from src.filtration import (
    TOL,
    AdaptedProcess,
    LevelMismatch,
    RandomTime,
    ScenarioTree,
    martingale_residual,
)


logger = logging.getLogger(__name__)


class AxiomViolation(Exception):
    """Raised when a family fails the increasing-martingale-family axioms."""
    pass


@dataclass(frozen=True, eq=False)
class TwoParamField:
    """
    Generic two-parameter array values[u_slot, step, path].

    Used for Monte Carlo families and densities where the u-axis is a set of
    start indices rather than the whole grid.
    """
    values: np.ndarray
    starts: np.ndarray
    steps: np.ndarray
    weights: np.ndarray
    name: str = ""

    def start_position(self, start: int) -> int:
        hit = np.flatnonzero(self.starts == start)
        if not hit.size:
            raise LevelMismatch(f"start {start} is not on the field's u-grid")
        return int(hit[0])

    def step_position(self, step: int) -> int:
        hit = np.flatnonzero(self.steps == step)
        if not hit.size:
            raise LevelMismatch(f"step {step} was not recorded")
        return int(hit[0])

    def at(self, start: int, step: int) -> np.ndarray:
        return self.values[self.start_position(start), self.step_position(step)]


@dataclass(frozen=True, eq=False)
class IMFamily:
    """
    Tree family M^u_t.

    Args:
        tree: The scenario tree
        values: Array [u_size, n_levels, n_leaves]
    """
    tree: ScenarioTree
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        expected = (self.tree.grid.u_size, self.tree.n_levels, self.tree.n_leaves)
        if values.shape != expected:
            raise LevelMismatch(f"family has shape {values.shape}, expected {expected}")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def u_size(self) -> int:
        return self.values.shape[0]

    def at(self, u: int, k: int) -> np.ndarray:
        """Node values of M^u at level k."""
        return self.tree.node_values(self.values[u, k], k)

    def process(self, u: int) -> AdaptedProcess:
        return AdaptedProcess(self.tree, self.values[u], f"M^{self.tree.grid.label(u)}")

    def diagonal(self) -> AdaptedProcess:
        """k -> M^k_k."""
        n = self.tree.n_levels
        return AdaptedProcess(self.tree, self.values[np.arange(n), np.arange(n)], "M^t_t")

    def u_increments(self, k: int) -> np.ndarray:
        """d_u M^u_k over all u slots, array [u_size, n_leaves]."""
        return np.diff(self.values[:, k], axis=0, prepend=0.0)

    def to_rows(self) -> List[Tuple[str, float, str, float]]:
        grid = self.tree.grid
        rows = []
        for u in range(self.u_size):
            for k in range(self.tree.n_levels):
                for label, value in zip(self.tree.node_labels[k], self.at(u, k)):
                    rows.append((grid.label(u), grid.times[k], label, float(value)))
        return rows

    def export_csv(self, path: Union[str, Path]) -> Path:
        """Write the cube as (u, t, node, value) rows."""
        path = Path(path)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["u", "t", "node", "value"])
            for u, t, node, value in self.to_rows():
                writer.writerow([u, repr(t), node, repr(value)])
        return path


def im_from_time(tree: ScenarioTree, tau: RandomTime) -> IMFamily:
    """M^u_t = Q[tau <= u | F_t] for every grid u, t."""
    indicators = np.array([tau.indicator_le(u) for u in range(tree.grid.u_size)])
    values = np.array([tree.average(indicators, k) for k in range(tree.n_levels)])
    return IMFamily(tree, values.transpose(1, 0, 2))


def azema(tree: ScenarioTree, tau: RandomTime) -> AdaptedProcess:
    """Z_t = Q[t < tau | F_t]."""
    return AdaptedProcess(tree, np.array([tree.average(1.0 - tau.indicator_le(k), k)
                                          for k in range(tree.n_levels)]), "Z")


def azema_from_family(im: IMFamily) -> AdaptedProcess:
    """Z = 1 - M^t_t."""
    return (1.0 - im.diagonal()).named("Z")


def cox_family(tree: ScenarioTree, A: AdaptedProcess) -> IMFamily:
    """
    Family of a Cox time with conditional law A: M^u_t = E[A_u | F_t].

    Raises:
        AxiomViolation: If A decreases or exceeds 1
    """
    if np.any(A.increments()[1:] < -TOL) or np.any(A.values < -TOL):
        raise AxiomViolation("Cox family needs a nonnegative nondecreasing A")
    if np.any(A.values[-1] > 1.0 + TOL):
        raise AxiomViolation(f"Cox family needs A <= 1, got {A.values[-1].max():.6g}")
    n = tree.n_levels
    values = np.ones((tree.grid.u_size, n, tree.n_leaves))
    for u in range(n):
        for k in range(n):
            values[u, k] = A.values[u] if k >= u else tree.average(A.values[u], k)
    return IMFamily(tree, values)


def complete_extension(im: IMFamily) -> IMFamily:
    """Fill M^u_k for k < u with E[M^u_u | F_k]."""
    tree = im.tree
    values = np.array(im.values)
    for u in range(1, tree.n_levels):
        for k in range(u):
            values[u, k] = tree.average(values[u, u], k)
    last = tree.last_level
    for k in range(last):
        values[-1, k] = tree.average(values[-1, last], k)
    return IMFamily(tree, values)


@dataclass
class AxiomReport:
    """Residuals of the family axioms; the family passes when all are within tolerance."""
    passed: bool
    martingale: float = 0.0
    range_excess: float = 0.0
    monotone: float = 0.0
    terminal: float = 0.0
    complete: bool = False
    violations: List[str] = field(default_factory=list)


def check_axioms(im: IMFamily, complete: bool = False, tol: float = TOL) -> AxiomReport:
    """
    Check the increasing-family axioms.

    Each M^u is a martingale on levels >= u (all levels when complete) with
    values in [0, 1]; u -> M^u_k is nondecreasing over u <= k (over every
    slot when complete); M^inf at the terminal level is 1.
    """
    tree = im.tree
    report = AxiomReport(passed=True, complete=complete)
    n = tree.n_levels
    for u in range(im.u_size):
        start = 0 if complete or u >= n else u
        residual = martingale_residual(tree, im.values[u], start=min(start, n - 1))
        if u < n or complete:
            report.martingale = max(report.martingale, residual)
            if residual > tol:
                report.violations.append(f"M^{tree.grid.label(u)} is not a martingale "
                                         f"(residual {residual:.3g})")
    report.range_excess = float(max(np.max(-im.values), np.max(im.values - 1.0), 0.0))
    if report.range_excess > tol:
        report.violations.append(f"values leave [0, 1] by {report.range_excess:.3g}")
    for k in range(n):
        slots = im.values[:, k] if complete else im.values[:k + 1, k]
        if slots.shape[0] > 1:
            drop = float(np.max(slots[:-1] - slots[1:]))
            report.monotone = max(report.monotone, drop)
            if drop > tol:
                report.violations.append(f"family decreases in u at level {k} by {drop:.3g}")
    report.terminal = float(np.max(np.abs(im.values[-1, -1] - 1.0)))
    if report.terminal > tol:
        report.violations.append(f"M^inf at the terminal level differs from 1 by "
                                 f"{report.terminal:.3g}")
    report.passed = not report.violations
    return report


@dataclass
class IMZReport:
    passed: bool
    violations: List[dict] = field(default_factory=list)


def check_imz(im: IMFamily, Z: AdaptedProcess, tol: float = TOL) -> IMZReport:
    """Check M^u_u = 1 - Z_u and M^u_t <= 1 - Z_t for u <= t, node-wise."""
    tree = im.tree
    if Z.tree is not tree:
        raise LevelMismatch("family and Z live on different trees")
    report = IMZReport(passed=True)
    band = 1.0 - Z.values
    for u in range(tree.n_levels):
        for k in range(u, tree.n_levels):
            gap = im.values[u, k] - band[k]
            kind = "diagonal" if k == u else "band"
            bad = np.abs(gap) > tol if k == u else gap > tol
            for node in np.unique(tree.node_of_leaf[k][bad]):
                leaf = int(np.flatnonzero(tree.node_of_leaf[k] == node)[0])
                report.violations.append({
                    "u": tree.grid.label(u), "level": k,
                    "node": tree.node_labels[k][node], "kind": kind,
                    "excess": float(gap[leaf]),
                })
    report.passed = not report.violations
    if not report.passed:
        logger.debug(f"iM_Z check failed at {len(report.violations)} node(s)")
    return report


def verify_mint(tree: ScenarioTree, tau: RandomTime, im: IMFamily,
                f: Union[np.ndarray, Callable[[int, int], float]], t: int) -> float:
    """
    |E[f(tau)] - E[sum_u f(u) d_u M^u_t]|.

    Args:
        f: Array [n_leaves, u_size] or callable (leaf, u) -> value; f(., u)
            must be measurable at level t

    Raises:
        LevelMismatch: If f is not measurable at level t
    """
    if callable(f):
        f = np.array([[f(leaf, u) for u in range(tree.grid.u_size)]
                      for leaf in range(tree.n_leaves)], dtype=float)
    f = np.asarray(f, dtype=float)
    for u in range(tree.grid.u_size):
        if not tree.is_measurable(f[:, u], t):
            raise LevelMismatch(f"f(., {tree.grid.label(u)}) is not measurable at level {t}")
    lhs = tree.expectation(f[np.arange(tree.n_leaves), tau.index])
    rhs = tree.expectation(np.sum(f.T * im.u_increments(t), axis=0))
    return abs(float(lhs - rhs))


@dataclass(frozen=True, eq=False)
class ProductSample:
    """Draws (leaf, u) from the product measure associated with a family."""
    tree: ScenarioTree
    leaf: np.ndarray
    u: np.ndarray

    @property
    def size(self) -> int:
        return int(self.leaf.size)

    def frequencies(self) -> np.ndarray:
        """Empirical weights [n_leaves, u_size]."""
        counts = np.zeros((self.tree.n_leaves, self.tree.grid.u_size))
        np.add.at(counts, (self.leaf, self.u), 1.0)
        return counts / self.size

    def standard_errors(self) -> np.ndarray:
        p = self.frequencies()
        return np.sqrt(p * (1.0 - p) / self.size)

    def empirical_cdf(self, u: int, k: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        Per level-k node: fraction of draws with time <= u among draws in
        the node, and its standard error.
        """
        nodes = self.tree.node_of_leaf[k][self.leaf]
        hit = (self.u <= u).astype(float)
        n_nodes = self.tree.n_nodes(k)
        count = np.bincount(nodes, minlength=n_nodes).astype(float)
        est = np.bincount(nodes, weights=hit, minlength=n_nodes) / np.maximum(count, 1.0)
        se = np.sqrt(est * (1.0 - est) / np.maximum(count, 1.0))
        return est, se


def sample_from_im(im: IMFamily, seed: int, n: int = 10_000) -> ProductSample:
    """
    Sample (leaf, u): the leaf by mass, u given the leaf from the terminal
    distribution d_u M^u_n.

    Raises:
        AxiomViolation: If the family fails the axioms
    """
    report = check_axioms(im)
    if not report.passed:
        raise AxiomViolation("; ".join(report.violations))
    tree = im.tree
    rng = np.random.default_rng(seed)
    leaves = rng.choice(tree.n_leaves, size=n, p=tree.leaf_prob)
    cdf = im.values[:, -1, :]
    draws = rng.random(n)
    u = np.sum(cdf[:, leaves] <= draws[None, :], axis=0)
    u = np.minimum(u, tree.grid.u_size - 1)
    logger.info(f"Sampled {n} draws from the product measure (seed {seed})")
    return ProductSample(tree, leaves, u)
