"""
Doob-Meyer decomposition, dual projections and predictable brackets on trees.

Predictability on a tree means measurability with respect to the previous
level; level 0 counts as deterministic.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .processes import AdaptedProcess, martingale_residual
from .tree import ScenarioTree, TOL


logger = logging.getLogger(__name__)


class NotSupermartingale(Exception):
    """Raised when a process expected to be a (nonnegative) supermartingale is not."""
    pass


class NotIncreasing(Exception):
    """Raised when a path functional expected to be nondecreasing decreases."""
    pass


@dataclass(frozen=True, eq=False)
class Decomposition:
    """
    Canonical decomposition Z = M - A.

    Attributes:
        Z: The supermartingale
        M: Martingale part
        A: Predictable nondecreasing part with A_0 = 0
    """
    Z: AdaptedProcess
    M: AdaptedProcess
    A: AdaptedProcess

    @property
    def tree(self) -> ScenarioTree:
        return self.Z.tree

    @property
    def dA(self) -> np.ndarray:
        return self.A.increments()

    @property
    def dM(self) -> np.ndarray:
        """Martingale increments; the level-0 entry is 0."""
        d = self.M.increments()
        d[0] = 0.0
        return d

    def predictable_one_minus_z(self) -> np.ndarray:
        """
        ^p(1-Z)_k = 1 - Z_{k-1} + dA_k for k >= 1; row 0 holds 1 - Z_0.
        """
        Z = self.Z.values
        pp = np.empty_like(Z)
        pp[0] = 1.0 - Z[0]
        pp[1:] = 1.0 - Z[:-1] + self.dA[1:]
        return pp


def doob_meyer(tree: ScenarioTree, Z: AdaptedProcess, tol: float = TOL) -> Decomposition:
    """
    Doob-Meyer decomposition of a tree supermartingale.

    dA_k = Z_{k-1} - E[Z_k | F_{k-1}] and M = Z + A.

    Args:
        tree: The scenario tree
        Z: Adapted supermartingale
        tol: Tolerance on negative compensator increments

    Returns:
        Decomposition

    Raises:
        NotSupermartingale: If some compensator increment is below -tol
    """
    values = Z.values
    dA = np.zeros_like(values)
    for k in range(1, tree.n_levels):
        inc = values[k - 1] - tree.average(values[k], k - 1)
        if np.any(inc < -tol):
            leaf = int(np.argmin(inc))
            raise NotSupermartingale(
                f"E[Z_{k} | F_{k - 1}] exceeds Z_{k - 1} by {-inc[leaf]:.3g} "
                f"at node {tree.node_label(k - 1, leaf)}"
            )
        dA[k] = np.where(inc < 0, 0.0, inc)
    A = AdaptedProcess(tree, np.cumsum(dA, axis=0), "A")
    M = AdaptedProcess(tree, values + A.values, "M")
    logger.debug(f"Doob-Meyer: A_n range [{A.values[-1].min():.6g}, {A.values[-1].max():.6g}], "
                 f"martingale residual {martingale_residual(tree, M):.3g}")
    return Decomposition(Z=Z.named(Z.name or "Z"), M=M, A=A)


def dual_projection(tree: ScenarioTree, raw: np.ndarray, mode: str = "optional",
                    increasing: bool = True, tol: float = TOL) -> AdaptedProcess:
    """
    Dual projection of a raw path functional.

    Args:
        tree: The scenario tree
        raw: Path family [n_levels, n_leaves]
        mode: "optional" conditions increments on F_k, "predictable" on F_{k-1}
        increasing: Validate that raw is nondecreasing along every path
        tol: Tolerance for the monotonicity check

    Returns:
        AdaptedProcess whose increments are the projected raw increments

    Raises:
        NotIncreasing: If increasing is set and a raw increment is negative
        ValueError: On an unknown mode
    """
    if mode not in ("optional", "predictable"):
        raise ValueError(f"unknown projection mode {mode!r}")
    raw = np.asarray(raw, dtype=float)
    inc = np.diff(raw, axis=0, prepend=0.0)
    if increasing and np.any(inc < -tol):
        k, leaf = np.unravel_index(int(np.argmin(inc)), inc.shape)
        raise NotIncreasing(f"raw path decreases at level {k} on leaf "
                            f"{tree.leaf_labels[leaf]}")
    projected = np.empty_like(inc)
    for k in range(tree.n_levels):
        cond = k if mode == "optional" or k == 0 else k - 1
        projected[k] = tree.average(inc[k], cond)
    return AdaptedProcess(tree, np.cumsum(projected, axis=0), f"{mode} dual projection")


def dual_projection_residual(tree: ScenarioTree, raw: np.ndarray, projection: AdaptedProcess,
                             mode: str = "optional") -> float:
    """
    Sweep the defining property E[sum K dRaw] = E[sum K dProj] over every
    indicator test process K = 1{level k, node}, where the node lives at
    level k (optional) or k-1 (predictable).
    """
    raw_inc = np.diff(np.asarray(raw, dtype=float), axis=0, prepend=0.0)
    proj_inc = projection.increments()
    worst = 0.0
    for k in range(tree.n_levels):
        cond = k if mode == "optional" or k == 0 else k - 1
        for node in range(tree.n_nodes(cond)):
            K = (tree.node_of_leaf[cond] == node).astype(float)
            gap = tree.expectation(K * raw_inc[k]) - tree.expectation(K * proj_inc[k])
            worst = max(worst, abs(float(gap)))
    return worst


def predictable_bracket(tree: ScenarioTree, X: AdaptedProcess, Y: AdaptedProcess) -> AdaptedProcess:
    """Compensator of dX dY: increments E[dX_k dY_k | F_{k-1}], zero at level 0."""
    dX, dY = X.increments(), Y.increments()
    inc = np.zeros_like(dX)
    for k in range(1, tree.n_levels):
        inc[k] = tree.average(dX[k] * dY[k], k - 1)
    return AdaptedProcess(tree, np.cumsum(inc, axis=0), "bracket")


@dataclass
class FirstZeroReport:
    """Outcome of the first-zero check for a nonnegative supermartingale."""
    passed: bool
    first_zero: List[Optional[int]] = field(default_factory=list)
    offending: Optional[Tuple[int, str]] = None
    max_jump: float = 0.0
    bracket_residual: Optional[float] = None


def check_first_zero(tree: ScenarioTree, Y: AdaptedProcess,
                     X: Optional[AdaptedProcess] = None, tol: float = TOL) -> FirstZeroReport:
    """
    Check that the drift of Y does not jump at its first double zero.

    For each leaf path R' is the first level k >= 1 with Y_k = 0 and
    Y_{k-1} = 0. The compensator increment of Y at R' must vanish. When a
    bounded martingale X is supplied, the sum of 1{Y_{k-1} = 0} d<X,Y>_k
    must vanish along every path as well.

    Args:
        tree: The scenario tree
        Y: Nonnegative supermartingale
        X: Optional martingale for the bracket part of the check
        tol: Zero tolerance

    Returns:
        FirstZeroReport

    Raises:
        NotSupermartingale: If Y is negative somewhere or not a supermartingale
    """
    if np.any(Y.values < -tol):
        raise NotSupermartingale("process takes negative values")
    decomp = doob_meyer(tree, Y, tol)
    dA = decomp.dA
    zero = np.abs(Y.values) <= tol
    report = FirstZeroReport(passed=True)
    for leaf in range(tree.n_leaves):
        r_prime = None
        for k in range(1, tree.n_levels):
            if zero[k, leaf] and zero[k - 1, leaf]:
                r_prime = k
                break
        report.first_zero.append(r_prime)
        if r_prime is None:
            continue
        jump = abs(float(dA[r_prime, leaf]))
        report.max_jump = max(report.max_jump, jump)
        if jump > tol and report.passed:
            report.passed = False
            report.offending = (r_prime, tree.node_label(r_prime - 1, leaf))
            logger.warning(f"Compensator jumps by {jump:.3g} at first double zero, "
                           f"level {r_prime} node {report.offending[1]}")

    if X is not None:
        bracket = predictable_bracket(tree, X, Y).increments()
        charged = np.zeros(tree.n_leaves)
        for k in range(1, tree.n_levels):
            charged += np.where(zero[k - 1], bracket[k], 0.0)
        report.bracket_residual = float(np.max(np.abs(charged), initial=0.0))
        if report.bracket_residual > tol:
            report.passed = False
    return report
