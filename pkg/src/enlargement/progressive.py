"""
The progressively enlarged filtration on a tree.

At level k the atoms of G_k are, per level-k node, one pre-default atom
{tau > t_k} and one post-default atom {tau = u} for every u <= k. All
G-side operators are leaf-expanded: the value of a leaf is the value on
its G-atom.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from src.cox import product_atoms
from src.families import DensityField, azema
from src.filtration import ATOM_EPS, TOL, LevelMismatch, RandomTime, ScenarioTree


logger = logging.getLogger(__name__)


class ZeroAzema(Exception):
    """Raised when Z_k vanishes on a pre-default atom that carries mass."""
    pass


class ZeroDensity(Exception):
    """Raised when p_k(tau) vanishes on a post-default atom that carries mass."""
    pass


class NotGAdapted(Exception):
    """Raised when a process is not constant on the atoms of the enlarged filtration."""
    pass


def g_atoms(tree: ScenarioTree, tau: RandomTime, k: int) -> np.ndarray:
    """Leaf labels of the G_k atoms: node * (k + 2) + min(tau, k + 1)."""
    tree.check_level(k)
    return product_atoms(tree, k)[np.arange(tree.n_leaves), tau.index]


def describe_g_atom(tree: ScenarioTree, k: int, label: int) -> dict:
    node, slot = divmod(int(label), k + 2)
    return {"level": k, "node": tree.node_labels[k][node],
            "tau": tree.grid.label(slot) if slot <= k else f">{tree.grid.label(k)}"}


def _atom_average(labels: np.ndarray, mass: np.ndarray, values: np.ndarray):
    size = int(labels.max()) + 1
    weight = np.bincount(labels, weights=mass, minlength=size)
    total = np.bincount(labels, weights=mass * values, minlength=size)
    charged = weight > ATOM_EPS
    ratio = np.where(charged, total / np.where(charged, weight, 1.0), np.nan)
    return ratio[labels], charged[labels]


def g_cond_expect(tree: ScenarioTree, tau: RandomTime, values: np.ndarray, k: int) -> np.ndarray:
    """E[H | G_k] by direct enumeration of the G_k atoms; NaN on null atoms."""
    ratio, _ = _atom_average(g_atoms(tree, tau, k), tree.leaf_prob,
                             np.asarray(values, dtype=float))
    return ratio


def g_measurability_error(tree: ScenarioTree, tau: RandomTime, values: np.ndarray, k: int) -> float:
    labels = g_atoms(tree, tau, k)
    values = np.asarray(values, dtype=float)
    worst = 0.0
    for label in np.unique(labels):
        members = values[labels == label]
        worst = max(worst, float(np.max(members) - np.min(members)))
    return worst


@dataclass
class GTestReport:
    """Outcome of the enlarged-filtration martingale test."""
    passed: bool
    max_residual: float = 0.0
    adapted: bool = True
    offending: Optional[dict] = None
    residuals: List[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "max_residual": self.max_residual,
                "adapted": self.adapted, "offending": self.offending}


def g_martingale_test(tree: ScenarioTree, tau: RandomTime, X: np.ndarray,
                      up_to: Optional[int] = None, tol: float = 1e-10) -> GTestReport:
    """
    Check max over charged G-atoms of |E[X_k - X_{k-1} | G_{k-1}]|.

    Args:
        tree: The scenario tree
        tau: The random time
        X: Leaf values [n_levels, n_leaves] of a G-adapted process
        up_to: Levels k < up_to are tested
        tol: Pass threshold

    Returns:
        GTestReport locating the worst atom when the test fails
    """
    X = np.asarray(X, dtype=float)
    up_to = tree.n_levels if up_to is None else up_to
    report = GTestReport(passed=True)
    for k in range(up_to):
        if g_measurability_error(tree, tau, X[k], k) > 1e-9:
            report.adapted = False
            report.offending = {"level": k, "reason": "not G-adapted"}
            break
    worst_atom = None
    for k in range(1, up_to):
        labels = g_atoms(tree, tau, k - 1)
        drift, charged = _atom_average(labels, tree.leaf_prob, X[k] - X[k - 1])
        gap = np.where(charged, np.abs(drift), 0.0)
        level_worst = float(np.max(gap))
        report.residuals.append(level_worst)
        if level_worst > report.max_residual:
            report.max_residual = level_worst
            worst_atom = describe_g_atom(tree, k - 1, int(labels[int(np.argmax(gap))]))
            worst_atom["drift"] = float(drift[int(np.argmax(gap))])
    report.passed = report.adapted and report.max_residual <= tol
    if report.adapted and not report.passed:
        report.offending = worst_atom
        logger.debug(f"G-martingale test failed at {worst_atom}")
    return report


def key_lemma(tree: ScenarioTree, tau: RandomTime, H: np.ndarray, k: int) -> np.ndarray:
    """
    E[H | G_k] on {t_k < tau} as E[H 1{t_k < tau} | F_k] / Z_k.

    Returns:
        Leaf array, NaN on leaves with tau <= t_k

    Raises:
        ZeroAzema: If Z_k vanishes on a leaf with tau > t_k
    """
    tree.check_level(k)
    alive = tau.index > k
    Z = azema(tree, tau).values[k]
    if np.any(alive & (Z <= ATOM_EPS)):
        leaf = int(np.flatnonzero(alive & (Z <= ATOM_EPS))[0])
        raise ZeroAzema(f"Z_{k} vanishes on pre-default node {tree.node_label(k, leaf)}")
    numerator = tree.average(np.asarray(H, dtype=float) * alive, k)
    return np.where(alive, numerator / np.where(alive, Z, 1.0), np.nan)


def _check_payoff(tree: ScenarioTree, f: np.ndarray, b: int) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (tree.n_leaves, tree.grid.u_size):
        raise LevelMismatch(f"payoff must have shape {(tree.n_leaves, tree.grid.u_size)}")
    for u in range(tree.grid.u_size):
        if not tree.is_measurable(f[:, u], b):
            raise LevelMismatch(f"payoff f(., {tree.grid.label(u)}) is not measurable "
                                f"at level {b}")
    return f


def conditional_expectation(tree: ScenarioTree, tau: RandomTime, p: DensityField,
                            f: np.ndarray, k: int, b: int) -> np.ndarray:
    """
    E[f(tau) | G_k] for a payoff f(leaf, u) measurable at level b >= k.

    Before default the key lemma applies; after default the value on the
    atom (node, tau = u) is ^o(f(u) p_b(u))_k / p_k(u).

    Args:
        tree: The scenario tree
        tau: The random time
        p: Density field populated up to level b
        f: Array [n_leaves, u_size]
        k: Conditioning level
        b: Measurability level of f

    Returns:
        Leaf array, NaN on null atoms

    Raises:
        ZeroDensity: If p_k(tau) vanishes on a post-default atom with mass
        LevelMismatch: If k > b, b lies beyond the density, or f is not
            measurable at b
    """
    if k > b:
        raise LevelMismatch(f"conditioning level {k} exceeds payoff level {b}")
    if b >= p.up_to:
        raise LevelMismatch(f"density is populated below level {p.up_to}, payoff level is {b}")
    f = _check_payoff(tree, f, b)
    leaves = np.arange(tree.n_leaves)
    out = key_lemma(tree, tau, f[leaves, tau.index], k)
    dead = tau.index <= k
    if np.any(dead):
        u = tau.index
        projected = np.array([tree.average(f[:, v] * p.values[b, :, v], k)
                              for v in range(k + 1)])
        safe_u = np.minimum(u, k)
        num = projected[safe_u, leaves]
        den = p.values[k, leaves, safe_u]
        charged = dead & (tree.leaf_prob > ATOM_EPS)
        zero = charged & (den <= ATOM_EPS)
        if np.any(zero):
            leaf = int(np.flatnonzero(zero)[0])
            raise ZeroDensity(f"p_{k}(tau) vanishes on node {tree.node_label(k, leaf)} with "
                              f"tau = {tree.grid.label(int(u[leaf]))}; the model is inconsistent")
        post = num / np.where(den > ATOM_EPS, den, 1.0)
        out = np.where(dead, post, out)
    return out


def conditional_expectation_residual(tree: ScenarioTree, tau: RandomTime, p: DensityField,
                                     f: np.ndarray, b: int) -> float:
    """Max over k <= b and charged atoms of |formula - enumeration|."""
    f = np.asarray(f, dtype=float)
    payoff = f[np.arange(tree.n_leaves), tau.index]
    worst = 0.0
    for k in range(b + 1):
        formula = conditional_expectation(tree, tau, p, f, k, b)
        direct = g_cond_expect(tree, tau, payoff, k)
        mask = ~np.isnan(direct)
        worst = max(worst, float(np.max(np.abs(formula[mask] - direct[mask]), initial=0.0)))
    return worst


@dataclass
class PtsReport:
    """Density positivity and the projection identity after default."""
    passed: bool
    min_density: float
    projection_residual: float


def pts_check(tree: ScenarioTree, tau: RandomTime, p: DensityField, b: int,
              tol: float = TOL) -> PtsReport:
    """
    On {tau <= t_k}, k <= b: p_k(tau) > 0 on charged leaves and
    p_k(u) = E[p_b(u) | F_k] at every atom u <= k.
    """
    leaves = np.arange(tree.n_leaves)
    min_density = np.inf
    residual = 0.0
    for k in range(b + 1):
        dead = (tau.index <= k) & (tree.leaf_prob > ATOM_EPS)
        if np.any(dead):
            values = p.values[k, leaves, np.minimum(tau.index, k)]
            min_density = min(min_density, float(np.min(values[dead])))
        for v in range(k + 1):
            gap = tree.average(p.values[b, :, v], k) - p.values[k, :, v]
            residual = max(residual, float(np.max(np.abs(np.where(p.atoms[v], gap, 0.0)))))
    passed = (min_density > ATOM_EPS) and residual <= tol
    return PtsReport(passed=passed, min_density=float(min_density), projection_residual=residual)
