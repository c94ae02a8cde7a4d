"""
Drift of base-filtration martingales in the enlarged filtration.

Before default a martingale X stopped at tau is compensated by

    sum_{s <= k, s <= tau} (d<M, X>_s + dB^X_s) / Z_{s-1},

with B^X the predictable dual projection of dX_tau 1{tau <= k}. After
default the compensator is

    sum_{s <= k, tau < s} d<X, p(tau)>_s / p_{s-1}(tau),

with <X, p(u)> the compensator of dX dp(u). Brackets on trees condition
the increment products on the previous level.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from src.families import DensityField, azema
from src.filtration import (
    ATOM_EPS,
    AdaptedProcess,
    Decomposition,
    RandomTime,
    ScenarioTree,
    doob_meyer,
    dual_projection,
    predictable_bracket,
)
from src.natural import NaturalPair, StepModel, bucket_tstats, build_imz

from .progressive import GTestReport, g_martingale_test


logger = logging.getLogger(__name__)

# |t| bound of the Monte Carlo martingale test
T_BOUND = 3.0


class ZeroAzemaPredictable(Exception):
    """Raised when Z_{s-1} vanishes where the pre-default drift is charged."""
    pass


class ZeroDensityPredictable(Exception):
    """Raised when p_{s-1}(tau) vanishes where the post-default drift is charged."""
    pass


def _martingale_increments(X: AdaptedProcess) -> np.ndarray:
    dX = np.array(X.increments())
    dX[0] = 0.0
    return dX


@dataclass(frozen=True, eq=False)
class JeulinYorDrift:
    """
    Attributes:
        bracket: <M, X>
        B: Predictable dual projection of dX_tau 1{tau <= k}
        increments: Charged drift increments [n_levels, n_leaves]
        compensated: X stopped at tau minus the drift
        test: Enlarged-filtration martingale test of the compensated process
    """
    bracket: AdaptedProcess
    B: AdaptedProcess
    increments: np.ndarray
    compensated: np.ndarray
    test: GTestReport


def jeulin_yor_drift(tree: ScenarioTree, tau: RandomTime, X: AdaptedProcess,
                     decomposition: Optional[Decomposition] = None) -> JeulinYorDrift:
    """
    Pre-default compensator of an F-martingale stopped at tau.

    Raises:
        ZeroAzemaPredictable: If Z_{s-1} vanishes on a leaf with tau >= s
    """
    decomposition = decomposition or doob_meyer(tree, azema(tree, tau))
    Z = decomposition.Z.values
    bracket = predictable_bracket(tree, decomposition.M, X)
    dX = _martingale_increments(X)
    levels = np.arange(tree.n_levels)[:, None]
    raw = np.cumsum(dX * (tau.index[None, :] == levels), axis=0)
    B = dual_projection(tree, raw, mode="predictable", increasing=False)
    d_bracket, d_B = bracket.increments(), B.increments()
    increments = np.zeros((tree.n_levels, tree.n_leaves))
    for s in range(1, tree.n_levels):
        charged = tau.index >= s
        zero = charged & (Z[s - 1] <= ATOM_EPS)
        if np.any(zero):
            leaf = int(np.flatnonzero(zero)[0])
            raise ZeroAzemaPredictable(f"Z_{s - 1} vanishes on node "
                                       f"{tree.node_label(s - 1, leaf)} before default")
        increments[s] = np.where(charged, (d_bracket[s] + d_B[s])
                                 / np.where(charged, Z[s - 1], 1.0), 0.0)
    stop = np.minimum(levels, tau.index[None, :])
    stopped = X.values[stop, np.arange(tree.n_leaves)[None, :]]
    compensated = stopped - np.cumsum(increments, axis=0)
    test = g_martingale_test(tree, tau, compensated)
    logger.debug(f"Pre-default drift: max |increment| {np.max(np.abs(increments)):.3g}, "
                 f"test residual {test.max_residual:.3g}")
    return JeulinYorDrift(bracket=bracket, B=B, increments=increments,
                          compensated=compensated, test=test)


@dataclass
class DriftReport:
    """Pre- and post-default drift terms and the compensated martingale test."""
    pre_increments: np.ndarray
    post_increments: np.ndarray
    compensated: np.ndarray
    test: GTestReport
    up_to: int
    bracket: Optional[AdaptedProcess] = None
    B: Optional[AdaptedProcess] = None

    @property
    def passed(self) -> bool:
        return self.test.passed

    @property
    def zero_drift(self) -> bool:
        return bool(np.max(np.abs(self.pre_increments), initial=0.0) <= ATOM_EPS
                    and np.max(np.abs(self.post_increments), initial=0.0) <= ATOM_EPS)

    def to_dict(self) -> dict:
        return {
            "levels": self.up_to,
            "pre_default": {"max_abs_increment": float(np.max(np.abs(self.pre_increments)))},
            "post_default": {"max_abs_increment": float(np.max(np.abs(self.post_increments)))},
            "zero_drift": self.zero_drift,
            "test": self.test.to_dict(),
        }


def full_drift(tree: ScenarioTree, tau: RandomTime, p: DensityField, X: AdaptedProcess,
               horizon: Optional[int] = None,
               decomposition: Optional[Decomposition] = None) -> DriftReport:
    """
    Compensate an F-martingale on both sides of tau up to the horizon.

    Args:
        tree: The scenario tree
        tau: The random time
        p: Density of the family of tau
        X: F-martingale
        horizon: Levels k < horizon are compensated (at most p.up_to)

    Raises:
        ZeroDensityPredictable: If p_{s-1}(tau) vanishes on a charged leaf
        ZeroAzemaPredictable: Propagated from the pre-default term
    """
    up_to = p.up_to if horizon is None else min(horizon, p.up_to)
    pre = jeulin_yor_drift(tree, tau, X, decomposition)
    dX = _martingale_increments(X)
    leaves = np.arange(tree.n_leaves)
    post = np.zeros((tree.n_levels, tree.n_leaves))
    for s in range(1, up_to):
        dead = tau.index < s
        if not np.any(dead):
            continue
        dp = p.values[s, :, :s] - p.values[s - 1, :, :s]
        bracket = tree.average((dX[s][:, None] * dp).T, s - 1).T
        u = np.minimum(tau.index, s - 1)
        previous = p.values[s - 1, leaves, u]
        charged = dead & (tree.leaf_prob > ATOM_EPS)
        zero = charged & (previous <= ATOM_EPS)
        if np.any(zero):
            leaf = int(np.flatnonzero(zero)[0])
            raise ZeroDensityPredictable(
                f"p_{s - 1}(tau) vanishes on node {tree.node_label(s - 1, leaf)} "
                f"after default at {tree.grid.label(int(tau.index[leaf]))}")
        post[s] = np.where(charged, bracket[leaves, u] / np.where(charged, previous, 1.0), 0.0)
    pre_inc = pre.increments[:up_to]
    compensated = X.values[:up_to] - np.cumsum(pre_inc + post[:up_to], axis=0)
    test = g_martingale_test(tree, tau, compensated, up_to=up_to)
    if not test.passed:
        logger.warning(f"Compensated process fails the martingale test: {test.offending}")
    return DriftReport(pre_increments=pre_inc, post_increments=post[:up_to],
                       compensated=compensated, test=test, up_to=up_to,
                       bracket=pre.bracket, B=pre.B)


@dataclass
class MCDriftReport:
    """Bucketed t-statistics of the compensated increments on simulated paths."""
    pre_tstats: List[float] = field(default_factory=list)
    post_tstats: List[float] = field(default_factory=list)
    raw_tstats: List[float] = field(default_factory=list)
    n_paths: int = 0
    defaulted: float = 0.0

    @property
    def max_abs_t(self) -> float:
        return float(max(np.abs(self.pre_tstats + self.post_tstats), default=0.0))

    @property
    def passed(self) -> bool:
        return self.max_abs_t <= T_BOUND

    def to_dict(self) -> dict:
        return {"pre_tstats": self.pre_tstats, "post_tstats": self.post_tstats,
                "raw_tstats": self.raw_tstats, "max_abs_t": self.max_abs_t,
                "passed": self.passed, "paths": self.n_paths,
                "defaulted_fraction": self.defaulted}


def mc_full_drift(pair: NaturalPair, model: StepModel, stride: int, seed: int,
                  process: str = "M", buckets: int = 4) -> MCDriftReport:
    """
    Compensated martingale test on simulated paths.

    Times are drawn on the start grid (every `stride` steps) from the
    conditional law u -> M^u_T of the flow family, so the conditional
    probability of a start cell plays the role of p_s(u) dA_u. Brackets are
    realized covariations over one start cell.

    Args:
        pair: The pair
        model: Simulated step model
        stride: Spacing of the start grid
        seed: Seed of the time draws
        process: "M" (martingale part of Z) or "Y" (the driver)
        buckets: Number of bucketed t-statistics per side
    """
    grid = np.arange(0, model.n_steps, stride)
    family = build_imz(pair, model, starts=grid, keep=grid)
    M = np.nan_to_num(family.values)                 # [S, S, P]
    S, P = grid.size, model.n_paths
    if process == "M":
        X = np.cumsum(model.dM, axis=0)[grid]
    elif process == "Y":
        X = np.cumsum(model.dY[..., 0], axis=0)[grid]
    else:
        raise ValueError(f"unknown process {process!r}; expected 'M' or 'Y'")
    Z = model.Z[grid]

    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    draws = rng.random(P)
    tau = np.sum(M[:, -1, :] < draws[None, :], axis=0)     # S means beyond the window

    # cell masses D_j(i) = M^{u_i}_{u_j} - M^{u_{i-1}}_{u_j}
    D = np.diff(M, axis=0, prepend=0.0)
    paths = np.arange(P)
    pre_inc = np.zeros((S, P))
    post_inc = np.zeros((S, P))
    raw = np.zeros((S, P))
    for j in range(1, S):
        dX = X[j] - X[j - 1]
        raw[j] = dX * (tau >= j)
        # Q[tau = u_j | F_{u_j}]
        q = D[j, j]
        alive = tau >= j
        drift = dX * (Z[j] - Z[j - 1] + q) / np.maximum(Z[j - 1], ATOM_EPS)
        pre_inc[j] = np.where(alive, dX - drift, 0.0)
        dead = tau < j
        i = np.minimum(tau, S - 1)
        cell_prev = D[i, j - 1, paths]
        cell_now = D[i, j, paths]
        ok = dead & (cell_prev > ATOM_EPS)
        post_inc[j] = np.where(ok, dX - dX * (cell_now - cell_prev)
                               / np.where(ok, cell_prev, 1.0), 0.0)
    w = model.weights
    report = MCDriftReport(pre_tstats=bucket_tstats(pre_inc, w, buckets),
                           post_tstats=bucket_tstats(post_inc, w, buckets),
                           raw_tstats=bucket_tstats(raw, w, buckets),
                           n_paths=P, defaulted=float(np.mean(tau < S)))
    logger.info(f"MC drift test on {P} paths: max |t| = {report.max_abs_t:.3g}")
    return report
