"""
Verification suites.

A Scenario builds the tree objects (or the simulated model) once; each
suite records named checks against the statement they verify and writes
its CSV artifacts through the report.
"""

import csv
import logging
from contextlib import contextmanager
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict, List, Optional

import numpy as np

from src.copula import (
    CombinatorialOverflow,
    InvalidCopula,
    JointModel,
    NotDifferentiableMarginal,
    brute_force_joint_order_cdf,
    check_copula_axioms,
    export_order_cdf,
    make_copula,
    order_cdf,
    order_density,
    order_density_residual,
    sample_joint,
)
from src.cox import (
    BadNormalization,
    NotAbsolutelyContinuous,
    check_cox_property,
    closed_form_density,
    cox_measure,
    decide_differentiable,
    density_process,
    dual_projection_identity,
    girsanov_residual,
    image_measure,
)
from src.cox import density_martingale_residual as cox_density_martingale_residual
from src.enlargement import (
    NotGAdapted,
    ZeroAzemaPredictable,
    ZeroDensity,
    ZeroDensityPredictable,
    conditional_expectation_residual,
    cox_projection_residual,
    full_drift,
    g_cond_expect,
    key_lemma,
    projection_identity_sweep,
    mc_full_drift,
    optional_split,
    pts_check,
    split_residual,
)
from src.families import (
    AxiomViolation,
    NotDifferentiable,
    azema,
    check_axioms,
    check_imz,
    cox_family,
    density_martingale_residual,
    differentiate,
    im_from_time,
    reconstruction_residual,
    verify_mint,
)
from src.filtration import (
    ATOM_EPS,
    TOL,
    AdaptedProcess,
    InvalidSpec,
    LevelMismatch,
    NotIncreasing,
    NotSupermartingale,
    doob_meyer,
    normalize_A,
)
from src.natural import (
    ConditionViolated,
    EmptyJumpSetAtStep,
    HyZViolated,
    SchemeUnstable,
    StepModel,
    ZeroPredictableProjection,
    alternating_driver,
    build_imz,
    density_from_flow,
    finite_difference_check,
    markov_pair,
    mc_reconstruction_check,
    mtilde_tstats,
    simulate_model,
    solve_flows,
    validate_pair,
)

from .config import (
    ConfigError,
    ScenarioConfig,
    is_deterministic,
    marginal_processes,
    named_processes,
)
from .report import Report, SuiteError, SuiteResult


logger = logging.getLogger(__name__)

# Residual tolerance for identities computed by summation over a tree
SUM_TOL = 1e-10
FD_TOL = 1e-3

DOMAIN_ERRORS = (
    AxiomViolation, BadNormalization, CombinatorialOverflow, ConditionViolated,
    EmptyJumpSetAtStep, HyZViolated, InvalidCopula, InvalidSpec, LevelMismatch,
    NotAbsolutelyContinuous, NotDifferentiable, NotDifferentiableMarginal, NotGAdapted,
    NotIncreasing, NotSupermartingale, SchemeUnstable, ZeroAzemaPredictable, ZeroDensity,
    ZeroDensityPredictable, ZeroPredictableProjection, ValueError,
)


@contextmanager
def anchored(suite: str, anchor: str):
    """Re-raise domain errors as SuiteError naming the statement under check."""
    try:
        yield
    except DOMAIN_ERRORS as e:
        raise SuiteError(suite, anchor, e) from e


@dataclass
class Scenario:
    """Objects shared by the suites of one run."""
    config: ScenarioConfig
    tree: Optional[object] = None
    tau: Optional[object] = None
    A_given: Optional[AdaptedProcess] = None

    @classmethod
    def from_config(cls, config: ScenarioConfig) -> "Scenario":
        if config.engine == "mc":
            return cls(config)
        tree, tau, A = config.tree.build()
        if config.model == "natural" and tau is None and A is None:
            raise ConfigError("natural tree scenarios need tree.tau or tree.A")
        return cls(config, tree, tau, A)

    @property
    def horizon(self) -> int:
        horizon = self.tree.grid.horizon_levels
        if self.config.horizon is not None:
            horizon = min(horizon, int(self.config.horizon))
        return horizon

    @cached_property
    def Z(self) -> AdaptedProcess:
        if self.tau is not None:
            return azema(self.tree, self.tau)
        return AdaptedProcess(self.tree, 1.0 - self.A_given.values, "Z")

    @cached_property
    def decomposition(self):
        return doob_meyer(self.tree, self.Z)

    @cached_property
    def A(self) -> AdaptedProcess:
        """A for differentiation: the configured one, else the compensator of Z."""
        return self.A_given if self.A_given is not None else self.decomposition.A

    @cached_property
    def normalized_A(self) -> AdaptedProcess:
        """A itself when it stays below 1, else its normalized version."""
        if np.max(self.A.values) <= 1.0 + TOL:
            return self.A
        logger.info("A exceeds 1; using the normalized process for the Cox measure")
        return normalize_A(self.tree, self.A).A_bar

    @cached_property
    def natural_pair(self):
        g = self.config.mc.g if self.config.engine == "mc" else self.config.natural.g
        return markov_pair(g)

    @cached_property
    def model(self) -> StepModel:
        if self.config.engine == "mc":
            return simulate_model(self.config.mc)
        driver = alternating_driver(self.tree, self.config.natural.driver_scale)
        return StepModel.from_tree(self.decomposition, driver)

    @cached_property
    def family(self):
        model = self.config.model
        if model == "cox":
            return cox_family(self.tree, self.A)
        if model == "natural":
            return build_imz(self.natural_pair, self.model)
        if self.tau is not None:
            return im_from_time(self.tree, self.tau)
        return cox_family(self.tree, self.A)


def _indicator_payoffs(tree, t: int):
    """Indicators 1{node at level t} 1{u = v} over every node and u slot."""
    U = tree.grid.u_size
    for node in range(tree.n_nodes(t)):
        indicator = (tree.node_of_leaf[t] == node).astype(float)
        for v in range(U):
            f = np.zeros((tree.n_leaves, U))
            f[:, v] = indicator
            yield f


def run_im(scenario: Scenario, report: Report) -> SuiteResult:
    result = SuiteResult("im")
    tree = scenario.tree
    with anchored("im", "increasing-family axioms"):
        family = scenario.family
        axioms = check_axioms(family)
    result.check("axioms", "increasing-family axioms",
                 max(axioms.martingale, axioms.range_excess, axioms.monotone, axioms.terminal),
                 TOL, passed=axioms.passed)
    if axioms.violations:
        result.details["axiom_violations"] = axioms.violations
    report.add_artifact("family.csv", family.export_csv)

    with anchored("im", "iM_Z pinning to the Azema supermartingale"):
        imz = check_imz(family, scenario.Z)
    result.check("imz", "iM_Z pinning to the Azema supermartingale",
                 len(imz.violations), 0, passed=imz.passed)

    if scenario.tau is not None and scenario.config.model == "explicit-tree":
        with anchored("im", "conditional law of the time given F_t"):
            worst = 0.0
            for t in range(tree.n_levels):
                for f in _indicator_payoffs(tree, t):
                    worst = max(worst, verify_mint(tree, scenario.tau, family, f, t))
        result.check("mint", "conditional law of the time given F_t", worst, TOL)

    try:
        p = differentiate(family, scenario.A, up_to=scenario.horizon)
    except NotDifferentiable as e:
        logger.info(f"Family is not differentiable: {e}")
        result.details["differentiable"] = False
        result.details["witness"] = {"level": e.level, "node": e.node, "u": e.u}
        return result
    result.details["differentiable"] = True
    result.check("reconstruction", "differentiability of the family",
                 reconstruction_residual(family, p), SUM_TOL)
    result.check("density_martingale", "martingale property of the density",
                 density_martingale_residual(p), SUM_TOL)
    report.add_artifact("density.csv", p.export_csv)
    return result


def run_cox(scenario: Scenario, report: Report) -> SuiteResult:
    result = SuiteResult("cox")
    tree, tau = scenario.tree, scenario.tau
    A = scenario.normalized_A
    with anchored("cox", "Cox measure definition"):
        Qimg, Qcox = image_measure(tree, tau), cox_measure(tree, A)
    result.check("cox_property", "Cox measure definition",
                 check_cox_property(tree, Qcox, A), TOL)
    report.add_artifact("cox_measure.csv", Qcox.export_csv)

    decision = decide_differentiable(tree, tau, A, scenario.horizon)
    try:
        direct = differentiate(im_from_time(tree, tau), A, up_to=scenario.horizon)
    except NotDifferentiable:
        direct = None
    result.details["differentiable"] = decision.differentiable
    result.check("decision_agrees", "differentiability equals absolute continuity",
                 decision.differentiable == (direct is not None), None,
                 passed=decision.differentiable == (direct is not None))
    if not decision:
        result.details["witness"] = decision.witness
        return result

    p = decision.density
    result.check("density_agrees", "differentiability equals absolute continuity",
                 float(np.max(np.abs(p.values - direct.values))), SUM_TOL)
    with anchored("cox", "density of the image measure against the Cox measure"):
        process = density_process(Qimg, Qcox, scenario.horizon)
        girsanov, closed = 0.0, 0.0
        for level in process.levels:
            girsanov = max(girsanov, girsanov_residual(Qimg, Qcox, level))
            formula = closed_form_density(tree, scenario.Z, A, p, level.level)
            mask = level.defined & np.isfinite(formula)
            closed = max(closed, float(np.max(np.abs(formula[mask] - level.values[mask]),
                                              initial=0.0)))
    result.check("girsanov", "density of the image measure against the Cox measure",
                 girsanov, TOL)
    result.check("closed_form", "closed form of the density process", closed, SUM_TOL)
    result.check("density_process_martingale", "martingale property of the density",
                 cox_density_martingale_residual(Qcox, process), SUM_TOL)
    result.check("dual_projection", "dual projection of the default indicator",
                 dual_projection_identity(tree, tau, A, p), SUM_TOL)
    if decision.excluded:
        result.details["excluded_atoms"] = decision.excluded
    return result


def _collapse_checks(result: SuiteResult, family_values, A_values, density_values):
    result.check("cox_collapse_family", "Cox collapse under a deterministic Z",
                 float(np.nanmax(np.abs(family_values - A_values))), SUM_TOL)
    result.check("cox_collapse_density", "Cox collapse under a deterministic Z",
                 float(np.nanmax(np.abs(density_values - 1.0))), SUM_TOL)


def _natural_tree(scenario: Scenario, report: Report, result: SuiteResult):
    tree = scenario.tree
    pair, model = scenario.natural_pair, scenario.model
    levels = np.arange(tree.n_levels)
    with anchored("natural", "jump conditions of the natural pair"):
        flows = solve_flows(pair, model, levels)
        try:
            pair_report = validate_pair(pair, model, flows)
            result.check("jump_conditions", "jump conditions of the natural pair",
                         pair_report.min_slack, None, passed=True)
        except ConditionViolated as e:
            result.check("jump_conditions", "jump conditions of the natural pair",
                         str(e), None, passed=False)
            return
    with anchored("natural", "iM_Z family from the natural equation"):
        family = build_imz(pair, model)
        axioms = check_axioms(family)
        imz = check_imz(family, scenario.Z)
    result.check("axioms", "iM_Z family from the natural equation",
                 max(axioms.martingale, axioms.range_excess, axioms.monotone), TOL,
                 passed=axioms.passed)
    result.check("imz", "iM_Z family from the natural equation", len(imz.violations), 0,
                 passed=imz.passed)
    report.add_artifact("family.csv", family.export_csv)

    with anchored("natural", "density of the natural family"):
        flow_density = density_from_flow(pair, model)
        reference = differentiate(family, scenario.decomposition.A)
    up_to = reference.up_to
    gap = np.abs(flow_density.values[:up_to] - reference.values[:up_to])
    result.check("flow_density", "density of the natural family", float(np.max(gap)),
                 SUM_TOL)
    report.add_artifact("density.csv", flow_density.export_csv)

    if is_deterministic(tree, scenario.Z) and scenario.config.natural.g == 0:
        A = scenario.decomposition.A.values
        atoms = flow_density.atoms
        charged = [flow_density.values[k, atoms[v], v]
                   for k in range(up_to) for v in range(k + 1)]
        flat = np.concatenate(charged) if charged else np.ones(1)
        diagonal = np.array([family.values[u, k] for k in range(tree.n_levels)
                             for u in range(k + 1)])
        expected = np.array([A[u] for k in range(tree.n_levels) for u in range(k + 1)])
        _collapse_checks(result, diagonal, expected, flat)


def _write_mc_density(pair, model, starts, path):
    density = density_from_flow(pair, model, starts, keep=starts)
    w = model.weights
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["u", "t", "mean", "se"])
        for i, u in enumerate(density.starts):
            for j, t in enumerate(density.steps):
                if t < u:
                    continue
                values = density.values[i, j]
                mean = float(values @ w)
                se = float(np.sqrt(max(((values - mean) ** 2) @ w, 0.0) / values.size))
                writer.writerow([repr(float(model.times[u])), repr(float(model.times[t])),
                                 repr(mean), repr(se)])
    return path


def _natural_mc(scenario: Scenario, report: Report, result: SuiteResult):
    config = scenario.config.mc
    pair = scenario.natural_pair
    with anchored("natural", "simulation of the Azema supermartingale"):
        model = scenario.model
    starts = config.start_steps()
    tstats = mtilde_tstats(model)
    result.check("mtilde", "martingale property of m-tilde",
                 float(max(np.abs(tstats), default=0.0)), 3.0)
    result.details["mtilde_tstats"] = tstats

    with anchored("natural", "derivative of the flow"):
        fd = finite_difference_check(pair, model, int(starts[0]),
                                     float(1.0 - model.Z[starts[0], 0]),
                                     keep=starts)
    result.check("finite_difference", "derivative of the flow", fd, FD_TOL)

    with anchored("natural", "density reconstruction of the natural family"):
        recon = mc_reconstruction_check(pair, model, starts, int(starts[len(starts) // 2]),
                                        int(starts[-1]))
    result.check("reconstruction", "density reconstruction of the natural family",
                 abs(recon.family_mean - recon.density_mean), recon.tolerance,
                 passed=recon.passed)

    if config.sigma == 0 and config.g == 0:
        with anchored("natural", "Cox collapse under a deterministic Z"):
            family = build_imz(pair, model, starts, keep=starts)
            density = density_from_flow(pair, model, starts, keep=starts)
        A = model.A
        below = np.array([[family.steps[j] >= u for j in range(family.steps.size)]
                          for u in family.starts])
        family_values = np.stack([family.values[i, j] for i, j in zip(*np.nonzero(below))])
        expected = np.stack([A[family.starts[i]] for i, j in zip(*np.nonzero(below))])
        density_values = np.stack([density.values[i, j] for i, j in zip(*np.nonzero(below))])
        _collapse_checks(result, family_values, expected, density_values)

    report.add_artifact("density.csv", lambda path: _write_mc_density(pair, model, starts, path))


def run_natural(scenario: Scenario, report: Report) -> SuiteResult:
    result = SuiteResult("natural")
    if scenario.config.engine == "mc":
        _natural_mc(scenario, report, result)
    else:
        _natural_tree(scenario, report, result)
    return result


def run_copula(scenario: Scenario, report: Report) -> SuiteResult:
    result = SuiteResult("copula")
    config = scenario.config.copula
    tree = scenario.tree
    with anchored("copula", "copula axioms"):
        marginals = marginal_processes(tree, config, scenario.A_given)
        copula = make_copula(config.family, len(marginals), config.theta)
        axioms = check_copula_axioms(copula)
    result.check("copula_axioms", "copula axioms",
                 max(axioms.grounded, axioms.uniform_margins, axioms.monotone,
                     axioms.partials), 1e-6, passed=axioms.passed)

    shared = scenario.A_given if scenario.A_given is not None else marginals[0]
    T = min(scenario.horizon, tree.n_levels) - 1
    with anchored("copula", "inclusion-exclusion law of order statistics"):
        joint = JointModel([cox_family(tree, A) for A in marginals], copula, shared, T)
        worst = 0.0
        for t in range(T + 1):
            for i in range(1, joint.k + 1):
                for u in range(t + 1):
                    gap = order_cdf(joint, i, u, t) - brute_force_joint_order_cdf(joint, i, u, t)
                    worst = max(worst, float(np.max(np.abs(gap))))
    result.check("order_cdf", "inclusion-exclusion law of order statistics", worst, TOL)

    with anchored("copula", "monotonicity in the order index"):
        drop = 0.0
        for u in range(T + 1):
            values = np.array([order_cdf(joint, i, u, T) for i in range(1, joint.k + 1)])
            drop = max(drop, float(np.max(np.diff(values, axis=0), initial=0.0)))
    result.check("order_monotone", "monotonicity in the order index", drop, TOL)

    if copula.continuously_differentiable:
        with anchored("copula", "density of order statistics"):
            residual = max(order_density_residual(joint, i, T) for i in range(1, joint.k + 1))
            negative = min(float(np.min(order_density(joint, i, T)))
                           for i in range(1, joint.k + 1))
        result.check("order_density", "density of order statistics", residual, SUM_TOL)
        result.check("order_density_sign", "density of order statistics",
                     max(-negative, 0.0), SUM_TOL)
    else:
        result.details["order_density"] = f"{copula.name} copula is not differentiable"

    if config.samples:
        seed = scenario.config.seed if scenario.config.seed is not None else 0
        with anchored("copula", "sampled order statistics"):
            sample = sample_joint(joint, seed, config.samples)
        worst_t = 0.0
        for i in range(1, joint.k + 1):
            for u in range(T + 1):
                expected = float(tree.expectation(order_cdf(joint, i, u, T)))
                observed = sample.order_frequencies(i, u)
                se = np.sqrt(max(expected * (1.0 - expected), ATOM_EPS) / config.samples)
                worst_t = max(worst_t, abs(observed - expected) / se)
        result.check("sampled_order_cdf", "sampled order statistics", worst_t, 3.0)

    report.add_artifact("order_cdf.csv", lambda path: export_order_cdf(joint, path))
    return result


def _write_tree_drift(tree, reports: Dict[str, object], path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["process", "t", "pre_drift", "post_drift", "test_residual"])
        for name, drift in reports.items():
            residuals = drift.test.residuals
            for k in range(drift.up_to):
                pre = float(tree.expectation(drift.pre_increments[k]))
                post = float(tree.expectation(drift.post_increments[k]))
                residual = float(residuals[k - 1]) if 0 < k <= len(residuals) else 0.0
                writer.writerow([name, repr(float(tree.grid.times[k])), repr(pre), repr(post),
                                 repr(residual)])
    return path


def _write_mc_drift(reports: Dict[str, object], path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["process", "bucket", "pre_t", "post_t", "raw_t"])
        for name, drift in reports.items():
            for b, (pre, post, raw) in enumerate(zip(drift.pre_tstats, drift.post_tstats,
                                                     drift.raw_tstats)):
                writer.writerow([name, b, repr(float(pre)), repr(float(post)), repr(float(raw))])
    return path


def _enlargement_mc(scenario: Scenario, report: Report, result: SuiteResult):
    config = scenario.config.mc
    reports = {}
    for process in ("M", "Y"):
        with anchored("enlargement", "enlargement drift formula"):
            drift = mc_full_drift(scenario.natural_pair, scenario.model, config.start_stride,
                                  config.seed, process=process)
        result.check(f"drift_{process}", "enlargement drift formula", drift.max_abs_t, 3.0,
                     passed=drift.passed)
        result.details[f"drift_{process}"] = drift.to_dict()
        reports[process] = drift
    report.add_artifact("drift.csv", lambda path: _write_mc_drift(reports, path))


def _frozen_after_u(family) -> bool:
    """M^u_k = M^u_u for every k >= u: the time is a Cox time of its own compensator."""
    n = family.tree.n_levels
    return all(np.max(np.abs(family.values[u, k] - family.values[u, u]), initial=0.0) <= TOL
               for u in range(n) for k in range(u, n))


def _enlargement_tree(scenario: Scenario, report: Report, result: SuiteResult):
    tree, tau = scenario.tree, scenario.tau
    horizon = scenario.horizon

    decision = decide_differentiable(tree, tau, scenario.normalized_A, horizon)
    try:
        family = im_from_time(tree, tau)
        p = differentiate(family, scenario.A, up_to=horizon)
    except NotDifferentiable as e:
        result.check("differentiable", "differentiability of the family", str(e), None,
                     passed=False)
        return
    result.details["cox_decision"] = decision.differentiable

    with anchored("enlargement", "key lemma"):
        worst = 0.0
        for k in range(tree.n_levels):
            H = [(tau.index == tree.grid.infinity_index).astype(float)]
            H += [np.eye(tree.n_leaves)[leaf] for leaf in range(tree.n_leaves)]
            for h in H:
                formula = key_lemma(tree, tau, h, k)
                direct = g_cond_expect(tree, tau, h, k)
                alive = (tau.index > k) & ~np.isnan(direct)
                worst = max(worst, float(np.max(np.abs(formula[alive] - direct[alive]),
                                                initial=0.0)))
    result.check("key_lemma", "key lemma", worst, TOL)

    b = horizon - 1
    with anchored("enlargement", "conditioning formula"):
        worst = 0.0
        for f in _indicator_payoffs(tree, b):
            worst = max(worst, conditional_expectation_residual(tree, tau, p, f, b))
    result.check("conditioning", "conditioning formula", worst, SUM_TOL)

    with anchored("enlargement", "positivity of the density after default"):
        pts = pts_check(tree, tau, p, b)
    result.check("pts", "positivity of the density after default",
                 pts.projection_residual, TOL, passed=pts.passed)
    result.details["min_density_after_default"] = pts.min_density

    with anchored("enlargement", "parametered optional projection"):
        F = (tau.index[:, None] <= np.arange(tree.grid.u_size)[None, :]).astype(float)
        result.check("parametered_projection", "parametered optional projection",
                     projection_identity_sweep(tree, scenario.A, F), SUM_TOL)
        result.check("cox_projection", "parametered optional projection",
                     cox_projection_residual(tree, scenario.normalized_A, F), SUM_TOL)

    immersed = _frozen_after_u(family)
    result.details["immersed"] = immersed
    drifts = {}
    driver = alternating_driver(tree, scenario.config.natural.driver_scale)
    candidates = {
        "M": scenario.decomposition.M,
        "Y": AdaptedProcess(tree, np.cumsum(driver.increments[:, :, 0], axis=0), "Y"),
    }
    candidates.update(named_processes(tree, scenario.config))
    for name, X in candidates.items():
        with anchored("enlargement", "enlargement drift formula"):
            drift = full_drift(tree, tau, p, X, horizon, scenario.decomposition)
        result.check(f"drift_{name}", "enlargement drift formula", drift.test.max_residual,
                     SUM_TOL, passed=drift.passed)
        drifts[name] = drift
        if immersed:
            result.check(f"immersion_{name}", "immersion of a Cox time",
                         float(np.max(np.abs(drift.pre_increments))
                               + np.max(np.abs(drift.post_increments))), TOL)

    with anchored("enlargement", "optional splitting formula"):
        worst = 0.0
        times = tree.grid.times
        tau_time = np.array([times[i] if i < tree.n_levels else np.inf for i in tau.index])
        processes = [
            tau.jump_process(),
            np.maximum(np.asarray(times)[:, None] - tau_time[None, :], 0.0),
            drifts["M"].compensated,
        ]
        for X in processes:
            pair = optional_split(tree, tau, X, horizon)
            worst = max(worst, split_residual(pair, X, horizon))
    result.check("optional_split", "optional splitting formula", worst, TOL)

    report.add_artifact("drift.csv", lambda path: _write_tree_drift(tree, drifts, path))


def run_enlargement(scenario: Scenario, report: Report) -> SuiteResult:
    result = SuiteResult("enlargement")
    if scenario.config.engine == "mc":
        _enlargement_mc(scenario, report, result)
    else:
        _enlargement_tree(scenario, report, result)
    return result


SUITE_RUNNERS: Dict[str, Callable[[Scenario, Report], SuiteResult]] = {
    "im": run_im,
    "cox": run_cox,
    "natural": run_natural,
    "copula": run_copula,
    "enlargement": run_enlargement,
}


def run(config: ScenarioConfig, suites: Optional[List[str]] = None,
        write: bool = True) -> Report:
    """
    Run the configured suites (or the given subset) and write the report.

    Raises:
        ConfigError: If the scenario cannot be built
        SuiteError: If a suite hits a domain error
    """
    scenario = Scenario.from_config(config)
    report = Report(scenario=config.name, config=config.to_dict(),
                    out_dir=config.resolved_out_dir())
    for name in suites or config.suites:
        logger.info(f"Running {name} suite on {config.name!r}")
        report.suites[name] = SUITE_RUNNERS[name](scenario, report)
    if write:
        report.write()
    return report
