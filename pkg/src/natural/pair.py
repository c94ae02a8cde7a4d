"""
Markovian functionals, jump sets and validation of the jump conditions.

The Markovian functional is F(t, x) = phi(pp - x) phi(x) g(t, x) with
pp = ^p(1-Z)_t. A driver jump z is admissible at t when
2 |g(t, x)^T z| < 1 + dm and d/dx F(t, x)^T z > -(1 + dm) for all x.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.filtration import TOL

from .step_model import StepModel


logger = logging.getLogger(__name__)

X_GRID = np.linspace(-1.0, 2.0, 301)
# Boundary entries kept in a report
MAX_BOUNDARY = 50


class ConditionViolated(Exception):
    """Raised when a jump condition fails on a supplied path."""

    def __init__(self, message: str, conditions: Tuple[str, ...] = (), location: dict = None):
        super().__init__(message)
        self.conditions = conditions
        self.location = location or {}


class EmptyJumpSetAtStep(Exception):
    """Raised when 1 + dm <= 0 leaves no admissible driver jump."""
    pass


@dataclass(frozen=True)
class SaturatingShape:
    """x on [0, 1], 2 - exp(-(x - 1)) above 1, exp(x) - 1 below 0."""

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 1.0, 2.0 - np.exp(-(np.minimum(x, 50.0) - 1.0)),
                        np.where(x < 0.0, np.exp(np.maximum(x, -50.0)) - 1.0, x))

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 1.0, np.exp(-(np.minimum(x, 50.0) - 1.0)),
                        np.where(x < 0.0, np.exp(np.maximum(x, -50.0)), 1.0))


@dataclass(frozen=True)
class ConstantG:
    """Constant g with vanishing derivative."""
    value: Union[float, Tuple[float, ...]] = 0.0

    @property
    def dim(self) -> int:
        return int(np.size(self.value))

    def __call__(self, t, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.atleast_1d(np.asarray(self.value, dtype=float)),
                               x.shape + (self.dim,))

    def derivative(self, t, x):
        return np.zeros(np.shape(x) + (self.dim,))


@dataclass(frozen=True)
class CallableG:
    """
    g given by a function of (t, x) returning [..., m]; the x-derivative is
    taken by central differences unless supplied.
    """
    func: Callable
    dim: int = 1
    dfunc: Optional[Callable] = None
    h: float = 1e-6

    def __call__(self, t, x):
        out = np.asarray(self.func(t, np.asarray(x, dtype=float)), dtype=float)
        return out.reshape(np.shape(x) + (self.dim,))

    def derivative(self, t, x):
        if self.dfunc is not None:
            out = np.asarray(self.dfunc(t, np.asarray(x, dtype=float)), dtype=float)
            return out.reshape(np.shape(x) + (self.dim,))
        x = np.asarray(x, dtype=float)
        return (self(t, x + self.h) - self(t, x - self.h)) / (2.0 * self.h)


@dataclass(frozen=True)
class MarkovFunctional:
    g: Union[ConstantG, CallableG]
    phi: SaturatingShape = field(default_factory=SaturatingShape)

    @property
    def dim(self) -> int:
        return self.g.dim

    def value(self, t, x, pp):
        """F(t, x) = phi(pp - x) phi(x) g(t, x), shape x.shape + (m,)."""
        x = np.asarray(x, dtype=float)
        scale = self.phi(pp - x) * self.phi(x)
        return scale[..., None] * self.g(t, x)

    def dx(self, t, x, pp):
        x = np.asarray(x, dtype=float)
        a, b = self.phi(pp - x), self.phi(x)
        da, db = -self.phi.derivative(pp - x), self.phi.derivative(x)
        return ((da * b + a * db)[..., None] * self.g(t, x)
                + (a * b)[..., None] * self.g.derivative(t, x))


@dataclass(frozen=True)
class JumpSet:
    """Membership oracle for admissible driver jumps."""
    functional: MarkovFunctional
    x_grid: np.ndarray = field(default_factory=lambda: X_GRID)

    def require_nonempty(self, dm: float):
        if 1.0 + dm <= 0.0:
            raise EmptyJumpSetAtStep(f"1 + dm = {1.0 + dm:.6g} leaves no admissible jump")

    def first_condition(self, z, t: float, dm: float) -> bool:
        z = np.atleast_1d(np.asarray(z, dtype=float))
        g = self.functional.g(t, self.x_grid)
        return bool(np.all(2.0 * np.abs(g @ z) < 1.0 + dm))

    def second_condition(self, z, t: float, dm: float, pp: float) -> bool:
        z = np.atleast_1d(np.asarray(z, dtype=float))
        dF = self.functional.dx(t, self.x_grid, pp)
        return bool(np.all(dF @ z > -(1.0 + dm)))

    def contains(self, z, t: float, dm: float, pp: float) -> bool:
        self.require_nonempty(dm)
        return self.first_condition(z, t, dm) and self.second_condition(z, t, dm, pp)

    def check_model(self, model: StepModel) -> List[Tuple[int, int]]:
        """(step, path) pairs whose driver jump lies outside the jump set."""
        outside = []
        for k in range(1, model.n_steps):
            for p in range(model.n_paths):
                z = model.dY[k, p]
                if not np.any(z):
                    continue
                if 1.0 + model.dm[k, p] <= 0.0:
                    outside.append((k, p))
                    continue
                if not self.contains(z, model.times[k], model.dm[k, p], model.pp[k, p]):
                    outside.append((k, p))
        return outside


@dataclass(frozen=True)
class NaturalPair:
    functional: MarkovFunctional
    jump_set: JumpSet

    @property
    def dim(self) -> int:
        return self.functional.dim


def markov_pair(g: Union[float, ConstantG, CallableG], phi: Optional[SaturatingShape] = None,
                model: Optional[StepModel] = None) -> NaturalPair:
    """
    Build the Markovian pair with its jump-set oracle.

    Raises:
        ValueError: If phi breaks |phi| <= 2 or |phi(x)/x| <= 1 on the x-grid,
            or g's dimension does not match the model's driver
    """
    if not isinstance(g, (ConstantG, CallableG)):
        g = ConstantG(float(g))
    phi = phi or SaturatingShape()
    grid = np.linspace(-20.0, 20.0, 4001)
    values = phi(grid)
    nonzero = grid != 0
    if np.max(np.abs(values)) > 2.0 + 1e-12 or \
            np.max(np.abs(values[nonzero] / grid[nonzero])) > 1.0 + 1e-12:
        raise ValueError("shaping function must satisfy |phi| <= 2 and |phi(x)/x| <= 1")
    if model is not None and model.dim != g.dim:
        raise ValueError(f"g has dimension {g.dim} but the driver has {model.dim}")
    functional = MarkovFunctional(g=g, phi=phi)
    return NaturalPair(functional=functional, jump_set=JumpSet(functional))


@dataclass
class PairReport:
    passed: bool
    min_slack: dict = field(default_factory=dict)
    boundary: List[Tuple[str, int, str]] = field(default_factory=list)
    integrability: str = "vacuous at finite scale"
    jump_set_violations: int = 0


def _path_label(model: StepModel, p: int) -> str:
    return model.tree.leaf_labels[p] if model.tree is not None else str(p)


def validate_pair(pair: NaturalPair, model: StepModel, flows, tol: float = TOL) -> PairReport:
    """
    Check the three jump conditions on every step of every supplied flow.

    (i)  dm - F(X)^T dY / (pp - X_) > -1
    (ii) dm + F(X)^T dY / X_ >= -1
    (iii) dm + (F(X) - F(X'))^T dY / (X_ - X'_) >= -1 for pairs of flows
    Terms with a vanishing denominator are dropped. Slack within tol of
    the bound is recorded as a boundary point, not a violation.

    Args:
        pair: The pair
        model: Step model the flows were computed on
        flows: FlowBundle from solve_flows

    Raises:
        ConditionViolated: Listing every failed condition and the first
            location for each
    """
    report = PairReport(passed=True, min_slack={"i": np.inf, "ii": np.inf, "iii": np.inf})
    failures = {}
    functional = pair.functional
    starts = np.asarray(flows.starts)
    steps = list(flows.keep)

    def record(cond: str, slack: np.ndarray, k: int, mask: np.ndarray):
        slack = np.where(mask, slack, np.inf)
        worst = float(np.min(slack))
        report.min_slack[cond] = min(report.min_slack[cond], worst)
        if worst < -tol and cond not in failures:
            p = int(np.argmin(slack))
            failures[cond] = {"step": k, "path": _path_label(model, p),
                              "slack": worst}
        touching = np.flatnonzero(np.abs(slack) <= tol)
        for p in touching:
            if len(report.boundary) < MAX_BOUNDARY:
                report.boundary.append((cond, k, _path_label(model, int(p))))

    for j in range(1, len(steps)):
        k, prev = steps[j], steps[j - 1]
        if k != prev + 1:
            raise ValueError("flows must be recorded on consecutive steps to validate")
        t, dm, pp, dY = model.times[k], model.dm[k], model.pp[k], model.dY[k]
        active = np.flatnonzero(starts < k)
        if not active.size:
            continue
        X_ = flows.X[active, j - 1]
        F = functional.value(t, X_, pp)
        FdY = np.sum(F * dY, axis=-1)
        for row, s in enumerate(active):
            x = X_[row]
            gap = pp - x
            ok = np.abs(gap) > tol
            lhs = dm - np.where(ok, FdY[row] / np.where(ok, gap, 1.0), 0.0)
            record("i", lhs + 1.0, k, np.ones_like(x, dtype=bool))
            ok = np.abs(x) > tol
            lhs = dm + np.where(ok, FdY[row] / np.where(ok, x, 1.0), 0.0)
            record("ii", lhs + 1.0, k, np.ones_like(x, dtype=bool))
        pairs = [(a, b) for a in range(active.size) for b in range(a + 1, active.size)]
        if active.size > 12:
            pairs = [(a, a + 1) for a in range(active.size - 1)]
        for a, b in pairs:
            xa, xb = X_[a], X_[b]
            inside = (xa >= -tol) & (xa <= 1 + tol) & (xb >= -tol) & (xb <= 1 + tol)
            diff = xa - xb
            ok = np.abs(diff) > tol
            lhs = dm + np.where(ok, (FdY[a] - FdY[b]) / np.where(ok, diff, 1.0), 0.0)
            record("iii", lhs + 1.0, k, inside)

    if failures:
        report.passed = False
        conds = tuple(sorted(failures))
        first = failures[conds[0]]
        raise ConditionViolated(
            f"jump condition(s) {', '.join(conds)} violated; first at step "
            f"{first['step']} path {first['path']} (slack {first['slack']:.3g})",
            conditions=conds, location=failures)
    if model.exact:
        report.jump_set_violations = len(pair.jump_set.check_model(model))
    if report.boundary:
        logger.warning(f"Jump conditions attain their bound at {len(report.boundary)} point(s)")
    return report
