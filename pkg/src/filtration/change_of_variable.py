"""
Right-inverse of nondecreasing functions and the normalization of increasing
processes.

Functions are piecewise linear between knots with jumps allowed at knots;
``a(0-) = left_values[0]`` (zero by default).
"""

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy import integrate

from .processes import AdaptedProcess
from .tree import InvalidSpec, ScenarioTree


logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class StepLinearFunction:
    """
    Nonnegative nondecreasing right-continuous function on [0, inf).

    Args:
        knots: Increasing knots starting at 0
        values: a(x_i), the right values at the knots
        left_values: a(x_i-), the left limits at the knots

    Raises:
        InvalidSpec: If the data do not describe a nonnegative nondecreasing
            function
    """
    knots: np.ndarray
    values: np.ndarray
    left_values: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.knots, dtype=float)
        v = np.asarray(self.values, dtype=float)
        lv = np.asarray(self.left_values, dtype=float)
        if not (x.shape == v.shape == lv.shape) or x.ndim != 1 or x.size == 0:
            raise InvalidSpec("knots, values and left values must be 1-d and aligned")
        if x[0] != 0.0 or np.any(np.diff(x) <= 0):
            raise InvalidSpec("knots must start at 0 and increase strictly")
        if lv[0] < 0 or np.any(lv > v) or np.any(v[:-1] > lv[1:]):
            raise InvalidSpec("function must be nonnegative and nondecreasing")
        for arr, name in ((x, "knots"), (v, "values"), (lv, "left_values")):
            object.__setattr__(self, name, arr)

    @classmethod
    def from_points(cls, knots: Sequence[float], values: Sequence[float]) -> "StepLinearFunction":
        """Continuous piecewise-linear function through the given points (a(0-) = a(0))."""
        values = np.asarray(values, dtype=float)
        left = values.copy()
        return cls(np.asarray(knots, dtype=float), values, left)

    @classmethod
    def step(cls, jump_times: Sequence[float], jump_sizes: Sequence[float]) -> "StepLinearFunction":
        """Pure-jump function with the given jumps (a jump at 0 is allowed)."""
        times = [float(t) for t in jump_times]
        sizes = [float(s) for s in jump_sizes]
        knots = sorted(set([0.0] + times))
        values, left = [], []
        level = 0.0
        for x in knots:
            left.append(level)
            level += sum(s for t, s in zip(times, sizes) if t == x)
            values.append(level)
        return cls(np.array(knots), np.array(values), np.array(left))

    def __call__(self, u: float) -> float:
        if u < 0:
            return 0.0
        x, v, lv = self.knots, self.values, self.left_values
        i = int(np.searchsorted(x, u, side="right")) - 1
        if i == x.size - 1:
            return float(v[-1])
        return float(v[i] + (lv[i + 1] - v[i]) * (u - x[i]) / (x[i + 1] - x[i]))

    def left_limit(self, u: float) -> float:
        """a(u-)."""
        if u <= 0:
            return float(self.left_values[0]) if u == 0 else 0.0
        hit = np.flatnonzero(self.knots == u)
        if hit.size:
            return float(self.left_values[hit[0]])
        return self(u)

    def jumps(self):
        """Iterate (x_i, jump size) over knots with a jump."""
        for x, v, lv in zip(self.knots, self.values, self.left_values):
            if v > lv:
                yield float(x), float(v - lv)


@dataclass(frozen=True, eq=False)
class RightInverse:
    """c(s) = inf{u : a(u) > s} with left limit c(s-) = inf{u : a(u) >= s}."""
    a: StepLinearFunction

    def _search(self, s: float, strict: bool) -> float:
        x, v, lv = self.a.knots, self.a.values, self.a.left_values
        passes = (lambda y: y > s) if strict else (lambda y: y >= s)
        for i in range(x.size):
            if passes(v[i]):
                return float(x[i])
            if i + 1 < x.size and passes(lv[i + 1]):
                lo, hi = v[i], lv[i + 1]
                return float(x[i] + (s - lo) / (hi - lo) * (x[i + 1] - x[i]))
        return np.inf

    def __call__(self, s: float) -> float:
        return self._search(s, strict=True)

    def left_limit(self, s: float) -> float:
        return self._search(s, strict=False)


def right_inverse(a: StepLinearFunction) -> RightInverse:
    """Return the right-inverse c of a nondecreasing right-continuous a."""
    return RightInverse(a)


def stieltjes_integral(a: StepLinearFunction, f: Callable[[float], float], t: float) -> float:
    """Lebesgue-Stieltjes integral of f over [0, t] against da."""
    total = 0.0
    x, v, lv = a.knots, a.values, a.left_values
    for xi, jump in a.jumps():
        if xi <= t:
            total += f(xi) * jump
    for i in range(x.size - 1):
        lo, hi = x[i], min(x[i + 1], t)
        if hi <= lo:
            break
        slope = (lv[i + 1] - v[i]) / (x[i + 1] - x[i])
        if slope > 0:
            total += slope * integrate.quad(f, lo, hi)[0]
    return total


def exp_integral(a: StepLinearFunction, t: float) -> float:
    """Closed form of the integral of exp(-a) da over [0, t]."""
    total = 0.0
    x, v, lv = a.knots, a.values, a.left_values
    for xi, jump in a.jumps():
        if xi <= t:
            total += np.exp(-a(xi)) * jump
    for i in range(x.size - 1):
        lo, hi = x[i], min(x[i + 1], t)
        if hi <= lo:
            break
        total += np.exp(-v[i]) - np.exp(-a(hi) if hi < x[i + 1] else -lv[i + 1])
    return float(total)


@dataclass
class InverseIdentityReport:
    passed: bool
    failures: list

    def __bool__(self) -> bool:
        return self.passed


def check_inverse_identities(a: StepLinearFunction, s_points: Iterable[float],
                             u_points: Iterable[float]) -> InverseIdentityReport:
    """
    Check the right-inverse identities pointwise on an (s, u) lattice.

    - {a(u) >= s} = {c(s-) <= u}
    - {a(u-) <= s} = {c(s) >= u}
    - a(c(s)-) <= s <= a(c(s-)) where c is finite
    - {c(s) > u} = {a(u) <= s}, i.e. a(u) = inf{s : c(s) > u}
    """
    c = right_inverse(a)
    failures = []
    s_points, u_points = list(s_points), list(u_points)
    for s in s_points:
        cs, cs_left = c(s), c.left_limit(s)
        if np.isfinite(cs) and not a.left_limit(cs) <= s:
            failures.append(("a(c(s)-) <= s", s, None))
        if np.isfinite(cs_left) and not s <= a(cs_left):
            failures.append(("s <= a(c(s-))", s, None))
        for u in u_points:
            if (a(u) >= s) != (cs_left <= u):
                failures.append(("{a(u)>=s}={c(s-)<=u}", s, u))
            if (a.left_limit(u) <= s) != (cs >= u):
                failures.append(("{a(u-)<=s}={c(s)>=u}", s, u))
            if (cs > u) != (a(u) <= s):
                failures.append(("a(u)=inf{s:c(s)>u}", s, u))
    if failures:
        logger.warning(f"Right-inverse identities failed at {len(failures)} lattice points")
    return InverseIdentityReport(passed=not failures, failures=failures)


def change_of_variable_residual(a: StepLinearFunction, f: Callable[[float], float],
                                t: float) -> float:
    """
    |int_[0,t] f da - int_0^inf 1{c(s-) <= t} f(c(s-)) ds|, both sides by
    quadrature.
    """
    c = right_inverse(a)
    lhs = stieltjes_integral(a, f, t)
    top = a(t)
    breaks = sorted({float(y) for y in np.concatenate([a.values, a.left_values]) if 0 < y < top})
    rhs = integrate.quad(lambda s: f(c.left_limit(s)) if c.left_limit(s) <= t else 0.0,
                         0.0, top, points=breaks or None, limit=200)[0]
    return abs(lhs - rhs)


@dataclass(frozen=True, eq=False)
class NormalizedIncrease:
    """
    Attributes:
        A_bar: Normalized process, strictly below 1 at every finite level
        infinity_mass: Leaf array of the mass placed at infinity, 1 - A_bar_n
        factor: Density rescaling factor exp(A_v)
    """
    A_bar: AdaptedProcess
    infinity_mass: np.ndarray
    factor: AdaptedProcess


def normalize_A(tree: ScenarioTree, A: AdaptedProcess) -> NormalizedIncrease:
    """
    Normalize a nondecreasing adapted process below 1.

    A_bar_k = sum_{v <= k} exp(-A_v) dA_v with dA_0 = A_0; the mass at
    infinity brings the total to 1. A density p with respect to A becomes
    p exp(A) with respect to A_bar.

    Raises:
        InvalidSpec: If A is negative or decreasing
    """
    dA = A.increments()
    if np.any(A.values < 0) or np.any(dA < -1e-12):
        raise InvalidSpec("normalize_A needs a nonnegative nondecreasing process")
    dA = np.maximum(dA, 0.0)
    A_bar = np.cumsum(np.exp(-A.values) * dA, axis=0)
    return NormalizedIncrease(
        A_bar=AdaptedProcess(tree, A_bar, "A_bar"),
        infinity_mass=1.0 - A_bar[-1],
        factor=AdaptedProcess(tree, np.exp(A.values), "exp(A)"),
    )
