"""
Copulas coupling several default times.

Each copula evaluates C(x_1, ..., x_d), its coordinate partials and the
marginal copula C_J obtained by setting the coordinates outside J to 1.
Partials are analytic where a closed form exists and central differences
otherwise.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from itertools import product as lattice
from typing import Iterable, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq


logger = logging.getLogger(__name__)

# Central-difference step for partials
FD_STEP = 1e-6
# Points per axis of the axiom lattice
LATTICE_POINTS = 10


class InvalidCopula(Exception):
    """Raised for bad parameters or an operation the copula does not support."""
    pass


class Copula(ABC):
    """Abstract base class for d-dimensional copulas."""

    def __init__(self, dim: int):
        if dim < 1:
            raise InvalidCopula(f"copula dimension must be positive, got {dim}")
        self.dim = dim

    @property
    def name(self) -> str:
        return type(self).__name__.replace("Copula", "").lower()

    @property
    def continuously_differentiable(self) -> bool:
        return True

    @abstractmethod
    def _cdf(self, x: np.ndarray) -> np.ndarray:
        """C on points x [..., d] with entries in (0, 1]."""
        pass

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise InvalidCopula(f"{self.name} copula expects {self.dim} coordinates, "
                                f"got {x.shape[-1]}")
        return np.clip(x, 0.0, 1.0)

    def cdf(self, x) -> np.ndarray:
        """C(x) for x [..., d]; any zero coordinate gives 0."""
        x = self._check(x)
        zero = np.any(x <= 0.0, axis=-1)
        safe = np.where(x <= 0.0, 1.0, x)
        return np.where(zero, 0.0, self._cdf(safe))

    def partial(self, x, j: int) -> np.ndarray:
        """dC/dx_j by central differences, one-sided at the boundary."""
        x = self._check(x)
        lo, hi = np.array(x), np.array(x)
        lo[..., j] = np.maximum(x[..., j] - FD_STEP, 0.0)
        hi[..., j] = np.minimum(x[..., j] + FD_STEP, 1.0)
        return (self.cdf(hi) - self.cdf(lo)) / (hi[..., j] - lo[..., j])

    def marginal_cdf(self, x_J, J: Iterable[int]) -> np.ndarray:
        """C_J(x_J): C with every coordinate outside J set to 1."""
        J = list(J)
        x_J = np.asarray(x_J, dtype=float)
        full = np.ones(x_J.shape[:-1] + (self.dim,))
        full[..., J] = x_J
        return self.cdf(full)

    def marginal_partial(self, x_J, J: Iterable[int], j: int) -> np.ndarray:
        """d C_J / d x_j for j in J."""
        J = list(J)
        x_J = np.asarray(x_J, dtype=float)
        full = np.ones(x_J.shape[:-1] + (self.dim,))
        full[..., J] = x_J
        return self.partial(full, j)

    def tail_dependence(self) -> Tuple[float, float]:
        """(lower, upper) tail dependence coefficients."""
        return 0.0, 0.0

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """
        Draw n points [n, d] by conditional inversion.

        Only the bivariate case is generic; families with a frailty
        representation override this.
        """
        if self.dim == 1:
            return rng.random((n, 1))
        if self.dim != 2:
            raise InvalidCopula(f"no sampler for the {self.dim}-dimensional {self.name} copula")
        u = rng.random(n)
        w = rng.random(n)
        v = np.empty(n)
        for i in range(n):
            target = w[i]

            def conditional(y, x=u[i]):
                return float(self.partial(np.array([x, y]), 0)) - target

            lo, hi = conditional(0.0), conditional(1.0)
            if lo >= 0:
                v[i] = 0.0
            elif hi <= 0:
                v[i] = 1.0
            else:
                v[i] = brentq(conditional, 0.0, 1.0, xtol=1e-12)
        return np.column_stack([u, v])

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim={self.dim})"


class ProductCopula(Copula):
    """Independence copula."""

    def _cdf(self, x):
        return np.prod(x, axis=-1)

    def partial(self, x, j):
        x = self._check(x)
        return np.prod(np.delete(x, j, axis=-1), axis=-1)

    def sample(self, n, rng):
        return rng.random((n, self.dim))


class ClaytonCopula(Copula):
    """C(x) = (sum x_j^-theta - d + 1)^(-1/theta), theta > 0."""

    def __init__(self, dim: int, theta: float):
        super().__init__(dim)
        if theta <= 0:
            raise InvalidCopula(f"Clayton needs theta > 0, got {theta}")
        self.theta = float(theta)

    def _cdf(self, x):
        s = np.sum(x ** -self.theta, axis=-1) - self.dim + 1.0
        return s ** (-1.0 / self.theta)

    def partial(self, x, j):
        x = self._check(x)
        c = self.cdf(x)
        xj = x[..., j]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = c ** (1.0 + self.theta) * xj ** (-self.theta - 1.0)
        return np.where(c > 0, out, 0.0)

    def tail_dependence(self):
        return 2.0 ** (-1.0 / self.theta), 0.0

    def sample(self, n, rng):
        # Gamma frailty
        V = rng.gamma(1.0 / self.theta, 1.0, size=(n, 1))
        E = rng.exponential(1.0, size=(n, self.dim))
        return (1.0 + E / V) ** (-1.0 / self.theta)

    def __repr__(self):
        return f"ClaytonCopula(dim={self.dim}, theta={self.theta})"


class GumbelCopula(Copula):
    """C(x) = exp(-(sum (-ln x_j)^theta)^(1/theta)), theta >= 1."""

    def __init__(self, dim: int, theta: float):
        super().__init__(dim)
        if theta < 1:
            raise InvalidCopula(f"Gumbel needs theta >= 1, got {theta}")
        self.theta = float(theta)

    def _cdf(self, x):
        s = np.sum((-np.log(x)) ** self.theta, axis=-1)
        return np.exp(-s ** (1.0 / self.theta))

    def partial(self, x, j):
        x = self._check(x)
        c = self.cdf(x)
        safe = np.where(x <= 0.0, 1.0, x)
        logs = -np.log(safe)
        s = np.sum(logs ** self.theta, axis=-1)
        xj = safe[..., j]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = c * s ** (1.0 / self.theta - 1.0) * logs[..., j] ** (self.theta - 1.0) / xj
        # at x = 1 the partial reduces to the lower-dimensional margin
        return np.where((c > 0) & (s > 0), out, np.where(s == 0, 1.0, 0.0))

    def tail_dependence(self):
        return 0.0, 2.0 - 2.0 ** (1.0 / self.theta)

    def sample(self, n, rng):
        # Positive stable frailty with Laplace transform exp(-s^alpha), Kanter's representation
        alpha = 1.0 / self.theta
        if alpha == 1.0:
            S = np.ones((n, 1))
        else:
            U = rng.uniform(0.0, np.pi, size=n)
            W = rng.exponential(1.0, size=n)
            S = (np.sin(alpha * U) / np.sin(U) ** (1.0 / alpha)
                 * (np.sin((1.0 - alpha) * U) / W) ** ((1.0 - alpha) / alpha))[:, None]
        E = rng.exponential(1.0, size=(n, self.dim))
        return np.exp(-(E / S) ** alpha)

    def __repr__(self):
        return f"GumbelCopula(dim={self.dim}, theta={self.theta})"


class FGMCopula(Copula):
    """Farlie-Gumbel-Morgenstern: C(u, v) = uv(1 + theta(1-u)(1-v)), |theta| <= 1."""

    def __init__(self, theta: float, dim: int = 2):
        if dim != 2:
            raise InvalidCopula("the FGM copula is bivariate")
        super().__init__(dim)
        if abs(theta) > 1:
            raise InvalidCopula(f"FGM needs |theta| <= 1, got {theta}")
        self.theta = float(theta)

    def _cdf(self, x):
        u, v = x[..., 0], x[..., 1]
        return u * v * (1.0 + self.theta * (1.0 - u) * (1.0 - v))

    def partial(self, x, j):
        x = self._check(x)
        a, b = x[..., j], x[..., 1 - j]
        return b * (1.0 + self.theta * (1.0 - 2.0 * a) * (1.0 - b))

    def sample(self, n, rng):
        u = rng.random(n)
        w = rng.random(n)
        a = self.theta * (1.0 - 2.0 * u)
        # root in [0, 1] of a v^2 - (1 + a) v + w = 0
        with np.errstate(divide="ignore", invalid="ignore"):
            v = ((1.0 + a) - np.sqrt((1.0 + a) ** 2 - 4.0 * a * w)) / (2.0 * a)
        v = np.where(np.abs(a) < 1e-12, w, v)
        return np.column_stack([u, np.clip(v, 0.0, 1.0)])

    def __repr__(self):
        return f"FGMCopula(theta={self.theta})"


class ComonotoneCopula(Copula):
    """Upper Frechet bound min(x). Not continuously differentiable."""

    @property
    def continuously_differentiable(self) -> bool:
        return False

    def _cdf(self, x):
        return np.min(x, axis=-1)

    def partial(self, x, j):
        raise InvalidCopula("the comonotone copula has no continuous partial derivatives")

    def tail_dependence(self):
        return 1.0, 1.0

    def sample(self, n, rng):
        return np.repeat(rng.random((n, 1)), self.dim, axis=1)


COPULAS = {
    "product": ProductCopula,
    "clayton": ClaytonCopula,
    "gumbel": GumbelCopula,
    "fgm": FGMCopula,
    "comonotone": ComonotoneCopula,
}


def make_copula(family: str, dim: int, theta: Optional[float] = None) -> Copula:
    """
    Build a copula by family name.

    Raises:
        InvalidCopula: For an unknown family or missing parameter
    """
    family = family.lower()
    if family not in COPULAS:
        raise InvalidCopula(f"unknown copula family {family!r}; "
                            f"expected one of {sorted(COPULAS)}")
    if family in ("clayton", "gumbel"):
        if theta is None:
            raise InvalidCopula(f"{family} copula needs theta")
        return COPULAS[family](dim, theta)
    if family == "fgm":
        if theta is None:
            raise InvalidCopula("fgm copula needs theta")
        return FGMCopula(theta, dim)
    return COPULAS[family](dim)


@dataclass
class CopulaReport:
    passed: bool
    grounded: float = 0.0
    uniform_margins: float = 0.0
    monotone: float = 0.0
    partials: float = 0.0
    violations: List[str] = field(default_factory=list)


def check_copula_axioms(copula: Copula, points: int = LATTICE_POINTS,
                        tol: float = 1e-6) -> CopulaReport:
    """
    Check groundedness, uniform margins, coordinatewise monotonicity and
    (for differentiable copulas) analytic partials against central
    differences on a lattice of `points` per axis.
    """
    d = copula.dim
    axis = np.linspace(0.0, 1.0, points)
    if d > 3:
        axis = axis[::max(1, points // 4)]
    grid = np.array(list(lattice(axis, repeat=d)))
    report = CopulaReport(passed=True)
    values = copula.cdf(grid)

    grounded = np.any(grid == 0.0, axis=1)
    report.grounded = float(np.max(np.abs(values[grounded]))) if grounded.any() else 0.0
    if report.grounded > tol:
        report.violations.append(f"not grounded (|C| = {report.grounded:.3g} on a zero face)")

    for j in range(d):
        x = np.ones((points, d))
        x[:, j] = np.linspace(0.0, 1.0, points)
        gap = float(np.max(np.abs(copula.cdf(x) - x[:, j])))
        report.uniform_margins = max(report.uniform_margins, gap)
    if report.uniform_margins > tol:
        report.violations.append(f"margins are not uniform (gap {report.uniform_margins:.3g})")

    shape = (len(axis),) * d
    cube = values.reshape(shape)
    for j in range(d):
        drop = float(np.max(-np.diff(cube, axis=j), initial=0.0))
        report.monotone = max(report.monotone, drop)
    if report.monotone > tol:
        report.violations.append(f"decreases along a coordinate by {report.monotone:.3g}")

    if copula.continuously_differentiable:
        interior = grid[np.all((grid > 0.0) & (grid < 1.0), axis=1)]
        for j in range(d):
            lo, hi = np.array(interior), np.array(interior)
            lo[:, j] -= FD_STEP
            hi[:, j] += FD_STEP
            fd = (copula.cdf(hi) - copula.cdf(lo)) / (2.0 * FD_STEP)
            exact = copula.partial(interior, j)
            err = np.abs(fd - exact) / np.maximum(1.0, np.abs(exact))
            report.partials = max(report.partials, float(np.max(err, initial=0.0)))
        if report.partials > tol:
            report.violations.append(f"partials disagree with finite differences "
                                     f"({report.partials:.3g})")

    report.passed = not report.violations
    logger.debug(f"{copula!r} axiom check: {'pass' if report.passed else report.violations}")
    return report
