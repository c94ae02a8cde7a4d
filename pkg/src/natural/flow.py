"""
Euler flows of the natural equation, the iM_Z family built from them and
the flow density.

The recursion is

    X_k  = X_{k-1} (1 + dm_k) + F(t_k, X_{k-1})^T dY_k
    DX_k = DX_{k-1} (1 + dm_k + d/dx F(t_k, X_{k-1})^T dY_k)

started at X_u = x0, DX_u = 1. On tree leaf paths it is the exact
equation; on simulated paths it is the Euler scheme.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from src.families import DensityField, IMFamily, TwoParamField
from src.filtration import ATOM_EPS, TOL

from .pair import NaturalPair
from .step_model import StepModel


logger = logging.getLogger(__name__)

BAND_GUARD = 0.5


class SchemeUnstable(Exception):
    """Raised when a simulated quantity leaves its guard band."""
    pass


@dataclass(frozen=True, eq=False)
class FlowBundle:
    """
    Flows from several starts on common noise.

    Attributes:
        starts: Start step per flow [S]
        x0: Start values [S, P]
        keep: Recorded steps [J]
        X: Flow values [S, J, P], NaN before the start
        DX: Spatial derivatives [S, J, P], NaN before the start
        scheme: Step size, seed and path count
    """
    starts: np.ndarray
    x0: np.ndarray
    keep: np.ndarray
    X: np.ndarray
    DX: np.ndarray
    scheme: dict = field(default_factory=dict)

    def solution(self, i: int) -> "FlowSolution":
        return FlowSolution(u=int(self.starts[i]), x0=self.x0[i], keep=self.keep,
                            X=self.X[i], DX=self.DX[i], scheme=self.scheme)

    def position(self, step: int) -> int:
        hit = np.flatnonzero(self.keep == step)
        if not hit.size:
            raise ValueError(f"step {step} was not recorded")
        return int(hit[0])


@dataclass(frozen=True, eq=False)
class FlowSolution:
    u: int
    x0: np.ndarray
    keep: np.ndarray
    X: np.ndarray
    DX: np.ndarray
    scheme: dict = field(default_factory=dict)

    def at(self, step: int) -> np.ndarray:
        return self.X[int(np.flatnonzero(self.keep == step)[0])]


def _scheme(model: StepModel) -> dict:
    return {"exact": model.exact, "step": model.step, "seed": model.seed,
            "paths": model.n_paths}


def solve_flows(pair: NaturalPair, model: StepModel, starts: Sequence[int],
                x0: Optional[Union[float, np.ndarray]] = None,
                keep: Optional[Sequence[int]] = None,
                band_guard: float = BAND_GUARD) -> FlowBundle:
    """
    Solve the natural equation from several starts on the model's paths.

    Args:
        pair: The pair (F, Y)
        model: Step model supplying Z, dm and dY
        starts: Start steps
        x0: Start values, scalar, [S] or [S, P]; defaults to 1 - Z at each start
        keep: Steps to record (default every step)
        band_guard: X must stay within [-band_guard, 1 + band_guard]

    Returns:
        FlowBundle

    Raises:
        SchemeUnstable: If a flow leaves the guard band
    """
    starts = np.asarray(starts, dtype=int)
    S, K, P = starts.size, model.n_steps, model.n_paths
    if np.any(starts < 0) or np.any(starts >= K):
        raise ValueError(f"start steps must lie in [0, {K - 1}]")
    if x0 is None:
        start_values = 1.0 - model.Z[starts]
    else:
        start_values = np.broadcast_to(np.asarray(x0, dtype=float).reshape(
            (S, -1) if np.ndim(x0) else (1, 1)), (S, P)).copy()
    keep = np.arange(K) if keep is None else np.asarray(sorted(set(keep)), dtype=int)
    slot = {int(k): j for j, k in enumerate(keep)}
    X_out = np.full((S, keep.size, P), np.nan)
    D_out = np.full((S, keep.size, P), np.nan)

    X = np.full((S, P), np.nan)
    D = np.full((S, P), np.nan)
    functional = pair.functional
    last = int(keep.max()) if keep.size else K - 1
    for k in range(int(starts.min()), last + 1):
        if k > 0:
            active = starts < k
            if np.any(active):
                xm = X[active]
                pp, dm, dY = model.pp[k], model.dm[k], model.dY[k]
                t = model.times[k]
                F = functional.value(t, xm, pp)
                dF = functional.dx(t, xm, pp)
                X[active] = xm * (1.0 + dm) + np.sum(F * dY, axis=-1)
                D[active] = D[active] * (1.0 + dm + np.sum(dF * dY, axis=-1))
                out = (X[active] < -band_guard) | (X[active] > 1.0 + band_guard)
                if np.any(out):
                    row, p = np.unravel_index(int(np.argmax(out)), out.shape)
                    raise SchemeUnstable(
                        f"flow from step {int(starts[active][row])} left the band at "
                        f"step {k} on path {p} (value {X[active][row, p]:.4g})"
                    )
        begin = starts == k
        X[begin] = start_values[begin]
        D[begin] = 1.0
        if k in slot:
            X_out[:, slot[k]] = X
            D_out[:, slot[k]] = D
    return FlowBundle(starts=starts, x0=start_values, keep=keep, X=X_out, DX=D_out,
                      scheme=_scheme(model))


def solve_flow(pair: NaturalPair, model: StepModel, u: int,
               x0: Optional[Union[float, np.ndarray]] = None,
               keep: Optional[Sequence[int]] = None) -> FlowSolution:
    """Single flow started at step u (default start value 1 - Z_u)."""
    if x0 is not None and np.ndim(x0):
        x0 = np.asarray(x0, dtype=float)[None, :]
    return solve_flows(pair, model, [u], x0, keep).solution(0)


def kappa(pair: NaturalPair, model: StepModel) -> np.ndarray:
    """
    kappa_v = 1 + dm_v - (1 - Z_{v-1}) g(t_v, 1 - Z_{v-1})^T dY_v, with kappa_0 = 1.
    """
    out = np.ones((model.n_steps, model.n_paths))
    g = pair.functional.g
    for v in range(1, model.n_steps):
        x = 1.0 - model.Z[v - 1]
        out[v] = 1.0 + model.dm[v] - x * np.sum(g(model.times[v], x) * model.dY[v], axis=-1)
    return out


def _band_minimum(bundle: FlowBundle, model: StepModel) -> np.ndarray:
    """M^u_k = min over starts v in [u, k] of (L^v_k)^+, capped by 1 - Z_k."""
    S, J, P = bundle.X.shape
    values = np.full((S, J, P), np.nan)
    order = np.argsort(bundle.starts)
    for j, k in enumerate(bundle.keep):
        running = np.full(P, np.inf)
        cap = 1.0 - model.Z[k]
        for i in order[::-1]:
            if bundle.starts[i] > k:
                continue
            running = np.minimum(running, np.maximum(bundle.X[i, j], 0.0))
            values[i, j] = np.minimum(running, cap)
    return values


def build_imz(pair: NaturalPair, model: StepModel, starts: Optional[Sequence[int]] = None,
              keep: Optional[Sequence[int]] = None) -> Union[IMFamily, TwoParamField]:
    """
    iM_Z family M^u_t = min over starts v in [u, t] of (L^v_t)^+ ^ (1 - Z_t),
    with L^v the flow started at 1 - Z_v.

    On a tree every level is a start and the family is completed below the
    diagonal by conditional expectation; on simulated paths the result is
    a TwoParamField over the given starts and recorded steps.

    Raises:
        SchemeUnstable: If the result leaves the band [0, 1 - Z]
    """
    if model.exact:
        starts = np.arange(model.n_steps)
        keep = None
    elif starts is None:
        raise ValueError("simulated models need explicit start steps")
    bundle = solve_flows(pair, model, starts, keep=keep)
    values = _band_minimum(bundle, model)

    for i, u in enumerate(bundle.starts):
        for j, k in enumerate(bundle.keep):
            if k < u:
                continue
            cap = 1.0 - model.Z[k]
            if np.any(values[i, j] < -TOL) or np.any(values[i, j] > cap + TOL):
                raise SchemeUnstable(f"family leaves the band [0, 1 - Z] at u={u}, step {k}")

    if not model.exact:
        return TwoParamField(values=values, starts=bundle.starts, steps=bundle.keep,
                             weights=model.weights, name="M")
    tree = model.tree
    n = tree.n_levels
    cube = np.ones((tree.grid.u_size, n, tree.n_leaves))
    for u in range(n):
        for k in range(n):
            if k >= u:
                cube[u, k] = values[u, k]
            else:
                cube[u, k] = tree.average(1.0 - model.Z[u], k)
    logger.debug(f"Built iM_Z family on {n} levels")
    return IMFamily(tree, cube)


def density_from_flow(pair: NaturalPair, model: StepModel,
                      starts: Optional[Sequence[int]] = None,
                      keep: Optional[Sequence[int]] = None) -> Union[DensityField, TwoParamField]:
    """
    Flow density of the iM_Z family.

    Where dA_v > 0: [Xi^v(1 - Z_v) - Xi^v(1 - Z_v - kappa_v dA_v)] / dA_v;
    elsewhere the derivative branch dXi^v/dx(1 - Z_v). Trees carry atoms
    only (zero elsewhere, as for differentiate); simulated paths use the
    derivative branch.
    """
    if not model.exact:
        if starts is None:
            raise ValueError("simulated models need explicit start steps")
        bundle = solve_flows(pair, model, starts, keep=keep)
        return TwoParamField(values=bundle.DX, starts=bundle.starts, steps=bundle.keep,
                             weights=model.weights, name="p")

    tree = model.tree
    n = tree.n_levels
    levels = np.arange(n)
    dA = np.zeros((tree.grid.u_size, tree.n_leaves))
    dA[:n] = model.dA
    atoms = dA > ATOM_EPS
    kap = kappa(pair, model)
    high = solve_flows(pair, model, levels)
    low = solve_flows(pair, model, levels, x0=1.0 - model.Z - kap * model.dA)
    values = np.zeros((n, tree.n_leaves, tree.grid.u_size))
    for v in range(n):
        ratio = (high.X[v] - low.X[v]) / np.where(atoms[v], dA[v], 1.0)
        for k in range(v, n):
            values[k, :, v] = np.where(atoms[v], ratio[k], 0.0)
    atoms.flags.writeable = False
    return DensityField(tree=tree, values=values, atoms=atoms, dA=dA,
                        up_to=tree.grid.horizon_levels)


def finite_difference_check(pair: NaturalPair, model: StepModel, u: int, x0: float,
                            h: float = 1e-4, keep: Optional[Sequence[int]] = None) -> float:
    """
    Max pathwise relative error between the derivative iterate and the
    central difference (Xi(x0 + h) - Xi(x0 - h)) / 2h on common noise.
    """
    bundle = solve_flows(pair, model, [u, u, u], x0=np.array([x0, x0 + h, x0 - h])[:, None],
                         keep=keep)
    after = bundle.keep > u
    fd = (bundle.X[1, after] - bundle.X[2, after]) / (2.0 * h)
    dx = bundle.DX[0, after]
    return float(np.max(np.abs(fd - dx) / np.maximum(np.abs(dx), 1e-12), initial=0.0))


def flow_is_monotone(pair: NaturalPair, model: StepModel, u: int, x_low: float,
                     x_high: float, tol: float = TOL) -> bool:
    """x_low < x_high implies Xi(x_low) <= Xi(x_high) pathwise on common noise."""
    bundle = solve_flows(pair, model, [u, u], x0=np.array([x_low, x_high])[:, None])
    after = bundle.keep >= u
    return bool(np.all(bundle.X[0, after] <= bundle.X[1, after] + tol))


@dataclass
class ReconstructionCheck:
    family_mean: float
    density_mean: float
    standard_error: float
    tolerance: float
    passed: bool


def mc_reconstruction_check(pair: NaturalPair, model: StepModel, starts: Sequence[int],
                            u: int, t: int) -> ReconstructionCheck:
    """
    Compare M^u_t with the Riemann sum of p_t(v) (A_v - A_{v'}) over starts
    v <= u (v' the previous start) in the mean, within 3 SE + 5 step.
    """
    starts = np.asarray(sorted(set(starts)), dtype=int)
    if u not in starts or t < u:
        raise ValueError("u must be a start step and t >= u")
    family = build_imz(pair, model, starts, keep=[t])
    density = density_from_flow(pair, model, starts, keep=[t])
    A = model.A
    total = np.zeros(model.n_paths)
    previous = None
    for i, v in enumerate(starts):
        if v > u:
            break
        dA = A[v] - (A[previous] if previous is not None else 0.0)
        total += density.values[i, 0] * dA
        previous = v
    m = family.values[family.start_position(u), 0]
    diff = m - total
    w = model.weights
    mean = float(diff @ w)
    se = float(np.sqrt(max((diff - mean) ** 2 @ w, 0.0) / model.n_paths))
    step = model.step or 0.0
    tolerance = 3.0 * se + 5.0 * step
    passed = abs(mean) <= tolerance
    if not passed:
        logger.warning(f"Flow density reconstruction off by {mean:.3g} (tolerance {tolerance:.3g})")
    return ReconstructionCheck(family_mean=float(m @ w), density_mean=float(total @ w),
                               standard_error=se, tolerance=tolerance, passed=passed)
