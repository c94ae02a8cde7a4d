"""
Monte Carlo paths of the natural model.

Z follows the Euler recursion

    Z_k = Z_{k-1} + dM_k - dA_k,  dA_k = lam Z_{k-1} step,
    dM_k = sigma Z_{k-1} (1 - Z_{k-1}) dW_k

driven by a one-dimensional Brownian motion that also serves as Y.
Paths are generated in fixed-size blocks, each with its own child of
SeedSequence(seed), so the output does not depend on the worker count.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from .flow import SchemeUnstable
from .step_model import StepModel


logger = logging.getLogger(__name__)


@dataclass
class MCModelConfig:
    """Monte Carlo model configuration."""
    lam: float = 0.2
    sigma: float = 0.3
    z0: float = 1.0
    g: float = 0.1
    step: float = 1e-3
    steps: int = 1000
    paths: int = 10_000
    seed: int = 42
    block_size: int = 1000
    start_stride: int = 50
    workers: int = 1

    def __post_init__(self):
        if self.step <= 0 or self.steps < 1 or self.paths < 1 or self.block_size < 1:
            raise ValueError("step, steps, paths and block_size must be positive")
        if not 0.0 < self.z0 <= 1.0:
            raise ValueError(f"z0 must lie in (0, 1], got {self.z0}")
        if self.lam < 0 or self.sigma < 0:
            raise ValueError("lam and sigma must be nonnegative")
        if self.start_stride < 1:
            raise ValueError("start_stride must be at least 1")

    def start_steps(self) -> np.ndarray:
        return np.arange(0, self.steps + 1, self.start_stride)


def _simulate_block(config: MCModelConfig, seed_seq: np.random.SeedSequence,
                    size: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed_seq)
    K = config.steps + 1
    dW = np.zeros((K, size))
    dW[1:] = rng.standard_normal((config.steps, size)) * np.sqrt(config.step)
    Z = np.empty((K, size))
    dA = np.zeros((K, size))
    dM = np.zeros((K, size))
    Z[0] = config.z0
    for k in range(1, K):
        z = Z[k - 1]
        dA[k] = config.lam * z * config.step
        dM[k] = config.sigma * z * (1.0 - z) * dW[k]
        Z[k] = z + dM[k] - dA[k]
        if np.any(Z[k] < 0.0) or np.any(Z[k] > 1.0):
            raise SchemeUnstable(f"Z left [0, 1] at step {k}; reduce the step size")
    return Z, dA, dM, dW


def simulate_model(config: MCModelConfig) -> StepModel:
    """
    Simulate the model in blocks and merge them in block order.

    Raises:
        SchemeUnstable: If Z leaves [0, 1]
    """
    n_blocks = -(-config.paths // config.block_size)
    sizes = [min(config.block_size, config.paths - b * config.block_size)
             for b in range(n_blocks)]
    children = np.random.SeedSequence(config.seed).spawn(n_blocks)
    jobs = list(zip(children, sizes))
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            blocks = list(pool.map(lambda job: _simulate_block(config, *job), jobs))
    else:
        blocks = [_simulate_block(config, *job) for job in jobs]
    Z, dA, dM, dW = (np.concatenate([b[i] for b in blocks], axis=1) for i in range(4))
    logger.info(f"Simulated {config.paths} paths x {config.steps} steps "
                f"(seed {config.seed}, {n_blocks} blocks)")
    return StepModel(times=np.arange(config.steps + 1) * config.step,
                     weights=np.full(config.paths, 1.0 / config.paths),
                     Z=Z, dA=dA, dM=dM, dY=dW[:, :, None], seed=config.seed,
                     step=config.step)


def dump_paths(model: StepModel, path: Union[str, Path]) -> Tuple[Path, Path]:
    """
    Write Z as raw little-endian float64, row-major time x path, with a
    JSON sidecar describing the layout.
    """
    path = Path(path)
    np.ascontiguousarray(model.Z, dtype="<f8").tofile(path)
    meta = path.with_suffix(path.suffix + ".json")
    with open(meta, "w") as f:
        json.dump({"dtype": "float64", "byteorder": "little", "order": "row-major",
                   "shape": [model.n_steps, model.n_paths], "axes": ["time", "path"],
                   "step": model.step, "seed": model.seed}, f, indent=2, sort_keys=True)
    return path, meta


def bucket_tstats(increments: np.ndarray, weights: np.ndarray, buckets: int = 4,
                  first: int = 1) -> List[float]:
    """
    t-statistics of the mean of per-path bucket sums of increments [K, P],
    one per bucket of consecutive steps from `first` on.
    """
    K = increments.shape[0]
    edges = np.linspace(first, K, buckets + 1).astype(int)
    stats = []
    n = increments.shape[1]
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        sums = increments[lo:hi].sum(axis=0)
        mean = float(sums @ weights)
        var = float(((sums - mean) ** 2) @ weights)
        se = np.sqrt(var / n)
        stats.append(mean / se if se > 0 else 0.0)
    return stats


def mtilde_tstats(model: StepModel, buckets: int = 4) -> List[float]:
    """Bucketed t-statistics of the m-tilde increments."""
    return bucket_tstats(model.dm, model.weights, buckets)
