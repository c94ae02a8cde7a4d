"""
Shared fixtures: the two-step binary tree T2 with its fixture random time,
the one-node three-leaf tree D3 carrying a Cox time, the three-leaf tree S3
whose compensator runs out before default, and a corpus of small random trees.
"""

import tempfile
from pathlib import Path

import numpy as np
import pytest

from src.filtration import AdaptedProcess, RandomTime, build_tree, random_tree


T2_SPEC = {"times": [0, 1, 2], "branching": [[0.5, 0.5], [0.5, 0.5]]}
T2_TAU = {"uu": "inf", "ud": 2, "du": 1, "dd": 2}

D3_SPEC = {"times": [0, 1, 2], "branching": [[1.0], [1.0]], "hidden": [0.3, 0.3, 0.4]}
D3_TAU = {"ss#0": 1, "ss#1": 2, "ss#2": "inf"}
D3_A = [0.0, 0.3, 0.6]


@pytest.fixture
def temp_dir():
    """Create temporary directory for tests."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def t2():
    """Two-step binary tree, leaves uu, ud, du, dd with mass 1/4."""
    return build_tree(T2_SPEC)


@pytest.fixture
def t2_tau(t2):
    return RandomTime.from_mapping(t2, T2_TAU)


@pytest.fixture
def d3():
    """Single-node levels over three hidden leaves of mass .3, .3, .4."""
    return build_tree(D3_SPEC)


@pytest.fixture
def d3_tau(d3):
    return RandomTime.from_mapping(d3, D3_TAU)


@pytest.fixture
def d3_A(d3):
    return AdaptedProcess.deterministic(d3, D3_A, "A")


S3_SPEC = {"times": [0, 1, 2], "leaves": {"a": 0.25, "b": 0.25, "d": 0.5},
           "levels": [[["a", "b", "d"]], [["a", "b"], ["d"]], [["a", "b"], ["d"]]]}
S3_TAU = {"a": "inf", "b": 2, "d": 1}


@pytest.fixture
def s3():
    """Three leaves where the Azema compensator reaches 1 on node ab before default."""
    return build_tree(S3_SPEC)


@pytest.fixture
def s3_tau(s3):
    return RandomTime.from_mapping(s3, S3_TAU)


def random_time(tree, rng) -> RandomTime:
    """Uniform random time over the grid and infinity."""
    return RandomTime(tree, rng.integers(0, tree.grid.u_size, size=tree.n_leaves))


def random_increasing(tree, rng, top: float = 0.9) -> AdaptedProcess:
    """Adapted nondecreasing process starting at 0 whose largest terminal value is top."""
    n = tree.n_levels
    raw = np.zeros((n, tree.n_leaves))
    for k in range(1, n):
        node_draws = rng.uniform(0.0, 1.0, size=tree.n_nodes(k))
        raw[k] = raw[k - 1] + tree.expand(node_draws, k)
    return AdaptedProcess(tree, raw / raw[-1].max() * top, "A")


@pytest.fixture
def tree_corpus():
    """
    Two hundred small random trees with a random time and increasing process
    each; every third process reaches 1 on some terminal node.
    """
    rng = np.random.default_rng(2024)
    corpus = []
    for i in range(200):
        tree = random_tree(rng, max_levels=4, max_leaves=12)
        top = 1.0 if i % 3 == 0 else 0.9
        corpus.append((tree, random_time(tree, rng), random_increasing(tree, rng, top)))
    return corpus
