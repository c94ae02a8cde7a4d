"""
Scenario configuration.

A scenario is one JSON file. Sections are loaded into dataclasses with
their defaults declared here and validated in from_dict.
"""

import csv
import json
import logging
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from dotenv import load_dotenv

from src.filtration import AdaptedProcess, InvalidSpec, RandomTime, ScenarioTree, build_tree
from src.natural import MCModelConfig


logger = logging.getLogger(__name__)

ENGINES = ("tree", "mc")
MODELS = ("cox", "natural", "copula", "explicit-tree")
SUITES = ("im", "cox", "natural", "copula", "enlargement")

DEFAULT_OUT_DIR = "out"


class ConfigError(Exception):
    """Raised when a scenario configuration is incomplete or inconsistent."""
    pass


def _process_from_spec(tree: ScenarioTree, spec: Union[List, Dict], name: str) -> AdaptedProcess:
    """A per-level path [a_0, ..., a_n] or per-level node values [[...], ...]."""
    if isinstance(spec, dict):
        spec = spec.get("nodes")
    if not isinstance(spec, list) or len(spec) != tree.n_levels:
        raise ConfigError(f"{name} needs one entry per level ({tree.n_levels})")
    if all(isinstance(v, (int, float)) for v in spec):
        return AdaptedProcess.deterministic(tree, [float(v) for v in spec], name)
    return AdaptedProcess.from_nodes(tree, spec, name)


@dataclass
class TreeSpec:
    """
    Tree section: the tree itself plus the optional random time (leaf label
    to time or "inf") and increasing process A.
    """
    spec: Dict[str, Any]
    tau: Optional[Dict[str, Union[float, str]]] = None
    A: Optional[Union[List, Dict]] = None

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TreeSpec":
        if not isinstance(data, dict):
            raise ConfigError("tree section must be an object")
        spec = {k: v for k, v in data.items() if k not in ("tau", "A")}
        return cls(spec=spec, tau=data.get("tau"), A=data.get("A"))

    def build(self) -> Tuple[ScenarioTree, Optional[RandomTime], Optional[AdaptedProcess]]:
        """
        Raises:
            ConfigError: Wrapping tree validation failures
        """
        try:
            tree = build_tree(self.spec)
            tau = RandomTime.from_mapping(tree, self.tau) if self.tau is not None else None
        except InvalidSpec as e:
            raise ConfigError(f"invalid tree section: {e}") from e
        A = _process_from_spec(tree, self.A, "A") if self.A is not None else None
        return tree, tau, A

    def to_dict(self) -> dict:
        out = dict(self.spec)
        if self.tau is not None:
            out["tau"] = self.tau
        if self.A is not None:
            out["A"] = self.A
        return out


@dataclass
class NaturalConfig:
    """Tree natural model: constant g and the scale of the alternating driver."""
    g: float = 0.1
    driver_scale: float = 1.0

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "NaturalConfig":
        config = cls(**data)
        if config.driver_scale < 0:
            raise ConfigError("natural.driver_scale must be nonnegative")
        return config


@dataclass
class CopulaConfig:
    """
    Copula section: family, parameter and one A per marginal (a per-level
    path or node values). Marginals default to k copies of the scenario A.
    """
    family: str = "product"
    theta: Optional[float] = None
    k: int = 2
    marginals: Optional[List] = None
    samples: int = 0

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CopulaConfig":
        config = cls(**data)
        if config.marginals is not None:
            config.k = len(config.marginals)
        if config.k < 1:
            raise ConfigError("copula needs at least one marginal")
        return config


def _mc_from_dict(data: Dict[str, Any]) -> MCModelConfig:
    data = dict(data)
    phi = data.pop("phi", "saturating")
    if phi != "saturating":
        raise ConfigError(f"unknown shaping function {phi!r}; only 'saturating' is shipped")
    try:
        return MCModelConfig(**data)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid mc section: {e}") from e


@dataclass
class ScenarioConfig:
    """Validated scenario."""
    name: str = "scenario"
    engine: str = "tree"
    model: str = "explicit-tree"
    tree: Optional[TreeSpec] = None
    natural: NaturalConfig = field(default_factory=NaturalConfig)
    mc: Optional[MCModelConfig] = None
    copula: Optional[CopulaConfig] = None
    horizon: Optional[int] = None
    seed: Optional[int] = None
    suites: List[str] = field(default_factory=lambda: ["im"])
    out_dir: Optional[str] = None
    processes: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScenarioConfig":
        """
        Raises:
            ConfigError: On unknown values, missing sections or a missing
                seed for Monte Carlo
        """
        data = dict(data)
        known = {"name", "engine", "model", "tree", "natural", "mc", "copula", "horizon",
                 "seed", "suites", "out_dir", "processes"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        engine = data.get("engine", "tree")
        model = data.get("model", "explicit-tree")
        if engine not in ENGINES:
            raise ConfigError(f"engine must be one of {ENGINES}, got {engine!r}")
        if model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {model!r}")
        suites = list(data.get("suites", ["im"]))
        bad = [s for s in suites if s not in SUITES]
        if bad:
            raise ConfigError(f"unknown suites {bad}; expected a subset of {SUITES}")

        try:
            config = cls(
                name=str(data.get("name", "scenario")),
                engine=engine,
                model=model,
                tree=TreeSpec.from_dict(data["tree"]) if data.get("tree") is not None else None,
                natural=NaturalConfig.from_dict(data.get("natural") or {}),
                mc=_mc_from_dict(data["mc"]) if data.get("mc") is not None else None,
                copula=(CopulaConfig.from_dict(data["copula"])
                        if data.get("copula") is not None else None),
                horizon=data.get("horizon"),
                seed=data.get("seed"),
                suites=suites,
                out_dir=data.get("out_dir"),
                processes=dict(data.get("processes") or {}),
            )
        except TypeError as e:
            raise ConfigError(f"invalid config section: {e}") from e
        config.validate()
        return config

    def validate(self):
        if self.engine == "mc":
            if self.seed is None:
                raise ConfigError("Monte Carlo scenarios need a seed")
            if self.model != "natural":
                raise ConfigError("the Monte Carlo engine runs the natural model only")
            if self.mc is None:
                self.mc = MCModelConfig(seed=self.seed)
            elif self.mc.seed != self.seed:
                self.mc = replace(self.mc, seed=self.seed)
            tree_suites = [s for s in self.suites if s not in ("natural", "enlargement")]
            if tree_suites:
                raise ConfigError(f"suites {tree_suites} need the tree engine")
            return
        if self.tree is None:
            raise ConfigError("tree scenarios need a tree section")
        if self.model == "explicit-tree" and self.tree.tau is None:
            raise ConfigError("explicit-tree scenarios need tree.tau")
        if self.model == "cox" and self.tree.A is None:
            raise ConfigError("cox scenarios need tree.A")
        if self.model == "copula" and self.copula is None:
            raise ConfigError("copula scenarios need a copula section")
        if "copula" in self.suites and self.copula is None:
            raise ConfigError("the copula suite needs a copula section")
        if self.copula is not None and self.tree.A is None and self.copula.marginals is None:
            raise ConfigError("copula marginals need tree.A or copula.marginals")
        needs_tau = [s for s in self.suites if s in ("cox", "enlargement")]
        if needs_tau and self.tree.tau is None:
            raise ConfigError(f"suites {needs_tau} need tree.tau")

    def with_overrides(self, seed: Optional[int] = None, paths: Optional[int] = None,
                       step: Optional[float] = None,
                       out_dir: Optional[str] = None) -> "ScenarioConfig":
        """Apply command-line overrides and revalidate."""
        config = replace(self)
        if seed is not None:
            config.seed = seed
        if config.mc is not None and (paths is not None or step is not None or seed is not None):
            try:
                config.mc = replace(config.mc,
                                    paths=paths if paths is not None else config.mc.paths,
                                    step=step if step is not None else config.mc.step,
                                    seed=config.seed if config.seed is not None else config.mc.seed)
            except ValueError as e:
                raise ConfigError(str(e)) from e
        elif paths is not None or step is not None:
            logger.warning("--paths and --step only apply to Monte Carlo scenarios; ignored")
        if out_dir is not None:
            config.out_dir = out_dir
        config.validate()
        return config

    def resolved_out_dir(self) -> Path:
        return Path(self.out_dir or os.environ.get("DEFAULT_TIME_OUT_DIR", DEFAULT_OUT_DIR))

    def to_dict(self) -> dict:
        out = {
            "name": self.name, "engine": self.engine, "model": self.model,
            "natural": asdict(self.natural), "horizon": self.horizon, "seed": self.seed,
            "suites": list(self.suites),
        }
        if self.tree is not None:
            out["tree"] = self.tree.to_dict()
        if self.mc is not None:
            out["mc"] = asdict(self.mc)
        if self.copula is not None:
            out["copula"] = asdict(self.copula)
        if self.processes:
            out["processes"] = self.processes
        return out


def load_config(path: Union[str, Path], env_file: Optional[Union[str, Path]] = None) -> ScenarioConfig:
    """
    Load a scenario file; a .env file (explicit or found from the working
    directory) may provide DEFAULT_TIME_OUT_DIR and DEFAULT_TIME_LOG_DIR.

    Raises:
        ConfigError: If the file is missing, not JSON, or invalid
    """
    load_dotenv(env_file) if env_file else load_dotenv()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    config = ScenarioConfig.from_dict(data)
    logger.info(f"Loaded scenario {config.name!r} ({config.engine}/{config.model}, "
                f"suites {config.suites})")
    return config


def marginal_processes(tree: ScenarioTree, config: CopulaConfig,
                       A: Optional[AdaptedProcess]) -> List[AdaptedProcess]:
    if config.marginals is None:
        return [A] * config.k
    return [_process_from_spec(tree, spec, f"A{j + 1}") for j, spec in enumerate(config.marginals)]


def is_deterministic(tree: ScenarioTree, X: AdaptedProcess) -> bool:
    return all(np.ptp(X.values[k]) <= 1e-15 for k in range(tree.n_levels))


def _process_from_csv(tree: ScenarioTree, path: Union[str, Path], name: str) -> AdaptedProcess:
    """Read (level, node, value) rows as written by AdaptedProcess.export_csv."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"process file not found: {path}")
    nodes = [[None] * tree.n_nodes(k) for k in range(tree.n_levels)]
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            try:
                k = int(row["level"])
                nodes[k][tree.node_index(k, row["node"])] = float(row["value"])
            except (KeyError, ValueError, IndexError, InvalidSpec) as e:
                raise ConfigError(f"{path}: bad row {row}: {e}") from e
    missing = [(k, i) for k, level in enumerate(nodes) for i, v in enumerate(level) if v is None]
    if missing:
        raise ConfigError(f"{path}: no value for {len(missing)} node(s), first at level "
                          f"{missing[0][0]}")
    return AdaptedProcess.from_nodes(tree, nodes, name)


def named_processes(tree: ScenarioTree, config: ScenarioConfig) -> Dict[str, AdaptedProcess]:
    """
    Processes declared under `processes`: a per-level path, per-level node
    values, or the name of a CSV file with (level, node, value) rows.
    """
    out = {}
    for name, spec in config.processes.items():
        if isinstance(spec, str):
            out[name] = _process_from_csv(tree, spec, name)
        else:
            out[name] = _process_from_spec(tree, spec, name)
    return out
