"""
Unit tests for scenario configuration.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from src.runner import ConfigError, ScenarioConfig, load_config, named_processes


CONFIG_DIR = Path(__file__).resolve().parents[2] / "configs"

T2_TREE = {
    "times": [0, 1, 2],
    "branching": [[0.5, 0.5], [0.5, 0.5]],
    "tau": {"uu": "inf", "ud": 2, "du": 1, "dd": 2},
}


def mc_data(**overrides):
    data = {"name": "mc", "engine": "mc", "model": "natural", "seed": 3,
            "mc": {"steps": 20, "paths": 50}, "suites": ["natural"]}
    data.update(overrides)
    return data


class TestLoadConfig:
    """Test loading scenario files."""

    def test_shipped_configs(self):
        """Test every shipped scenario validates."""
        paths = sorted(CONFIG_DIR.glob("*.json"))

        assert paths
        for path in paths:
            config = load_config(path)
            assert config.name

    def test_t2(self):
        """Test the T2 scenario sections."""
        config = load_config(CONFIG_DIR / "t2.json")

        assert config.engine == "tree"
        assert config.model == "explicit-tree"
        assert config.suites == ["im", "cox", "enlargement"]
        assert config.tree.tau["du"] == 1

    def test_missing_file(self, temp_dir):
        """Test a missing file raises ConfigError."""
        with pytest.raises(ConfigError, match="not found"):
            load_config(temp_dir / "missing.json")

    def test_invalid_json(self, temp_dir):
        """Test malformed JSON raises ConfigError."""
        path = temp_dir / "bad.json"
        path.write_text("{not json")

        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(path)


class TestValidation:
    """Test section validation."""

    def test_mc_needs_seed(self):
        """Test Monte Carlo scenarios without a seed are rejected."""
        data = mc_data()
        del data["seed"]

        with pytest.raises(ConfigError, match="seed"):
            ScenarioConfig.from_dict(data)

    def test_mc_seed_propagates(self):
        """Test the scenario seed is the seed of the simulation."""
        config = ScenarioConfig.from_dict(mc_data())

        assert config.mc.seed == 3
        assert config.mc.steps == 20

    def test_mc_runs_natural_suites_only(self):
        """Test tree-only suites are rejected for the Monte Carlo engine."""
        with pytest.raises(ConfigError, match="tree engine"):
            ScenarioConfig.from_dict(mc_data(suites=["natural", "cox"]))

    def test_unknown_shaping_function(self):
        """Test only the saturating shaping function is accepted."""
        with pytest.raises(ConfigError, match="shaping"):
            ScenarioConfig.from_dict(mc_data(mc={"phi": "linear"}))

    def test_invalid_mc_values(self):
        """Test invalid simulation values raise ConfigError."""
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict(mc_data(mc={"z0": 1.5}))

    @pytest.mark.parametrize("data", [
        {"engine": "grid", "tree": T2_TREE},
        {"model": "hawkes", "tree": T2_TREE},
        {"suites": ["im", "pricing"], "tree": T2_TREE},
        {"colour": "blue", "tree": T2_TREE},
        {"model": "explicit-tree"},
        {"model": "explicit-tree", "tree": {"times": [0, 1], "branching": [[0.5, 0.5]]}},
        {"model": "cox", "tree": T2_TREE},
        {"model": "copula", "tree": T2_TREE},
        {"natural": {"driver_scale": -1.0}, "tree": T2_TREE},
    ])
    def test_rejected(self, data):
        """Test inconsistent scenarios raise ConfigError."""
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict(data)

    def test_invalid_tree(self):
        """Test tree validation failures surface as ConfigError."""
        tree = dict(T2_TREE, branching=[[0.5, 0.4], [0.5, 0.5]])
        config = ScenarioConfig.from_dict({"tree": tree})

        with pytest.raises(ConfigError, match="invalid tree"):
            config.tree.build()


class TestOverrides:
    """Test command-line overrides."""

    def test_seed_and_paths(self):
        """Test seed and path overrides reach the simulation section."""
        config = ScenarioConfig.from_dict(mc_data()).with_overrides(seed=9, paths=80)

        assert config.seed == 9
        assert config.mc.seed == 9
        assert config.mc.paths == 80

    def test_bad_step(self):
        """Test a nonpositive step override raises ConfigError."""
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict(mc_data()).with_overrides(step=0.0)

    def test_out_dir(self, monkeypatch):
        """Test explicit, environment and default output directories."""
        config = ScenarioConfig.from_dict({"tree": T2_TREE})
        monkeypatch.delenv("DEFAULT_TIME_OUT_DIR", raising=False)
        assert config.resolved_out_dir() == Path("out")

        monkeypatch.setenv("DEFAULT_TIME_OUT_DIR", "/tmp/runs")
        assert config.resolved_out_dir() == Path("/tmp/runs")

        assert config.with_overrides(out_dir="here").resolved_out_dir() == Path("here")

    def test_to_dict_round_trip(self):
        """Test the serialized form validates to the same scenario."""
        config = ScenarioConfig.from_dict(mc_data())

        again = ScenarioConfig.from_dict(json.loads(json.dumps(config.to_dict())))

        assert again.to_dict() == config.to_dict()


class TestNamedProcesses:
    """Test processes declared in the scenario."""

    def test_path_and_nodes(self):
        """Test per-level paths and node values."""
        config = ScenarioConfig.from_dict({"tree": T2_TREE, "processes": {
            "flat": [0.0, 1.0, 2.0],
            "split": [[0.0], [1.0, -1.0], [2.0, 0.0, 0.0, -2.0]],
        }})
        tree, _, _ = config.tree.build()

        processes = named_processes(tree, config)

        np.testing.assert_allclose(processes["flat"].values[2], [2.0] * 4)
        np.testing.assert_allclose(processes["split"].values[1], [1.0, 1.0, -1.0, -1.0])

    def test_csv(self, temp_dir):
        """Test (level, node, value) rows are read back onto the tree."""
        path = temp_dir / "X.csv"
        rows = ["level,node,value", "0,root,0.0", "1,u,1.0", "1,d,-1.0",
                "2,uu,2.0", "2,ud,0.0", "2,du,0.0", "2,dd,-2.0"]
        path.write_text("\n".join(rows) + "\n")
        config = ScenarioConfig.from_dict({"tree": T2_TREE, "processes": {"X": str(path)}})
        tree, _, _ = config.tree.build()

        X = named_processes(tree, config)["X"]

        np.testing.assert_allclose(X.values[2], [2.0, 0.0, 0.0, -2.0])

    def test_csv_missing_node(self, temp_dir):
        """Test a CSV without every node raises ConfigError."""
        path = temp_dir / "X.csv"
        path.write_text("level,node,value\n0,root,0.0\n1,u,1.0\n")
        config = ScenarioConfig.from_dict({"tree": T2_TREE, "processes": {"X": str(path)}})
        tree, _, _ = config.tree.build()

        with pytest.raises(ConfigError, match="no value"):
            named_processes(tree, config)

    def test_wrong_level_count(self):
        """Test a path of the wrong length raises ConfigError."""
        config = ScenarioConfig.from_dict({"tree": T2_TREE, "processes": {"X": [0.0, 1.0]}})
        tree, _, _ = config.tree.build()

        with pytest.raises(ConfigError):
            named_processes(tree, config)
