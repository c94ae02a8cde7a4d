"""
Run reports and artifacts.

Every file is written to <name>.tmp, restricted to 0o600 and moved over
the destination. Reports carry SHA-256 checksums of their artifacts and
no timestamps, so a repeated run is byte-identical.
"""

import hashlib
import json
import logging
import shutil
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

import numpy as np


logger = logging.getLogger(__name__)

REPORT_NAME = "report.json"
PLOT_ARTIFACTS = {"density": "density.csv", "order-cdf": "order_cdf.csv", "drift": "drift.csv"}


class MissingArtifact(Exception):
    """Raised when a report lacks the requested artifact."""
    pass


class SuiteError(Exception):
    """Raised when a suite cannot complete; names the statement it was checking."""

    def __init__(self, suite: str, anchor: str, cause: Exception):
        super().__init__(f"{suite} suite failed while checking the {anchor}: "
                         f"{type(cause).__name__}: {cause}")
        self.suite = suite
        self.anchor = anchor
        self.cause = cause


@contextmanager
def atomic_path(path: Path):
    """Yield a temporary path; on success restrict it and move it over `path`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_suffix(path.suffix + ".tmp")
    try:
        yield tmp_path
        tmp_path.chmod(0o600)
        shutil.move(str(tmp_path), str(path))
    except Exception:
        if tmp_path.exists():
            tmp_path.unlink()
        raise


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def compute_checksum(data: Any) -> str:
    """SHA-256 of the canonical JSON form, first 16 hex characters."""
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()[:16]


def file_checksum(path: Union[str, Path]) -> str:
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()[:16]


def _plain(value: Any) -> Any:
    """Convert numpy scalars and arrays for JSON."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if np.isnan(value):
            return "nan"
        if np.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


@dataclass
class Check:
    """One numerical check: a residual or statistic against its tolerance."""
    name: str
    anchor: str
    value: Any
    tolerance: Optional[float] = None
    passed: bool = True

    def to_dict(self) -> dict:
        return _plain({"anchor": self.anchor, "value": self.value,
                       "tolerance": self.tolerance, "passed": self.passed})


@dataclass
class SuiteResult:
    name: str
    checks: List[Check] = field(default_factory=list)
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str, anchor: str, value: Any, tolerance: Optional[float] = None,
              passed: Optional[bool] = None) -> Check:
        """Record a check; with a tolerance it passes when value <= tolerance."""
        if passed is None:
            passed = tolerance is None or float(value) <= tolerance
        c = Check(name, anchor, value, tolerance, bool(passed))
        self.checks.append(c)
        if not c.passed:
            logger.error(f"{self.name}: {name} failed ({anchor}): {value} > {tolerance}")
        return c

    def failures(self) -> List[Check]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"passed": self.passed,
                "checks": {c.name: c.to_dict() for c in self.checks},
                "details": _plain(self.details)}


@dataclass
class Report:
    """Per-suite outcomes plus the artifacts written under out_dir."""
    scenario: str
    config: Dict[str, Any]
    out_dir: Path
    suites: Dict[str, SuiteResult] = field(default_factory=dict)
    artifacts: Dict[str, Dict[str, str]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites.values())

    def add_artifact(self, name: str, writer: Callable[[Path], Any]) -> Path:
        """Write an artifact atomically through writer(tmp_path) and record it."""
        path = self.out_dir / name
        with atomic_path(path) as tmp:
            writer(tmp)
        self.artifacts[name] = {"path": name, "sha256": file_checksum(path)}
        logger.debug(f"Wrote artifact {path}")
        return path

    def to_dict(self) -> dict:
        body = {
            "scenario": self.scenario,
            "config": _plain(self.config),
            "passed": self.passed,
            "suites": {name: result.to_dict() for name, result in self.suites.items()},
            "artifacts": dict(sorted(self.artifacts.items())),
        }
        body["checksum"] = compute_checksum(body)
        return body

    def write(self) -> Path:
        path = self.out_dir / REPORT_NAME
        with atomic_path(path) as tmp:
            with open(tmp, "w", encoding="utf-8") as f:
                json.dump(self.to_dict(), f, indent=2, sort_keys=True)
                f.write("\n")
        logger.info(f"Report written to {path} ({'pass' if self.passed else 'FAIL'})")
        return path

    def summary(self) -> List[str]:
        lines = []
        for name, result in self.suites.items():
            status = "pass" if result.passed else "FAIL"
            lines.append(f"{name}: {status} ({len(result.checks)} checks)")
            for c in result.failures():
                lines.append(f"  {c.name}: {c.value} (tolerance {c.tolerance}) - {c.anchor}")
        return lines


def load_report(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Read a report and verify its checksum and artifact checksums.

    Raises:
        MissingArtifact: If the report or an artifact is missing or altered
    """
    path = Path(path)
    if path.is_dir():
        path = path / REPORT_NAME
    if not path.exists():
        raise MissingArtifact(f"no report at {path}")
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    stored = data.pop("checksum", None)
    if stored != compute_checksum(data):
        raise MissingArtifact(f"report {path} fails its checksum")
    for name, entry in data.get("artifacts", {}).items():
        artifact = path.parent / entry["path"]
        if not artifact.exists() or file_checksum(artifact) != entry["sha256"]:
            raise MissingArtifact(f"artifact {name} is missing or altered")
    data["checksum"] = stored
    return data


def emit_plotdata(report: Union[Report, Dict[str, Any], str, Path], what: str,
                  out_dir: Optional[Union[str, Path]] = None,
                  report_dir: Optional[Union[str, Path]] = None) -> Path:
    """
    Path of the CSV artifact for `what` (density, order-cdf or drift),
    copied into out_dir when given.

    Args:
        report: A Report, a loaded report dict, or the report file or directory
        what: Artifact name
        out_dir: Optional copy target directory
        report_dir: Directory the artifacts of a dict report live in; required
            for dict reports, which do not record their location

    Raises:
        MissingArtifact: For an unknown name or an artifact the run did not produce
        ValueError: For a dict report without report_dir
    """
    if what not in PLOT_ARTIFACTS:
        raise MissingArtifact(f"unknown artifact {what!r}; expected one of {sorted(PLOT_ARTIFACTS)}")
    name = PLOT_ARTIFACTS[what]
    if isinstance(report, Report):
        base, artifacts = report.out_dir, report.artifacts
    else:
        if isinstance(report, dict):
            if report_dir is None:
                raise ValueError("a report dict needs report_dir to locate its artifacts")
            base = Path(report_dir)
        else:
            report_path = Path(report)
            base = report_path if report_path.is_dir() else report_path.parent
            report = load_report(report_path)
        artifacts = report.get("artifacts", {})
    if name not in artifacts:
        raise MissingArtifact(f"the run produced no {what} artifact")
    source = Path(base) / artifacts[name]["path"]
    if out_dir is None:
        return source
    target = Path(out_dir) / name
    with atomic_path(target) as tmp:
        shutil.copyfile(source, tmp)
    return target
