"""
Scenario runner: configuration, verification suites and reports.
"""

from .config import (
    DEFAULT_OUT_DIR,
    ENGINES,
    MODELS,
    SUITES,
    ConfigError,
    CopulaConfig,
    NaturalConfig,
    ScenarioConfig,
    TreeSpec,
    is_deterministic,
    load_config,
    marginal_processes,
    named_processes,
)
from .report import (
    PLOT_ARTIFACTS,
    REPORT_NAME,
    Check,
    MissingArtifact,
    Report,
    SuiteError,
    SuiteResult,
    atomic_path,
    compute_checksum,
    emit_plotdata,
    file_checksum,
    load_report,
)
from .suites import SUITE_RUNNERS, Scenario, anchored, run

__all__ = [
    'DEFAULT_OUT_DIR',
    'ENGINES',
    'MODELS',
    'SUITES',
    'ConfigError',
    'CopulaConfig',
    'NaturalConfig',
    'ScenarioConfig',
    'TreeSpec',
    'is_deterministic',
    'load_config',
    'marginal_processes',
    'named_processes',
    'PLOT_ARTIFACTS',
    'REPORT_NAME',
    'Check',
    'MissingArtifact',
    'Report',
    'SuiteError',
    'SuiteResult',
    'atomic_path',
    'compute_checksum',
    'emit_plotdata',
    'file_checksum',
    'load_report',
    'SUITE_RUNNERS',
    'Scenario',
    'anchored',
    'run',
]
