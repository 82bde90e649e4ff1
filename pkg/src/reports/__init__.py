"""
Модели и хранилище отчетов flowsinks.
"""

from src.reports.models import (
    Experiment,
    ModelSpec,
    RunReport,
    ScenarioConfig,
    SeriesData,
    StageResult,
    StageStatus,
    parse_config,
)
from src.reports.storage import ReportStorage, load_config_file

__all__ = [
    "Experiment",
    "ModelSpec",
    "RunReport",
    "ScenarioConfig",
    "SeriesData",
    "StageResult",
    "StageStatus",
    "parse_config",
    "ReportStorage",
    "load_config_file",
]
