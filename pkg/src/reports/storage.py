"""
Хранение отчетов и выгрузка данных для графиков.

Отчет сохраняется в JSON, ряды данных - в текстовые таблицы,
разделенные пробелами, с заголовком.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

import pandas as pd

from src.reports.models import RunReport, SeriesData
from src.utils.error_handler import ConfigError, UnknownSeries

logger = logging.getLogger(__name__)


def load_config_file(path: str) -> Dict[str, Any]:
    """
    Читает JSON-файл конфигурации.

    Args:
        path: Путь к файлу

    Returns:
        Dict[str, Any]: Содержимое файла

    Raises:
        ConfigError: Если файл отсутствует или не является JSON-объектом
    """
    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigError(f"Файл конфигурации не найден: {path}", "config")
    try:
        data = json.loads(config_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"Файл конфигурации не является JSON: {e}", "config") from e
    if not isinstance(data, dict):
        raise ConfigError("Конфигурация должна быть JSON-объектом", "config")
    return data


def series_frame(series: SeriesData) -> pd.DataFrame:
    """
    Преобразует ряд данных в DataFrame.

    Args:
        series: Ряд данных отчета

    Returns:
        pd.DataFrame: Таблица со столбцами ряда
    """
    return pd.DataFrame(series.rows, columns=series.columns, dtype=float)


class ReportStorage:
    """
    Хранилище отчетов в каталоге вывода.
    """

    def __init__(self, directory: str):
        """
        Инициализация хранилища.

        Args:
            directory: Каталог для отчетов и таблиц
        """
        self.directory = Path(directory)

    def save_report(self, report: RunReport, name: str = "report.json") -> Path:
        """
        Сохраняет отчет в JSON.

        Args:
            report: Отчет о запуске
            name: Имя файла

        Returns:
            Path: Путь к сохраненному файлу
        """
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.directory / name
        path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
        logger.info(f"Отчет сохранен: {path}")
        return path

    def load_report(self, name: str = "report.json") -> Optional[RunReport]:
        """
        Загружает отчет из JSON.

        Args:
            name: Имя файла

        Returns:
            Optional[RunReport]: Отчет или None, если файл отсутствует
        """
        path = self.directory / name
        if not path.is_file():
            logger.warning(f"Отчет не найден: {path}")
            return None
        return RunReport.model_validate_json(path.read_text(encoding="utf-8"))

    def emit_plotdata(self, report: RunReport, names: Iterable[str]) -> List[Path]:
        """
        Выгружает ряды данных в текстовые таблицы ``<имя>.dat``.

        Args:
            report: Отчет с рядами данных
            names: Имена рядов

        Returns:
            List[Path]: Пути к созданным файлам

        Raises:
            UnknownSeries: Если ряда нет в отчете
        """
        requested = list(names)
        for name in requested:
            if name not in report.series:
                raise UnknownSeries(name)

        self.directory.mkdir(parents=True, exist_ok=True)
        paths: List[Path] = []
        for name in requested:
            path = self.directory / f"{name}.dat"
            frame = series_frame(report.series[name])
            frame.to_csv(path, sep=" ", index=False, na_rep="nan", float_format="%.12g")
            logger.debug(f"Ряд '{name}' выгружен: {path} ({len(frame)} строк)")
            paths.append(path)
        return paths
