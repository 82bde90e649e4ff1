"""
Модели сценариев и отчетов flowsinks.

Определяет Pydantic-модели конфигурации эксперимента и отчета о запуске.
Схема отчета публикуется через ``RunReport.model_json_schema()``.
"""

import math
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from src.utils.error_handler import ConfigError


class Experiment(str, Enum):
    """Доступные эксперименты."""

    CLASSIFY = "classify"
    CERTIFY_SINK = "certify_sink"
    PLISS_EXTRACT = "pliss_extract"
    SPLITTING = "splitting"
    CONE_CLAIM = "cone_claim"
    DISK_INTERSECTION = "disk_intersection"
    ENTRY_TIME = "entry_time"
    SHRINK_PROBE = "shrink_probe"
    PIPELINE = "pipeline"


class StageStatus(str, Enum):
    """Статус стадии сценария."""

    OK = "ok"
    FAILED = "failed"
    SKIPPED = "skipped"


class ModelSpec(BaseModel):
    """Имя модели из каталога и ее параметры."""

    model_config = ConfigDict(extra="forbid")

    name: str = Field(..., min_length=1, description="Имя модели в каталоге")
    params: Dict[str, Any] = Field(default_factory=dict, description="Параметры модели")


class OrbitGuess(BaseModel):
    """Начальное приближение периодической орбиты."""

    model_config = ConfigDict(extra="forbid")

    point: List[float] = Field(..., min_length=1, description="Точка на орбите")
    period: float = Field(..., gt=0, description="Приближение периода")
    refine: bool = Field(True, description="Уточнять орбиту методом Ньютона")


class SequenceSpec(BaseModel):
    """
    Синтетическая последовательность x_n = sigma + s_n * w, s_n = scale * ratio**n.
    """

    model_config = ConfigDict(extra="forbid")

    direction: List[float] = Field(..., min_length=1, description="Направление w")
    scale: float = Field(0.02, gt=0, description="Начальный масштаб s_0")
    ratio: float = Field(0.7, gt=0, lt=1, description="Множитель масштаба")
    count: int = Field(20, ge=1, description="Число точек")


class ExperimentParameters(BaseModel):
    """
    Числовые параметры эксперимента.

    Обязательность полей зависит от эксперимента (см. REQUIRED_PARAMETERS).
    """

    model_config = ConfigDict(extra="forbid")

    sigma: Optional[List[float]] = Field(None, description="Особая точка (по умолчанию первая из модели)")
    x: Optional[List[float]] = Field(None, description="Регулярная точка для shrink_probe")
    orbit: Optional[OrbitGuess] = Field(None, description="Приближение периодической орбиты")

    alpha: Optional[float] = Field(None, gt=0, description="Скорость стока / раствор конуса")
    T: Optional[float] = Field(None, gt=0, description="Максимальный шаг разбиения")
    eta: Optional[float] = Field(None, gt=0, description="Показатель сжатия")
    cone_alpha: Optional[float] = Field(
        None, gt=0, description="Раствор конуса области D (по умолчанию alpha)"
    )
    C: Optional[float] = Field(None, gt=0, description="Константа (C, eta, T)-сжатия")
    beta: Optional[float] = Field(None, gt=0, description="Радиус области D")
    delta: Optional[float] = Field(None, gt=0, description="Относительный радиус нормального диска")

    m_max: Optional[int] = Field(None, ge=1, description="Максимальное число периодов")
    phases: Optional[int] = Field(None, ge=1, description="Число проверяемых фаз")
    horizon: Optional[float] = Field(None, gt=0, description="Горизонт по времени")
    periods: int = Field(8, ge=1, description="Число периодов для повторной проверки")

    r: Optional[float] = Field(None, gt=0, description="Относительный радиус диска для shrink_probe")
    n_samples: int = Field(16, ge=2, description="Число граничных точек диска")
    t_grid: Optional[List[float]] = Field(None, description="Сетка времени для отношения доминирования")

    T_step: Optional[float] = Field(None, gt=0, description="Шаг обратного потока")
    eps: Optional[float] = Field(None, gt=0, description="Расстояние между точками пары")
    trials: Optional[int] = Field(None, ge=1, description="Число испытаний")
    radius: Optional[float] = Field(None, gt=0, description="Радиус окрестности")

    L_max: Optional[float] = Field(None, gt=0, description="Горизонт времени входа")
    t_step: float = Field(0.05, gt=0, description="Шаг сетки времени входа")
    sequence: Optional[SequenceSpec] = Field(None, description="Синтетическая последовательность")
    points: Optional[List[List[float]]] = Field(None, description="Явная последовательность точек")

    z: Optional[List[float]] = Field(None, description="Центр нормального диска")
    side: int = Field(1, description="Ветвь W^F (+1 или -1)")
    arclength: Optional[float] = Field(None, gt=0, description="Длина дуги W^F")
    order: int = Field(12, ge=1, description="Порядок разложения Тейлора")
    orthogonal: bool = Field(False, description="Ортогональное разложение E + F")

    singular_model: Optional[ModelSpec] = Field(
        None, description="Модель с особой точкой для второй половины конвейера"
    )

    @field_validator("side")
    @classmethod
    def side_is_sign(cls, v: int) -> int:
        """Проверяем, что side = +1 или -1."""
        if v not in (1, -1):
            raise ValueError("side должен быть +1 или -1")
        return v


class OutputSettings(BaseModel):
    """Настройки вывода."""

    model_config = ConfigDict(extra="forbid")

    directory: Optional[str] = Field(None, description="Каталог для отчета и таблиц")
    report_name: str = Field("report.json", description="Имя файла отчета")
    emit: List[str] = Field(default_factory=list, description="Ряды данных для выгрузки")


class ScenarioConfig(BaseModel):
    """
    Конфигурация сценария.

    Один JSON-файл: модель, эксперимент, параметры, зерно и вывод.
    """

    model_config = ConfigDict(extra="forbid", use_enum_values=False)

    model: ModelSpec = Field(..., description="Модель векторного поля")
    experiment: Experiment = Field(..., description="Эксперимент")
    parameters: ExperimentParameters = Field(default_factory=ExperimentParameters)
    seed: int = Field(0, ge=0, description="Зерно генератора случайных чисел")
    tolerance: Optional[float] = Field(None, gt=0, description="Допуск интегратора (abs = rel)")
    output: OutputSettings = Field(default_factory=OutputSettings)


# Обязательные параметры для каждого эксперимента
REQUIRED_PARAMETERS: Dict[Experiment, tuple[str, ...]] = {
    Experiment.CLASSIFY: (),
    Experiment.CERTIFY_SINK: ("alpha",),
    Experiment.PLISS_EXTRACT: ("alpha", "eta"),
    Experiment.SPLITTING: (),
    Experiment.CONE_CLAIM: ("alpha", "T_step", "eps", "trials"),
    Experiment.DISK_INTERSECTION: ("delta",),
    Experiment.ENTRY_TIME: ("alpha", "beta", "L_max"),
    Experiment.SHRINK_PROBE: ("C", "eta", "T", "r", "horizon", "x"),
    Experiment.PIPELINE: ("alpha", "eta", "beta", "L_max", "delta", "sequence"),
}


def _first_error_field(error: ValidationError) -> str:
    details = error.errors()
    if not details:
        return "<root>"
    return ".".join(str(part) for part in details[0]["loc"])


def parse_config(data: Dict[str, Any]) -> ScenarioConfig:
    """
    Проверяет словарь конфигурации и обязательные параметры эксперимента.

    Raises:
        ConfigError: С именем первого неверного или отсутствующего поля
    """
    try:
        config = ScenarioConfig.model_validate(data)
    except ValidationError as e:
        field_name = _first_error_field(e)
        raise ConfigError(
            f"Неверная конфигурация в поле '{field_name}': {e.errors()[0]['msg']}",
            field_name,
        ) from e

    params = config.parameters
    for name in REQUIRED_PARAMETERS[config.experiment]:
        if getattr(params, name) is None:
            raise ConfigError(
                f"Для эксперимента '{config.experiment.value}' требуется параметр "
                f"'parameters.{name}'",
                f"parameters.{name}",
            )
    if config.experiment == Experiment.ENTRY_TIME and params.sequence is None and params.points is None:
        raise ConfigError(
            "Для эксперимента 'entry_time' требуется 'parameters.sequence' или 'parameters.points'",
            "parameters.sequence",
        )
    return config


class ErrorInfo(BaseModel):
    """Ошибка стадии."""

    code: str = Field(..., description="Код ошибки")
    message: str = Field(..., description="Сообщение")
    numerical: bool = Field(False, description="Численная ошибка (код выхода 3)")


class StageResult(BaseModel):
    """Результат одной стадии сценария."""

    name: str = Field(..., description="Название стадии")
    status: StageStatus = Field(..., description="Статус стадии")
    verdict: Optional[bool] = Field(None, description="Вердикт стадии, если применим")
    data: Dict[str, Any] = Field(default_factory=dict, description="Результаты стадии")
    error: Optional[ErrorInfo] = Field(None, description="Ошибка, если стадия не выполнена")


class SeriesData(BaseModel):
    """Табличный ряд данных для графиков."""

    name: str = Field(..., description="Имя ряда")
    columns: List[str] = Field(..., min_length=1, description="Имена столбцов")
    rows: List[List[Optional[float]]] = Field(default_factory=list, description="Строки таблицы")

    @field_validator("rows")
    @classmethod
    def rows_match_columns(cls, v: List[List[Optional[float]]], info) -> List[List[Optional[float]]]:
        """Проверяем, что длина строк совпадает с числом столбцов."""
        columns = info.data.get("columns")
        if columns is not None:
            for row in v:
                if len(row) != len(columns):
                    raise ValueError("длина строки не совпадает с числом столбцов")
        return v


class Provenance(BaseModel):
    """Происхождение отчета."""

    toolkit: str = Field("flowsinks", description="Имя инструментария")
    version: str = Field(..., description="Версия инструментария")
    schema_version: str = Field(..., description="Версия схемы отчета")
    seed: int = Field(0, description="Зерно генератора")
    tolerance: List[float] = Field(..., description="Допуски интегратора (abs, rel)")
    started_at: Optional[str] = Field(None, description="Время начала (ISO 8601)")
    finished_at: Optional[str] = Field(None, description="Время окончания (ISO 8601)")


class RunReport(BaseModel):
    """
    Отчет о запуске сценария.

    Сериализуется в JSON без потерь: ``RunReport.model_validate_json``
    восстанавливает равный объект.
    """

    schema_version: str = Field(..., description="Версия схемы отчета")
    provenance: Provenance
    experiment: Experiment
    config: Dict[str, Any] = Field(..., description="Копия конфигурации")
    stages: List[StageResult] = Field(default_factory=list)
    series: Dict[str, SeriesData] = Field(default_factory=dict)
    verdicts: Dict[str, Optional[bool]] = Field(default_factory=dict)

    def stage(self, name: str) -> Optional[StageResult]:
        """Возвращает стадию по имени."""
        for stage in self.stages:
            if stage.name == name:
                return stage
        return None

    @property
    def has_numerical_failure(self) -> bool:
        """Есть ли стадия, завершившаяся численной ошибкой."""
        return any(
            stage.status == StageStatus.FAILED and stage.error is not None and stage.error.numerical
            for stage in self.stages
        )


def sanitize(value: Any) -> Any:
    """
    Приводит значения numpy к типам JSON; NaN и бесконечности становятся None.
    """
    if isinstance(value, dict):
        return {str(key): sanitize(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [sanitize(item) for item in value]
    if isinstance(value, np.ndarray):
        return sanitize(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        number = float(value)
        return number if math.isfinite(number) else None
    if isinstance(value, (complex, np.complexfloating)):
        return [sanitize(value.real), sanitize(value.imag)]
    if isinstance(value, Enum):
        return value.value
    return value
