"""
Конфигурация инструментария flowsinks.

Настройки через Pydantic-модели для типобезопасной конфигурации.
Все числовые значения по умолчанию можно переопределить переменными
окружения с префиксом ``FLOWSINKS_`` или файлом ``.env``.
"""

from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class ToolkitSettings(BaseSettings):
    """
    Основные настройки численного инструментария.
    """

    model_config = SettingsConfigDict(
        env_prefix="FLOWSINKS_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )

    # Интегратор (вложенная схема Рунге-Кутты 8(5,3), плотный вывод)
    abs_tol: float = Field(1e-10, gt=0)
    rel_tol: float = Field(1e-10, gt=0)
    integrator_method: str = "DOP853"

    # Пороги для особых точек и спектра
    singular_tol: float = Field(1e-12, gt=0)  # |X(x)| ниже порога -> особая точка
    eigen_tol: float = Field(1e-9, gt=0)  # допуск на вещественные части

    # Секционное отображение Пуанкаре
    crossing_tol: float = Field(1e-10, gt=0)
    section_domain_bound: float = Field(1.0, gt=0)
    radius_fraction: float = Field(0.25, gt=0)  # radius_check = 0.25 * |X(x)|

    # Уточнение периодических орбит
    orbit_max_iter: int = Field(50, ge=1)
    orbit_residual: float = Field(1e-8, gt=0)

    # Сертификация стоков
    sink_phases: int = Field(16, ge=1)
    sink_m_max: int = Field(8, ge=1)

    # Отчеты
    schema_version: str = "1.0"
    report_timestamps: bool = False  # True ломает побайтовую воспроизводимость

    # Логирование
    log_level: str = "INFO"
    log_file: Optional[str] = None

    @property
    def tolerance(self) -> tuple[float, float]:
        """Пара (абсолютный, относительный) допуск интегратора."""
        return (self.abs_tol, self.rel_tol)


# Глобальный экземпляр настроек
settings = ToolkitSettings()
