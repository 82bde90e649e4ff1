"""
Обработчик ошибок для численных экспериментов.

Определяет иерархию исключений инструментария и обеспечивает
выполнение стадий сценария с фиксацией ошибок и статистикой.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")


class ToolkitError(Exception):
    """
    Базовый класс для ошибок инструментария.
    """

    def __init__(self, message: str, error_code: str = "TOOLKIT_ERROR"):
        """
        Инициализация ошибки.

        Args:
            message: Сообщение об ошибке
            error_code: Код ошибки
        """
        super().__init__(message)
        self.error_code = error_code


class ConfigError(ToolkitError):
    """
    Ошибка конфигурации сценария (отсутствующее или неверное поле).
    """

    def __init__(self, message: str, field_name: Optional[str] = None):
        super().__init__(message, "CONFIG_ERROR")
        self.field_name = field_name


class UnknownSeries(ToolkitError):
    """
    Запрошенный ряд данных отсутствует в отчете.
    """

    def __init__(self, series: str):
        super().__init__(f"Неизвестный ряд данных: {series}", "UNKNOWN_SERIES")
        self.series = series


class NumericalError(ToolkitError):
    """
    Базовый класс для численных ошибок (код выхода CLI 3).
    """

    default_code = "NUMERICAL_ERROR"

    def __init__(self, message: str, error_code: Optional[str] = None):
        super().__init__(message, error_code or self.default_code)


class NotASingularity(NumericalError):
    default_code = "NOT_A_SINGULARITY"


class EigenFailure(NumericalError):
    default_code = "EIGEN_FAILURE"


class StepFailure(NumericalError):
    default_code = "STEP_FAILURE"


class DegenerateVector(NumericalError):
    default_code = "DEGENERATE_VECTOR"


class InvalidFrame(NumericalError):
    default_code = "INVALID_FRAME"


class SingularPoint(NumericalError):
    default_code = "SINGULAR_POINT"


class NoCrossing(NumericalError):
    default_code = "NO_CROSSING"


class LeftDomain(NumericalError):
    default_code = "LEFT_DOMAIN"

    def __init__(self, message: str, distance: float = float("nan")):
        super().__init__(message)
        self.distance = distance


class BadParameters(NumericalError):
    default_code = "BAD_PARAMETERS"


class NoPlissPoint(NumericalError):
    default_code = "NO_PLISS_POINT"


class NoneFound(NumericalError):
    default_code = "NONE_FOUND"


class NoConvergence(NumericalError):
    default_code = "NO_CONVERGENCE"


class SingularJacobian(NumericalError):
    default_code = "SINGULAR_JACOBIAN"


class NoDominatedF(NumericalError):
    default_code = "NO_DOMINATED_F"


class ZeroVector(NumericalError):
    default_code = "ZERO_VECTOR"


class ResonanceObstruction(NumericalError):
    default_code = "RESONANCE_OBSTRUCTION"


class Unsupported(NumericalError):
    default_code = "UNSUPPORTED"


class InconsistentCertificate(NumericalError):
    default_code = "INCONSISTENT_CERTIFICATE"


@dataclass
class StageOutcome:
    """Результат выполнения одной стадии сценария."""

    name: str
    ok: bool
    value: Any = None
    error_code: Optional[str] = None
    message: Optional[str] = None
    numerical: bool = False

    def as_error_dict(self) -> Optional[Dict[str, str]]:
        if self.ok:
            return None
        return {"code": self.error_code or "", "message": self.message or ""}


@dataclass
class _ErrorStats:
    total_stages: int = 0
    successful_stages: int = 0
    failed_stages: int = 0
    errors_by_type: Dict[str, int] = field(default_factory=dict)


class ErrorHandler:
    """
    Обработчик ошибок для стадий сценария.

    Стадии детерминированы, поэтому повторные попытки не выполняются:
    ошибка инструментария фиксируется в результате, сценарий продолжается.
    """

    def __init__(self) -> None:
        """Инициализация обработчика ошибок."""
        self._stats = _ErrorStats()

    def run_stage(
        self,
        operation: Callable[[], T],
        stage_name: str = "unknown_stage",
    ) -> StageOutcome:
        """
        Выполняет стадию и перехватывает ошибки инструментария.

        Args:
            operation: Функция без аргументов, вычисляющая стадию
            stage_name: Название стадии для логирования

        Returns:
            StageOutcome: Результат или зафиксированная ошибка

        Raises:
            Exception: Любая ошибка, не относящаяся к ToolkitError
        """
        self._stats.total_stages += 1
        logger.debug(f"Запуск стадии: {stage_name}")
        try:
            value = operation()
        except ToolkitError as e:
            self._stats.failed_stages += 1
            error_type = type(e).__name__
            self._stats.errors_by_type[error_type] = (
                self._stats.errors_by_type.get(error_type, 0) + 1
            )
            self.log_error(e, context=stage_name)
            return StageOutcome(
                name=stage_name,
                ok=False,
                error_code=e.error_code,
                message=str(e),
                numerical=isinstance(e, NumericalError),
            )

        self._stats.successful_stages += 1
        logger.debug(f"Стадия выполнена успешно: {stage_name}")
        return StageOutcome(name=stage_name, ok=True, value=value)

    def log_error(self, error: Exception, context: str = "") -> None:
        """
        Логирует ошибку с контекстом.

        Args:
            error: Исключение для логирования
            context: Дополнительный контекст
        """
        if isinstance(error, ToolkitError):
            logger.error(f"[{error.error_code}] {error} - Контекст: {context}")
        else:
            logger.error(f"[{type(error).__name__}] {error} - Контекст: {context}")

    def get_error_stats(self) -> Dict[str, Any]:
        """
        Получает статистику ошибок.

        Returns:
            Dict[str, Any]: Статистика ошибок
        """
        success_rate = (
            self._stats.successful_stages / self._stats.total_stages
            if self._stats.total_stages > 0
            else 0
        )
        return {
            "total_stages": self._stats.total_stages,
            "successful_stages": self._stats.successful_stages,
            "failed_stages": self._stats.failed_stages,
            "errors_by_type": dict(self._stats.errors_by_type),
            "success_rate": success_rate,
        }

    def reset_stats(self) -> None:
        """Сбрасывает статистику ошибок."""
        self._stats = _ErrorStats()
