"""
Интеграционные тесты для flowsinks.

Сценарии целиком, CLI и приемочные проверки.
"""

__version__ = "0.1.0"
