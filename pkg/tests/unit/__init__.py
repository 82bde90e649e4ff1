"""
Модульные тесты для flowsinks.

Тесты отдельных инструментов в изоляции.
"""

__version__ = "0.1.0"
