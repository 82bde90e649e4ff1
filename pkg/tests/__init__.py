"""
Тесты для flowsinks.

Содержит модульные и интеграционные тесты, включая приемочные (маркер slow).
"""

__version__ = "0.1.0"
