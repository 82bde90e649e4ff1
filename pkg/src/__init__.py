"""
Инфраструктура инструментария flowsinks.

Содержит точку входа CLI, настройки, модели отчетов и обработку ошибок.
"""

__version__ = "0.1.0"
__author__ = "flowsinks developers"
