"""
Утилиты flowsinks.

Содержит иерархию ошибок и обработчик стадий.
"""

__version__ = "0.1.0"
