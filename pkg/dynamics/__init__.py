"""
Численные инструменты для сингулярных потоков.

Содержит вычислительные модули (tools) и сценарии экспериментов (scenarios).
"""

__version__ = "0.1.0"

from .tools.field import VectorFieldModel, classify_singularity, get_model, list_models
from .tools.flow import integrate, tangent_flow
from .tools.pliss import find_tail_offset, pliss_bound, pliss_point
from .tools.poincare import PartitionSchedule, chain_product, linear_poincare
from .tools.sinks import certify_sink, extract_contracted_point, refine_orbit
from .tools.splitting import split_at_singularity

__all__ = [
    "__version__",
    "VectorFieldModel",
    "classify_singularity",
    "get_model",
    "list_models",
    "integrate",
    "tangent_flow",
    "find_tail_offset",
    "pliss_bound",
    "pliss_point",
    "PartitionSchedule",
    "chain_product",
    "linear_poincare",
    "certify_sink",
    "extract_contracted_point",
    "refine_orbit",
    "split_at_singularity",
]
