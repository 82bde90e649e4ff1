"""Scenario runner: dispatch a validated config and assemble the run report."""

from __future__ import annotations

import logging
from datetime import datetime, timezone
from typing import Callable, Dict, Optional

from src import __version__
from src.config import settings
from src.reports.models import Experiment, Provenance, RunReport, ScenarioConfig

from .common import ScenarioContext, build_context
from .experiments import EXPERIMENTS
from .pipeline import run_pipeline

logger = logging.getLogger(__name__)

SCENARIOS: Dict[Experiment, Callable[[ScenarioContext], None]] = {
    **EXPERIMENTS,
    Experiment.PIPELINE: run_pipeline,
}


def _now() -> Optional[str]:
    if not settings.report_timestamps:
        return None
    return datetime.now(timezone.utc).isoformat()


def run(config: ScenarioConfig) -> RunReport:
    """Execute the configured experiment.

    ConfigError from input resolution propagates; numerical failures are
    recorded per stage and the remaining stages still run where they can.
    """

    started = _now()
    ctx = build_context(config)
    logger.info(f"Running '{config.experiment.value}' on model '{ctx.model.name}'")
    SCENARIOS[config.experiment](ctx)

    stats = ctx.handler.get_error_stats()
    logger.info(
        f"Finished: {stats['total_stages']} stages, {stats['failed_stages']} failed"
    )
    return RunReport(
        schema_version=settings.schema_version,
        provenance=Provenance(
            version=__version__,
            schema_version=settings.schema_version,
            seed=config.seed,
            tolerance=list(ctx.tol),
            started_at=started,
            finished_at=_now(),
        ),
        experiment=config.experiment,
        config=config.model_dump(mode="json"),
        stages=ctx.stages,
        series=ctx.series,
        verdicts={stage.name: stage.verdict for stage in ctx.stages if stage.verdict is not None},
    )


__all__ = ["SCENARIOS", "run"]
