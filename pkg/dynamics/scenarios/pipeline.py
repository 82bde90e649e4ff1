"""The chained scenario: sink certificate, contracted point, entry near sigma, disk test.

The orbit stages run on the configured model. The singular stages run on
``parameters.singular_model`` (``lemma_model`` by default) along a synthesized
sequence converging to its singularity, since the converging family of sinks is
not produced by a single model.
"""

from __future__ import annotations

import logging
from typing import Any, Dict

import numpy as np

from src.utils.error_handler import NoneFound

from ..tools.field import get_model
from ..tools.flow import flow_point
from ..tools.sinks import shift_to_uniform_scale
from ..tools.splitting import approximate_WF, disk_meets_WF
from .common import ScenarioContext, build_sequence, resolve_sigma, serialize_disk, serialize_shift
from .experiments import (
    DEFAULT_BETA,
    certify_stages,
    entry_time_stage,
    extract_stages,
    side_of,
    split_stage,
)

logger = logging.getLogger(__name__)

DEFAULT_SINGULAR_MODEL = "lemma_model"


def run_pipeline(ctx: ScenarioContext) -> None:
    params = ctx.params
    spec = params.singular_model
    singular = (
        get_model(spec.name, **spec.params) if spec is not None else get_model(DEFAULT_SINGULAR_MODEL)
    )
    sigma = resolve_sigma(singular, params.sigma)
    sequence = build_sequence(ctx, sigma, singular.dim)
    logger.info(
        f"pipeline: orbit model '{ctx.model.name}', singular model '{singular.name}', "
        f"{len(sequence)} sequence points"
    )

    certify_stages(ctx)
    extract_stages(ctx)

    def shift():
        cert = ctx.values["certified"]
        point = ctx.values["contracted_point"]
        horizon = params.horizon or params.periods * cert.schedule.span
        return shift_to_uniform_scale(
            ctx.model, point.point, params.C or 1.0, params.eta, cert.T, horizon, tol=ctx.tol
        )

    ctx.stage(
        "uniform_scale",
        shift,
        serialize_shift,
        verdict=lambda result: result.success,
        requires=("contracted_point",),
    )

    split_stage(ctx, singular, sigma)
    entry_time_stage(ctx, singular, sequence)

    def disk():
        report = ctx.values["splitting"]
        entry = ctx.values["entry_time"]
        if entry.L_star is None:
            raise NoneFound("entry times did not stabilize along the sequence")
        z = flow_point(singular, sequence[-1], entry.L_star, ctx.tol)
        beta = params.beta or DEFAULT_BETA
        curve = approximate_WF(
            singular,
            report,
            side=side_of(report, z),
            arclength=1.5 * beta,
            order=params.order,
        )
        return z, disk_meets_WF(singular, report, curve, z, params.delta)

    def serialize(pair) -> Dict[str, Any]:
        z, outcome = pair
        return {"z": np.asarray(z), **serialize_disk(outcome)}

    ctx.stage(
        "disk_meets_WF",
        disk,
        serialize,
        verdict=lambda pair: pair[1].hit,
        requires=("entry_time",),
    )


__all__ = ["run_pipeline", "DEFAULT_SINGULAR_MODEL"]
