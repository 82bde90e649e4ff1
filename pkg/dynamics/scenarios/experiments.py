"""Single-experiment scenarios: each composes tool calls into recorded stages."""

from __future__ import annotations

import logging
from typing import Callable, Dict, Optional

import numpy as np

from src.config import settings
from src.reports.models import Experiment
from src.utils.error_handler import ConfigError

from ..tools.field import VectorFieldModel, classify_singularity
from ..tools.poincare import shrink_probe
from ..tools.sinks import certify_sink, extract_contracted_point, verify_contracted
from ..tools.splitting import (
    SplittingReport,
    approximate_WF,
    cone_claim_check,
    conjugacy_check,
    disk_meets_WF,
    entry_time_experiment,
    lemma_disk_experiment,
    lemma_disk_parameters,
    split_at_singularity,
)
from .common import (
    ScenarioContext,
    build_sequence,
    entry_time_rows,
    leg_norm_rows,
    prepare_orbit,
    resolve_sigma,
    serialize_certificate,
    serialize_classification,
    serialize_cone_claim,
    serialize_contracted_point,
    serialize_contraction_check,
    serialize_curve,
    serialize_disk,
    serialize_disk_report,
    serialize_entry_time,
    serialize_orbit,
    serialize_shrink_probe,
    serialize_splitting,
)

logger = logging.getLogger(__name__)

DEFAULT_T = 1.0
DEFAULT_BETA = 0.1
DEFAULT_RADIUS = 0.1
DEFAULT_ARCLENGTH = 0.5
DEFAULT_DISK_TRIALS = 100


def _require_point(value, name: str, dim: int) -> np.ndarray:
    point = np.asarray(value, dtype=float)
    if point.shape != (dim,):
        raise ConfigError(f"{name} must have dimension {dim}", name)
    return point


def run_classify(ctx: ScenarioContext) -> None:
    model = ctx.model
    if ctx.params.sigma is not None:
        points = [resolve_sigma(model, ctx.params.sigma)]
    else:
        points = [np.asarray(p, dtype=float) for p in model.singularities]
    if not points:
        raise ConfigError(f"model '{model.name}' has no singularity; set parameters.sigma", "parameters.sigma")
    for index, sigma in enumerate(points):
        ctx.stage(
            f"classify[{index}]",
            lambda sigma=sigma: classify_singularity(model, sigma),
            lambda result, sigma=sigma: {"sigma": sigma, **serialize_classification(result)},
            verdict=lambda result: result.is_sectionally_dissipative,
        )


def certify_stages(ctx: ScenarioContext, model: Optional[VectorFieldModel] = None) -> None:
    """Orbit and certificate stages; ``certified`` holds the certificate only when it passed."""

    model = model or ctx.model
    params = ctx.params
    orbit_op = prepare_orbit(ctx, model)
    ctx.stage("orbit", orbit_op, serialize_orbit)
    cert = ctx.stage(
        "certify_sink",
        lambda: certify_sink(
            model,
            ctx.values["orbit"],
            params.alpha,
            params.T or DEFAULT_T,
            m_max=params.m_max,
            phases=params.phases,
            tol=ctx.tol,
        ),
        serialize_certificate,
        verdict=lambda c: c.certified,
        requires=("orbit",),
    )
    ctx.values["certified"] = cert if cert is not None and cert.certified else None
    if cert is not None:
        ctx.add_series("leg_norms", ("i", "t_i", "log_norm"), leg_norm_rows(cert))


def extract_stages(ctx: ScenarioContext, model: Optional[VectorFieldModel] = None) -> None:
    """Contracted-point extraction from a passed certificate and its re-verification."""

    model = model or ctx.model
    params = ctx.params
    if ctx.values.get("certify_sink") is not None and ctx.values.get("certified") is None:
        ctx.skip("contracted_point", "orbit is not certified")
        ctx.skip("verify_contracted", "orbit is not certified")
        return
    ctx.stage(
        "contracted_point",
        lambda: extract_contracted_point(model, ctx.values["certified"], params.eta),
        serialize_contracted_point,
        requires=("certified",),
    )
    ctx.stage(
        "verify_contracted",
        lambda: verify_contracted(
            model,
            ctx.values["contracted_point"].point,
            ctx.values["contracted_point"].schedule,
            1.0,
            params.eta,
            periods=params.periods,
            tol=ctx.tol,
        ),
        serialize_contraction_check,
        verdict=lambda check: check.contracted,
        requires=("contracted_point",),
    )


def split_stage(ctx: ScenarioContext, model: VectorFieldModel, sigma: np.ndarray) -> Optional[SplittingReport]:
    report = ctx.stage(
        "splitting",
        lambda: split_at_singularity(model, sigma, ctx.params.t_grid),
        serialize_splitting,
        verdict=lambda r: r.dominated,
    )
    if report is not None:
        ctx.add_series(
            "domination_ratio",
            ("t", "ratio"),
            [[float(t), float(v)] for t, v in zip(report.t_grid, report.ratios)],
        )
    return report


def side_of(report: SplittingReport, point: np.ndarray) -> int:
    return 1 if float(np.dot(report.left_F, point - report.sigma)) >= 0 else -1


def run_certify_sink(ctx: ScenarioContext) -> None:
    certify_stages(ctx)


def run_pliss_extract(ctx: ScenarioContext) -> None:
    certify_stages(ctx)
    extract_stages(ctx)


def run_splitting(ctx: ScenarioContext) -> None:
    model = ctx.model
    params = ctx.params
    sigma = resolve_sigma(model, params.sigma)
    report = split_stage(ctx, model, sigma)
    if report is None:
        return
    if model.center_curve is None and not report.lambda_F > settings.eigen_tol:
        ctx.skip("manifold", "F is not expanding and the model has no center curve")
        return

    def manifold():
        curve = approximate_WF(
            model, report, side=params.side, arclength=params.arclength or DEFAULT_ARCLENGTH, order=params.order
        )
        return curve, curve.local_invariance_error(model, tol=ctx.tol)

    found = ctx.stage(
        "manifold",
        manifold,
        lambda pair: {**serialize_curve(pair[0]), "invariance_error": pair[1]},
    )
    if found is not None and found[0].coefficients is not None:
        ctx.stage(
            "conjugacy",
            lambda: conjugacy_check(model, found[0], tol=ctx.tol),
            lambda check: {
                "flow_time": check.flow_time,
                "preimage_distance": check.preimage_distance,
                "shadow_error": check.shadow_error,
                "tip_gap": check.tip_gap,
                "passed": check.passed,
            },
            verdict=lambda check: check.passed,
        )


def run_cone_claim(ctx: ScenarioContext) -> None:
    model = ctx.model
    params = ctx.params
    sigma = resolve_sigma(model, params.sigma)
    report = split_stage(ctx, model, sigma)
    ctx.stage(
        "cone_claim",
        lambda: cone_claim_check(
            model,
            report,
            params.alpha,
            params.T_step,
            params.eps,
            params.trials,
            radius=params.radius or DEFAULT_RADIUS,
            seed=ctx.seed,
            orthogonal=params.orthogonal,
            tol=ctx.tol,
        ),
        serialize_cone_claim,
        verdict=lambda result: result.holds,
        requires=("splitting",),
    )


def run_disk_intersection(ctx: ScenarioContext) -> None:
    model = ctx.model
    params = ctx.params
    sigma = resolve_sigma(model, params.sigma)
    z = None if params.z is None else _require_point(params.z, "parameters.z", model.dim)
    report = split_stage(ctx, model, sigma)
    beta = params.beta or DEFAULT_BETA

    if z is not None:
        ctx.stage(
            "disk_meets_WF",
            lambda: disk_meets_WF(
                model,
                report,
                approximate_WF(
                    model,
                    report,
                    side=side_of(report, z),
                    arclength=params.arclength or 1.5 * float(np.linalg.norm(z - sigma)) + beta,
                    order=params.order,
                ),
                z,
                params.delta,
            ),
            serialize_disk,
            verdict=lambda result: result.hit,
            requires=("splitting",),
        )
        return

    ctx.stage(
        "disk_parameters",
        lambda: lemma_disk_parameters(
            model, report, params.delta, beta=beta, seed=ctx.seed, orthogonal=params.orthogonal
        ),
        lambda p: {"delta": p.delta, "alpha": p.alpha, "beta": p.beta, "c": p.c, "c0": p.c0},
        requires=("splitting",),
    )
    ctx.stage(
        "disk_intersection",
        lambda: lemma_disk_experiment(
            model,
            report,
            params.delta,
            parameters=ctx.values["disk_parameters"],
            trials=params.trials or DEFAULT_DISK_TRIALS,
            seed=ctx.seed,
            order=params.order,
            orthogonal=params.orthogonal,
        ),
        serialize_disk_report,
        verdict=lambda result: result.all_hit,
        requires=("disk_parameters",),
    )


def entry_time_stage(ctx: ScenarioContext, model: VectorFieldModel, sequence: np.ndarray) -> None:
    params = ctx.params
    report = ctx.stage(
        "entry_time",
        lambda: entry_time_experiment(
            model,
            ctx.values["splitting"],
            params.cone_alpha or params.alpha,
            params.beta,
            sequence,
            params.L_max,
            t_step=params.t_step,
            orthogonal=params.orthogonal,
            tol=ctx.tol,
        ),
        serialize_entry_time,
        verdict=lambda result: result.matches_prediction,
        requires=("splitting",),
    )
    if report is not None:
        ctx.add_series("entry_time", ("n", "t_start", "t_end"), entry_time_rows(report))


def run_entry_time(ctx: ScenarioContext) -> None:
    model = ctx.model
    sigma = resolve_sigma(model, ctx.params.sigma)
    sequence = build_sequence(ctx, sigma, model.dim)
    split_stage(ctx, model, sigma)
    entry_time_stage(ctx, model, sequence)


def run_shrink_probe(ctx: ScenarioContext) -> None:
    model = ctx.model
    params = ctx.params
    x = _require_point(params.x, "parameters.x", model.dim)
    result = ctx.stage(
        "shrink_probe",
        lambda: shrink_probe(
            model,
            x,
            params.C,
            params.eta,
            params.T,
            params.r,
            params.horizon,
            n_samples=params.n_samples,
            seed=ctx.seed,
            tol=ctx.tol,
        ),
        serialize_shrink_probe,
        verdict=lambda r: r.shrinks,
    )
    if result is not None:
        ctx.add_series(
            "shrink_probe",
            ("t", "diameter"),
            [[float(t), float(d)] for t, d in zip(result.times, result.diameters)],
        )


EXPERIMENTS: Dict[Experiment, Callable[[ScenarioContext], None]] = {
    Experiment.CLASSIFY: run_classify,
    Experiment.CERTIFY_SINK: run_certify_sink,
    Experiment.PLISS_EXTRACT: run_pliss_extract,
    Experiment.SPLITTING: run_splitting,
    Experiment.CONE_CLAIM: run_cone_claim,
    Experiment.DISK_INTERSECTION: run_disk_intersection,
    Experiment.ENTRY_TIME: run_entry_time,
    Experiment.SHRINK_PROBE: run_shrink_probe,
}


__all__ = [
    "EXPERIMENTS",
    "certify_stages",
    "extract_stages",
    "split_stage",
    "side_of",
    "entry_time_stage",
    "run_classify",
    "run_certify_sink",
    "run_pliss_extract",
    "run_splitting",
    "run_cone_claim",
    "run_disk_intersection",
    "run_entry_time",
    "run_shrink_probe",
]
