"""Shared state, input resolution and serializers for scenario runs."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from src.config import settings
from src.reports.models import (
    ErrorInfo,
    ExperimentParameters,
    ScenarioConfig,
    SeriesData,
    StageResult,
    StageStatus,
    sanitize,
)
from src.utils.error_handler import ConfigError, ErrorHandler

from ..tools.field import SingularityClass, VectorFieldModel, get_model
from ..tools.flow import Tolerance
from ..tools.poincare import ShrinkProbeResult
from ..tools.sinks import (
    ContractedPoint,
    ContractionCheck,
    PeriodicOrbit,
    ShiftResult,
    SinkCertificate,
    refine_orbit,
)
from ..tools.splitting import (
    ConeClaimReport,
    DiskIntersection,
    EntryTimeReport,
    LemmaDiskReport,
    ManifoldCurve,
    SplittingReport,
    splitting_residuals,
)

logger = logging.getLogger(__name__)


@dataclass
class ScenarioContext:
    """Everything a scenario needs: the model, parameters and the stage log."""

    config: ScenarioConfig
    model: VectorFieldModel
    tol: Tolerance
    handler: ErrorHandler = field(default_factory=ErrorHandler)
    stages: List[StageResult] = field(default_factory=list)
    series: Dict[str, SeriesData] = field(default_factory=dict)
    values: Dict[str, Any] = field(default_factory=dict)

    @property
    def params(self) -> ExperimentParameters:
        return self.config.parameters

    @property
    def seed(self) -> int:
        return self.config.seed

    def stage(
        self,
        name: str,
        operation: Callable[[], Any],
        serializer: Callable[[Any], Dict[str, Any]],
        verdict: Optional[Callable[[Any], Optional[bool]]] = None,
        requires: Sequence[str] = (),
    ) -> Any:
        """Run one stage unless a stage it depends on has no value; record the outcome.

        Returns the stage value, or None when the stage failed or was skipped.
        """

        missing = [dep for dep in requires if self.values.get(dep) is None]
        if missing:
            logger.info(f"Stage '{name}' skipped: missing {', '.join(missing)}")
            self.stages.append(
                StageResult(
                    name=name,
                    status=StageStatus.SKIPPED,
                    data={"missing": missing},
                )
            )
            self.values[name] = None
            return None

        outcome = self.handler.run_stage(operation, name)
        if not outcome.ok:
            self.stages.append(
                StageResult(
                    name=name,
                    status=StageStatus.FAILED,
                    error=ErrorInfo(**outcome.as_error_dict(), numerical=outcome.numerical),
                )
            )
            self.values[name] = None
            return None

        value = outcome.value
        self.stages.append(
            StageResult(
                name=name,
                status=StageStatus.OK,
                verdict=None if verdict is None else verdict(value),
                data=sanitize(serializer(value)),
            )
        )
        self.values[name] = value
        return value

    def skip(self, name: str, reason: str) -> None:
        logger.info(f"Stage '{name}' skipped: {reason}")
        self.stages.append(StageResult(name=name, status=StageStatus.SKIPPED, data={"reason": reason}))
        self.values[name] = None

    def add_series(self, name: str, columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
        self.series[name] = SeriesData(
            name=name, columns=list(columns), rows=[sanitize(list(row)) for row in rows]
        )


def build_context(config: ScenarioConfig) -> ScenarioContext:
    """Resolve the model and integrator tolerance of a validated config."""

    model = get_model(config.model.name, **config.model.params)
    tol = (config.tolerance, config.tolerance) if config.tolerance else settings.tolerance
    return ScenarioContext(config=config, model=model, tol=tol)


def resolve_sigma(model: VectorFieldModel, sigma: Optional[Sequence[float]]) -> np.ndarray:
    """Explicit sigma or the model's first known singularity."""

    if sigma is not None:
        point = np.asarray(sigma, dtype=float)
    elif model.singularities:
        point = np.asarray(model.singularities[0], dtype=float)
    else:
        raise ConfigError(f"model '{model.name}' has no singularity; set parameters.sigma", "parameters.sigma")
    if point.shape != (model.dim,):
        raise ConfigError(
            f"parameters.sigma has dimension {point.size}, model '{model.name}' has {model.dim}",
            "parameters.sigma",
        )
    return point


def _closed_form_orbit(model: VectorFieldModel) -> Optional[PeriodicOrbit]:
    if model.name == "hopf":
        radius = math.sqrt(float(model.params["mu"]))
        return PeriodicOrbit(anchor=np.array([radius, 0.0]), period=2 * math.pi, residual=0.0)
    if model.name == "rotation":
        return PeriodicOrbit(anchor=np.array([1.0, 0.0]), period=2 * math.pi, residual=0.0)
    return None


def prepare_orbit(
    ctx: ScenarioContext, model: Optional[VectorFieldModel] = None
) -> Callable[[], PeriodicOrbit]:
    """Check the orbit settings now and return the deferred orbit computation.

    Without ``parameters.orbit`` the model's closed-form cycle is used as is.
    """

    model = model or ctx.model
    guess = ctx.params.orbit
    if guess is None:
        orbit = _closed_form_orbit(model)
        if orbit is None:
            raise ConfigError(
                f"model '{model.name}' has no closed-form orbit; set parameters.orbit",
                "parameters.orbit",
            )
        return lambda: orbit
    if len(guess.point) != model.dim:
        raise ConfigError(
            f"parameters.orbit.point has dimension {len(guess.point)}, model has {model.dim}",
            "parameters.orbit.point",
        )
    if not guess.refine:
        anchor = np.asarray(guess.point, dtype=float)
        return lambda: PeriodicOrbit(anchor=anchor, period=guess.period, residual=float("nan"))
    return lambda: refine_orbit(model, guess.point, guess.period, tol=ctx.tol)


def build_sequence(ctx: ScenarioContext, sigma: np.ndarray, dim: int) -> np.ndarray:
    """Explicit points, or the synthetic family sigma + scale * ratio**n * w."""

    params = ctx.params
    if params.points is not None:
        points = np.asarray(params.points, dtype=float)
        if points.ndim != 2 or points.shape[1] != dim:
            raise ConfigError(f"parameters.points must be a list of {dim}-vectors", "parameters.points")
        return points
    spec = params.sequence
    if spec is None:
        raise ConfigError("set parameters.sequence or parameters.points", "parameters.sequence")
    direction = np.asarray(spec.direction, dtype=float)
    if direction.shape != (dim,):
        raise ConfigError(
            f"parameters.sequence.direction must have dimension {dim}", "parameters.sequence.direction"
        )
    scales = spec.scale * spec.ratio ** np.arange(spec.count)
    return sigma + scales[:, None] * direction[None, :]


def serialize_classification(result: SingularityClass) -> Dict[str, Any]:
    return {
        "eigenvalues": [[float(z.real), float(z.imag)] for z in result.eigenvalues],
        "is_hyperbolic": result.is_hyperbolic,
        "is_sectionally_dissipative": result.is_sectionally_dissipative,
        "max_real_part": result.max_real_part,
    }


def serialize_orbit(orbit: PeriodicOrbit) -> Dict[str, Any]:
    return {
        "anchor": orbit.anchor,
        "period": orbit.period,
        "residual": orbit.residual,
        "iterations": orbit.iterations,
    }


def serialize_certificate(cert: SinkCertificate) -> Dict[str, Any]:
    return {
        "orbit": serialize_orbit(cert.orbit),
        "alpha": cert.alpha,
        "T": cert.T,
        "m": cert.m,
        "certified": cert.certified,
        "log_product": cert.log_product,
        "margin": cert.margin,
        "exponent": cert.exponent,
        "schedule_times": cert.schedule.times,
        "leg_norms": cert.leg_norms,
        "phase_log_products": cert.phase_log_products,
    }


def serialize_contracted_point(point: ContractedPoint) -> Dict[str, Any]:
    return {
        "point": point.point,
        "index": point.index,
        "time": point.time,
        "candidates": list(point.candidates),
        "schedule_times": point.schedule.times,
    }


def serialize_contraction_check(check: ContractionCheck) -> Dict[str, Any]:
    return {
        "worst_violation": check.worst_violation,
        "contracted": check.contracted,
        "legs": int(check.log_norms.size),
    }


def serialize_shift(result: ShiftResult) -> Dict[str, Any]:
    return {
        "point": result.point,
        "success": result.success,
        "L": result.L,
        "time": result.time,
        "bound": result.bound,
        "measured_C": result.measured_C,
    }


def serialize_splitting(report: SplittingReport) -> Dict[str, Any]:
    e_defect, f_defect = splitting_residuals(report)
    return {
        "sigma": report.sigma,
        "eigenvalues": [[float(z.real), float(z.imag)] for z in report.eigenvalues],
        "F_vector": report.F_vector,
        "E_basis": report.E_basis.T,
        "lambda_F": report.lambda_F,
        "spectral_gap": report.spectral_gap,
        "fitted_C": report.fitted_C,
        "fitted_lambda": report.fitted_lambda,
        "dominated": report.dominated,
        "E_contracting": report.E_contracting,
        "residuals": {"E": e_defect, "F": f_defect},
    }


def serialize_curve(curve: ManifoldCurve) -> Dict[str, Any]:
    return {
        "side": curve.side,
        "source": curve.source,
        "arclength": curve.arclength,
        "samples": int(curve.points.shape[0]),
        "tip": curve.points[-1],
        "rate": curve.rate,
    }


def serialize_cone_claim(result: ConeClaimReport) -> Dict[str, Any]:
    return {
        "alpha": result.alpha,
        "T_step": result.T_step,
        "eps": result.eps,
        "radius": result.radius,
        "sample_radius": result.sample_radius,
        "trials": result.trials,
        "checked": result.checked,
        "skipped": result.skipped,
        "item1_failures": result.item1_failures,
        "item2_failures": result.item2_failures,
        "min_expansion": result.min_expansion,
        "max_cone_ratio": result.max_cone_ratio,
        "holds": result.holds,
        "counterexamples": result.counterexamples,
    }


def serialize_disk(result: DiskIntersection) -> Dict[str, Any]:
    return {
        "hit": result.hit,
        "distance": result.distance,
        "closest_point": result.closest_point,
        "segment": result.segment,
    }


def serialize_disk_report(result: LemmaDiskReport) -> Dict[str, Any]:
    params = result.parameters
    return {
        "delta": params.delta,
        "alpha": params.alpha,
        "beta": params.beta,
        "c": params.c,
        "c0": params.c0,
        "trials": result.trials,
        "hits": result.hits,
        "all_hit": result.all_hit,
        "max_distance": float(result.distances.max()) if result.distances.size else None,
        "misses": result.misses,
    }


def serialize_entry_time(report: EntryTimeReport) -> Dict[str, Any]:
    return {
        "alpha": report.alpha,
        "beta": report.beta,
        "t_step": report.t_step,
        "L_max": report.L_max,
        "stabilized_from": report.stabilized_from,
        "L_star": report.L_star,
        "common_exit": report.common_exit,
        "predicted_L": report.predicted_L,
        "matches_prediction": report.matches_prediction,
        "first_entries": [record.first_entry for record in report.records],
        "first_exits": [record.first_exit for record in report.records],
    }


def serialize_shrink_probe(result: ShrinkProbeResult) -> Dict[str, Any]:
    return {
        "initial_diameter": result.initial_diameter,
        "final_diameter": float(result.diameters[-1]) if result.diameters.size else None,
        "shrinks": result.shrinks,
        "contraction_verified": result.contraction_verified,
        "failing_radius": result.failing_radius,
        "notes": list(result.notes),
    }


def leg_norm_rows(cert: SinkCertificate) -> list[list[float]]:
    """Rows (i, t_i, log rescaled leg norm) of the phase-0 schedule."""

    times = cert.schedule.times
    return [[i, float(times[i]), float(value)] for i, value in enumerate(cert.rescaled_log_norms)]


def entry_time_rows(report: EntryTimeReport) -> list[list[float]]:
    """Rows (n, start, end), one per entry interval of every sequence point."""

    return [
        [record.index, start, end]
        for record in report.records
        for start, end in record.intervals
    ]


__all__ = [
    "ScenarioContext",
    "build_context",
    "resolve_sigma",
    "prepare_orbit",
    "build_sequence",
    "serialize_classification",
    "serialize_orbit",
    "serialize_certificate",
    "serialize_contracted_point",
    "serialize_contraction_check",
    "serialize_shift",
    "serialize_splitting",
    "serialize_curve",
    "serialize_cone_claim",
    "serialize_disk",
    "serialize_disk_report",
    "serialize_entry_time",
    "serialize_shrink_probe",
    "leg_norm_rows",
    "entry_time_rows",
]
