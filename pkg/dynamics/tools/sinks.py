"""Periodic-orbit refinement, uniform-sink certificates and contracted-point extraction."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from src.config import settings
from src.utils.error_handler import (
    BadParameters,
    InconsistentCertificate,
    NoConvergence,
    NoneFound,
    NoPlissPoint,
    SingularJacobian,
    SingularPoint,
)

from .field import VectorFieldModel
from .flow import Tolerance, flow_with_tangent, integrate
from .pliss import WeightSequence, find_tail_offset, pliss_bound, pliss_point, tail_violation
from .poincare import PartitionSchedule, chain_product

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PeriodicOrbit:
    """A refined closed orbit: anchor point, period and closing residual."""

    anchor: np.ndarray
    period: float
    residual: float
    iterations: int = 0


def refine_orbit(
    model: VectorFieldModel,
    guess: Sequence[float],
    period_guess: float,
    max_iter: Optional[int] = None,
    residual_tol: Optional[float] = None,
    tol: Optional[Tolerance] = None,
) -> PeriodicOrbit:
    """Newton iteration on (anchor, period) with the anchor pinned to the section through ``guess``.

    Each step solves the bordered system
        [M - I   X(phi_T z)] [dz]     [phi_T z - z   ]
        [n^T     0         ] [dT] = - [<z - z0, n>   ]
    where n = X(z0)/|X(z0)|.
    """

    max_iter = settings.orbit_max_iter if max_iter is None else max_iter
    residual_tol = settings.orbit_residual if residual_tol is None else residual_tol
    origin = np.asarray(guess, dtype=float)
    speed = model.speed(origin)
    if speed <= settings.singular_tol:
        raise SingularPoint("orbit guess is a singularity")
    normal = model.evaluate(origin) / speed
    d = model.dim

    z = origin.copy()
    period = float(period_guess)
    residual = math.inf
    for iteration in range(1, max_iter + 1):
        endpoint, monodromy = flow_with_tangent(model, z, period, tol)
        mismatch = endpoint - z
        residual = float(np.linalg.norm(mismatch))

        bordered = np.zeros((d + 1, d + 1))
        bordered[:d, :d] = monodromy - np.eye(d)
        bordered[:d, d] = model.evaluate(endpoint)
        bordered[d, :d] = normal
        singular_values = linalg.svdvals(bordered)
        if singular_values[-1] < 1e-8 * singular_values[0]:
            raise SingularJacobian(
                f"return-map Jacobian is singular (condition {singular_values[0] / max(singular_values[-1], 1e-300):.3e})"
            )

        rhs = -np.concatenate((mismatch, [np.dot(z - origin, normal)]))
        step = linalg.solve(bordered, rhs)
        logger.debug(f"refine_orbit[{iteration}]: residual={residual:.3e}, |step|={np.linalg.norm(step):.3e}")

        if residual <= residual_tol and np.linalg.norm(step) <= 1e-9 * (1 + np.linalg.norm(z)):
            break
        z = z + step[:d]
        period = period + float(step[d])
        if period <= 0:
            raise NoConvergence("period estimate became nonpositive")
    else:
        endpoint, _ = flow_with_tangent(model, z, period, tol)
        residual = float(np.linalg.norm(endpoint - z))
        iteration = max_iter

    if residual > residual_tol:
        raise NoConvergence(
            f"orbit residual {residual:.3e} above {residual_tol:.1e} after {iteration} iterations"
        )
    logger.info(f"refine_orbit: period={period:.12g}, residual={residual:.3e}")
    return PeriodicOrbit(anchor=z, period=period, residual=residual, iterations=iteration)


@dataclass(frozen=True, eq=False)
class SinkCertificate:
    """Outcome of the uniform-sink test on one periodic orbit.

    ``log_product`` is the worst phase; the leg data and points are those of phase 0.
    """

    orbit: PeriodicOrbit
    alpha: float
    T: float
    m: int
    schedule: PartitionSchedule
    leg_norms: np.ndarray
    log_product: float
    certified: bool
    phase_log_products: np.ndarray = field(default_factory=lambda: np.zeros(0))
    margin: float = float("nan")
    exponent: float = float("nan")
    rescaled_log_norms: np.ndarray = field(default_factory=lambda: np.zeros(0))
    schedule_points: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))


def _phase_points(
    model: VectorFieldModel, orbit: PeriodicOrbit, phases: int, tol: Optional[Tolerance]
) -> np.ndarray:
    if phases == 1:
        return orbit.anchor[None, :]
    segment = integrate(model, orbit.anchor, orbit.period, tol)
    offsets = orbit.period * np.arange(phases) / phases
    return np.array([segment.interp(float(s)) for s in offsets])


def certify_sink(
    model: VectorFieldModel,
    orbit: PeriodicOrbit,
    alpha: float,
    T: float,
    m_max: Optional[int] = None,
    phases: Optional[int] = None,
    tol: Optional[Tolerance] = None,
) -> SinkCertificate:
    """Look for the smallest m whose uniform schedule contracts at rate alpha from every phase."""

    if alpha <= 0 or T <= 0:
        raise BadParameters("alpha and T must be positive")
    m_max = settings.sink_m_max if m_max is None else m_max
    phases = settings.sink_phases if phases is None else phases
    starts = _phase_points(model, orbit, phases, tol)

    best: Optional[SinkCertificate] = None
    for m in range(1, m_max + 1):
        span = m * orbit.period
        schedule = PartitionSchedule.uniform(span, T)
        chains = [chain_product(model, start, schedule, rescaled=False, tol=tol) for start in starts]
        products = np.array([chain.log_product for chain in chains])
        worst = float(products.max())
        threshold = -alpha * span
        margin = threshold - worst
        certified = margin >= 0

        reference = chains[0]
        speeds = np.array([model.speed(p) for p in reference.points])
        rescaled = reference.log_norms + np.log(speeds[:-1]) - np.log(speeds[1:])
        candidate = SinkCertificate(
            orbit=orbit,
            alpha=alpha,
            T=T,
            m=m,
            schedule=schedule,
            leg_norms=reference.leg_norms,
            log_product=worst,
            certified=certified,
            phase_log_products=products,
            margin=margin,
            exponent=-worst / span,
            rescaled_log_norms=rescaled,
            schedule_points=reference.points,
        )
        logger.debug(f"certify_sink: m={m}, worst log product={worst:.6g}, threshold={threshold:.6g}")
        if certified:
            logger.info(f"certify_sink: certified with m={m}, exponent={candidate.exponent:.6g}")
            return candidate
        if best is None or margin > best.margin:
            best = candidate

    assert best is not None
    logger.info(f"certify_sink: not certified up to m={m_max}; best margin {best.margin:.6g} at m={best.m}")
    return best


@dataclass(frozen=True, eq=False)
class ContractedPoint:
    """A point of the orbit with its shifted schedule and rescaled leg data."""

    point: np.ndarray
    schedule: PartitionSchedule
    index: int
    time: float
    log_norms: np.ndarray
    candidates: tuple[int, ...] = ()


def extract_contracted_point(
    model: VectorFieldModel,
    cert: SinkCertificate,
    eta: float,
) -> ContractedPoint:
    """First schedule point from which the rescaled chain is (1, eta, T)-contracted."""

    if not cert.certified:
        raise BadParameters("certificate is not certified")
    if not 0 < eta < cert.alpha:
        raise BadParameters(f"need 0 < eta < alpha = {cert.alpha}, got eta = {eta}")

    sequence = WeightSequence(
        values=cert.rescaled_log_norms,
        leg_durations=cert.schedule.durations,
        gap_bound=cert.T,
    )
    try:
        indices = pliss_point(sequence, eta)
    except NoPlissPoint as exc:
        raise InconsistentCertificate(f"certified orbit yields no contracted point: {exc}") from exc

    k = indices[0]
    return ContractedPoint(
        point=np.asarray(cert.schedule_points[k], dtype=float).copy(),
        schedule=cert.schedule.shifted(k),
        index=k,
        time=float(cert.schedule.times[k]),
        log_norms=np.roll(cert.rescaled_log_norms, -k),
        candidates=tuple(indices),
    )


@dataclass
class ContractionCheck:
    """Re-integrated rescaled leg data and the worst tail violation."""

    log_norms: np.ndarray
    durations: np.ndarray
    worst_violation: float
    contracted: bool


def verify_contracted(
    model: VectorFieldModel,
    point: Sequence[float],
    schedule: PartitionSchedule,
    C: float,
    eta: float,
    periods: int = 1,
    log_tol: float = 1e-6,
    tol: Optional[Tolerance] = None,
) -> ContractionCheck:
    """Check every prefix of the rescaled chain against C exp(-eta * elapsed)."""

    repeated = schedule.repeated(periods)
    chain = chain_product(model, point, repeated, rescaled=True, tol=tol)
    durations = repeated.durations
    violation = tail_violation(chain.log_norms, C, eta, durations)
    return ContractionCheck(
        log_norms=chain.log_norms,
        durations=durations,
        worst_violation=violation,
        contracted=violation <= log_tol,
    )


@dataclass(frozen=True, eq=False)
class ShiftResult:
    """Point moved along its orbit to where contraction holds with C = 1 and rate eta/2."""

    point: np.ndarray
    success: bool
    L: int
    time: float
    bound: int
    measured_C: float
    log_norms: np.ndarray


def shift_to_uniform_scale(
    model: VectorFieldModel,
    x: Sequence[float],
    C: float,
    eta: float,
    T: float,
    horizon: float,
    tol: Optional[Tolerance] = None,
) -> ShiftResult:
    """Apply the tail-offset selection to the leg rates of x's forward schedule."""

    if C <= 0 or eta <= 0 or T <= 0:
        raise BadParameters("C, eta and T must be positive")
    legs = int(math.floor(horizon / T + 1e-12))
    if legs == 0:
        raise NoneFound(f"horizon {horizon} is shorter than one leg T={T}")

    schedule = PartitionSchedule(times=T * np.arange(legs + 1), gap_bound=T)
    chain = chain_product(model, x, schedule, rescaled=True, tol=tol)
    rates = chain.log_norms / T
    selection = find_tail_offset(rates, -eta / 2)
    if selection is None:
        raise NoneFound("no tail offset within the horizon")

    bound = pliss_bound(max(math.log(C), 0.0) / T, -eta, -eta / 2)
    measured = math.exp(max(0.0, tail_violation(chain.log_norms, 1.0, eta, schedule.durations)))
    success = selection.L <= bound
    if not success:
        logger.warning(
            f"shift_to_uniform_scale: offset L={selection.L} exceeds bound N={bound}; "
            f"x is not ({C:.4g}, {eta:.4g}, {T:.4g})-contracted"
        )
    return ShiftResult(
        point=chain.points[selection.L].copy(),
        success=success,
        L=selection.L,
        time=selection.L * T,
        bound=bound,
        measured_C=measured,
        log_norms=chain.log_norms,
    )


__all__ = [
    "PeriodicOrbit",
    "SinkCertificate",
    "ContractedPoint",
    "ContractionCheck",
    "ShiftResult",
    "refine_orbit",
    "certify_sink",
    "extract_contracted_point",
    "verify_contracted",
    "shift_to_uniform_scale",
]
