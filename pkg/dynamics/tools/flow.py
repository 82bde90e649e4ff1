"""Integration of the flow, its tangent flow and the induced direction/frame flows."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np
from scipy import linalg
from scipy.integrate import solve_ivp

from src.config import settings
from src.utils.error_handler import DegenerateVector, InvalidFrame, StepFailure

from .field import VectorFieldModel

logger = logging.getLogger(__name__)

Tolerance = tuple[float, float]

_DEGENERATE_NORM = 1e-300


def _resolve_tol(tol: Optional[Tolerance]) -> Tolerance:
    return settings.tolerance if tol is None else (float(tol[0]), float(tol[1]))


@dataclass(frozen=True, eq=False)
class TrajectorySegment:
    """Time-stamped orbit samples with dense interpolation.

    ``times`` is always increasing, also for backward integrations.
    """

    times: np.ndarray
    points: np.ndarray
    tol_used: Tolerance
    error_estimate: float = float("nan")
    _dense: Any = field(default=None, repr=False)

    def interp(self, t: float) -> np.ndarray:
        """Evaluate the orbit at time ``t`` inside the covered interval."""

        if t < self.times[0] - 1e-12 or t > self.times[-1] + 1e-12:
            raise ValueError(f"t={t} outside [{self.times[0]}, {self.times[-1]}]")
        idx = int(np.searchsorted(self.times, t))
        if idx < len(self.times) and self.times[idx] == t:
            return self.points[idx].copy()
        if self._dense is None:
            return self.points[0].copy()
        return np.asarray(self._dense(t), dtype=float)

    @property
    def start(self) -> np.ndarray:
        return self.points[0]

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]


def _solve(
    model: VectorFieldModel,
    x0: np.ndarray,
    t: float,
    tol: Tolerance,
    dense: bool,
):
    atol, rtol = tol
    solution = solve_ivp(
        lambda _s, y: model.evaluate(y),
        (0.0, t),
        x0,
        method=settings.integrator_method,
        rtol=rtol,
        atol=atol,
        dense_output=dense,
    )
    if solution.status == -1 or not np.all(np.isfinite(solution.y)):
        raise StepFailure(
            f"integration of {model.name} from {x0} over t={t} failed: {solution.message}"
        )
    return solution


def integrate(
    model: VectorFieldModel,
    x0: Sequence[float],
    t: float,
    tol: Optional[Tolerance] = None,
    error_estimate: bool = False,
) -> TrajectorySegment:
    """Integrate x' = X(x) from ``x0`` over [0, t] (or [t, 0] for t < 0)."""

    tol = _resolve_tol(tol)
    start = np.asarray(x0, dtype=float)
    if t == 0:
        return TrajectorySegment(
            times=np.array([0.0]), points=start[None, :].copy(), tol_used=tol, error_estimate=0.0
        )

    solution = _solve(model, start, t, tol, dense=True)
    times = solution.t
    points = solution.y.T
    if t < 0:
        times = times[::-1]
        points = points[::-1]

    estimate = float("nan")
    if error_estimate:
        coarse = _solve(model, start, t, (10 * tol[0], 10 * tol[1]), dense=False)
        estimate = max(float(np.linalg.norm(coarse.y[:, -1] - solution.y[:, -1])), tol[0])

    return TrajectorySegment(
        times=np.ascontiguousarray(times),
        points=np.ascontiguousarray(points),
        tol_used=tol,
        error_estimate=estimate,
        _dense=solution.sol,
    )


def integrate_until_escape(
    model: VectorFieldModel,
    x0: Sequence[float],
    t: float,
    center: Sequence[float],
    radius: float,
    tol: Optional[Tolerance] = None,
) -> TrajectorySegment:
    """Forward integration that stops once the orbit leaves the ball B(center, radius)."""

    tol = _resolve_tol(tol)
    start = np.asarray(x0, dtype=float)
    middle = np.asarray(center, dtype=float)
    if t <= 0:
        return integrate(model, start, 0.0, tol)

    def escaped(_s: float, y: np.ndarray) -> float:
        return float(np.linalg.norm(y - middle) - radius)

    escaped.terminal = True  # type: ignore[attr-defined]
    escaped.direction = 1  # type: ignore[attr-defined]

    atol, rtol = tol
    solution = solve_ivp(
        lambda _s, y: model.evaluate(y),
        (0.0, t),
        start,
        method=settings.integrator_method,
        rtol=rtol,
        atol=atol,
        dense_output=True,
        events=escaped,
    )
    if solution.status == -1 or not np.all(np.isfinite(solution.y)):
        raise StepFailure(f"integration of {model.name} from {start} failed: {solution.message}")
    if solution.status == 1:
        logger.debug(f"orbit of {start} left the ball of radius {radius} at t={solution.t[-1]:.6g}")
    return TrajectorySegment(
        times=np.ascontiguousarray(solution.t),
        points=np.ascontiguousarray(solution.y.T),
        tol_used=tol,
        _dense=solution.sol,
    )


def flow_point(
    model: VectorFieldModel,
    x0: Sequence[float],
    t: float,
    tol: Optional[Tolerance] = None,
) -> np.ndarray:
    """Endpoint phi_t(x0) without keeping the dense output."""

    start = np.asarray(x0, dtype=float)
    if t == 0:
        return start.copy()
    solution = _solve(model, start, t, _resolve_tol(tol), dense=False)
    return solution.y[:, -1].copy()


def flow_with_tangent(
    model: VectorFieldModel,
    x0: Sequence[float],
    t: float,
    tol: Optional[Tolerance] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Return (phi_t(x0), Phi_t(x0)) from one joint integration.

    At a singularity the base point stays put and Phi_t = expm(t DX).
    """

    tol = _resolve_tol(tol)
    start = np.asarray(x0, dtype=float)
    d = model.dim
    if t == 0:
        return start.copy(), np.eye(d)
    if model.speed(start) <= settings.singular_tol:
        return start.copy(), linalg.expm(t * model.jacobian(start))

    def rhs(_s: float, state: np.ndarray) -> np.ndarray:
        x = state[:d]
        y = state[d:].reshape(d, d)
        return np.concatenate((model.evaluate(x), (model.jacobian(x) @ y).ravel()))

    atol, rtol = tol
    solution = solve_ivp(
        rhs,
        (0.0, t),
        np.concatenate((start, np.eye(d).ravel())),
        method=settings.integrator_method,
        rtol=rtol,
        atol=atol,
    )
    if solution.status == -1 or not np.all(np.isfinite(solution.y)):
        raise StepFailure(
            f"variational integration of {model.name} over t={t} failed: {solution.message}"
        )
    final = solution.y[:, -1]
    return final[:d].copy(), final[d:].reshape(d, d).copy()


def tangent_flow(
    model: VectorFieldModel,
    x0: Sequence[float],
    t: float,
    tol: Optional[Tolerance] = None,
) -> np.ndarray:
    """Matrix of Phi_t at ``x0``."""

    return flow_with_tangent(model, x0, t, tol)[1]


def _unit(vector: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vector))
    if norm < _DEGENERATE_NORM:
        raise DegenerateVector(f"vector norm {norm:.3e} is degenerate")
    return vector / norm


def sphere_flow(
    model: VectorFieldModel,
    x0: Sequence[float],
    u: Sequence[float],
    t: float,
    tol: Optional[Tolerance] = None,
) -> np.ndarray:
    """Direction Phi_t(u)/|Phi_t(u)| carried to phi_t(x0)."""

    direction = _unit(np.asarray(u, dtype=float))
    matrix = tangent_flow(model, x0, t, tol)
    return _unit(matrix @ direction)


@dataclass(frozen=True, eq=False)
class FramePair:
    """Orthogonal 2-frame (u, v) at a base point."""

    base: np.ndarray
    u: np.ndarray
    v: np.ndarray
    normalized: bool = False

    def __post_init__(self) -> None:
        nu = float(np.linalg.norm(self.u))
        nv = float(np.linalg.norm(self.v))
        if nu < _DEGENERATE_NORM:
            raise DegenerateVector("frame vector u must be nonzero")
        if abs(float(np.dot(self.u, self.v))) > 1e-10 * nu * nv:
            raise InvalidFrame(f"frame vectors are not orthogonal: <u,v>={np.dot(self.u, self.v):.3e}")
        if self.normalized and abs(nu - 1.0) > 1e-12:
            raise InvalidFrame(f"normalized frame requires |u| = 1, got {nu}")


def _project_out(vector: np.ndarray, direction: np.ndarray) -> np.ndarray:
    # two Gram-Schmidt passes keep the residual at rounding level relative to the output
    out = vector - (np.dot(direction, vector) / np.dot(direction, direction)) * direction
    return out - (np.dot(direction, out) / np.dot(direction, direction)) * direction


def frame_flow(
    model: VectorFieldModel,
    pair: FramePair,
    t: float,
    normalized: bool = False,
    tol: Optional[Tolerance] = None,
) -> FramePair:
    """Carry a frame by the tangent flow and re-orthogonalize the second vector."""

    base, matrix = flow_with_tangent(model, pair.base, t, tol)
    image_u = matrix @ pair.u
    if np.linalg.norm(image_u) < _DEGENERATE_NORM:
        raise DegenerateVector("Phi_t(u) vanished")
    image_v = _project_out(matrix @ pair.v, image_u)
    first = _unit(image_u) if normalized else image_u
    return FramePair(base=base, u=first, v=image_v, normalized=normalized)


def second_component_operator(
    matrix: np.ndarray, u: np.ndarray
) -> tuple[np.ndarray, np.ndarray, float]:
    """Return (N, Q, |Phi u|): N = (I - w w^T) Phi Q on an orthonormal basis Q of u^perp."""

    direction = _unit(np.asarray(u, dtype=float))
    image = matrix @ direction
    image_norm = float(np.linalg.norm(image))
    if image_norm < _DEGENERATE_NORM:
        raise DegenerateVector("Phi_t(u) vanished")
    w = image / image_norm
    complement = linalg.null_space(direction[None, :])
    projector = np.eye(len(w)) - np.outer(w, w)
    return projector @ matrix @ complement, complement, image_norm


def default_ratio_grid(model: VectorFieldModel, sigma: Sequence[float], count: int = 20) -> np.ndarray:
    """Time grid short enough that the decay stays above rounding noise."""

    rates = np.abs(linalg.eigvals(model.jacobian(np.asarray(sigma, dtype=float))).real)
    top = float(rates.max()) if rates.size else 0.0
    t_max = min(4.0, 10.0 / top) if top > 0 else 4.0
    return np.linspace(0.1 * t_max, t_max, count)


def domination_ratio(
    model: VectorFieldModel,
    sigma: Sequence[float],
    u: Sequence[float],
    t_grid: Optional[Sequence[float]] = None,
    tol: Optional[Tolerance] = None,
) -> np.ndarray:
    """Norm of the frame flow's second component over |Phi_t(u)| for each t."""

    grid = default_ratio_grid(model, sigma) if t_grid is None else np.asarray(t_grid, dtype=float)
    ratios = np.empty(len(grid))
    for i, t in enumerate(grid):
        matrix = tangent_flow(model, sigma, float(t), tol)
        operator, _, image_norm = second_component_operator(matrix, np.asarray(u, dtype=float))
        top = linalg.svdvals(operator)
        ratios[i] = (float(top[0]) if top.size else 0.0) / image_norm
    return ratios


def fit_exponential_decay(
    t_grid: Sequence[float], values: Sequence[float]
) -> tuple[float, float]:
    """Least-squares fit of values ~ C exp(-lambda t) on log scale."""

    t = np.asarray(t_grid, dtype=float)
    v = np.asarray(values, dtype=float)
    mask = np.isfinite(v) & (v > 0)
    if mask.sum() < 2:
        logger.warning("Exponential fit needs at least two positive samples")
        return float("nan"), float("nan")
    slope, intercept = np.polyfit(t[mask], np.log(v[mask]), 1)
    return float(np.exp(intercept)), float(-slope)


__all__ = [
    "Tolerance",
    "TrajectorySegment",
    "FramePair",
    "integrate",
    "integrate_until_escape",
    "flow_point",
    "flow_with_tangent",
    "tangent_flow",
    "sphere_flow",
    "frame_flow",
    "second_component_operator",
    "default_ratio_grid",
    "domination_ratio",
    "fit_exponential_decay",
]
