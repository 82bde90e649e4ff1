"""Dominated splitting at a singularity, cone fields, the F-aligned region and the curve W^F.

E and F are extended off sigma as constant subspaces of the chart. Vectors are
split along the pair E (+) F obliquely by default; ``orthogonal=True`` projects
onto F orthogonally instead.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Sequence

import numpy as np
from scipy import linalg
from scipy.optimize import minimize_scalar

from src.config import settings
from src.utils.error_handler import (
    BadParameters,
    EigenFailure,
    NoDominatedF,
    ResonanceObstruction,
    Unsupported,
    ZeroVector,
)

from .field import VectorFieldModel
from .flow import (
    Tolerance,
    default_ratio_grid,
    domination_ratio,
    fit_exponential_decay,
    flow_point,
    integrate_until_escape,
    sphere_flow,
    tangent_flow,
)

logger = logging.getLogger(__name__)


def _positive_leading(vector: np.ndarray) -> np.ndarray:
    leading = np.flatnonzero(np.abs(vector) > 1e-14)
    if leading.size and vector[leading[0]] < 0:
        return -vector
    return vector


@dataclass(frozen=True, eq=False)
class SplittingReport:
    """Splitting E (+) F of the tangent space at sigma with dim F = 1.

    ``E_basis`` is orthonormal with one vector per column; ``left_F`` is the
    left eigenvector of lambda_F scaled so that <left_F, F_vector> = 1.
    """

    sigma: np.ndarray
    matrix: np.ndarray
    eigenvalues: np.ndarray
    E_basis: np.ndarray
    F_vector: np.ndarray
    left_F: np.ndarray
    lambda_F: float
    spectral_gap: float
    fitted_C: float
    fitted_lambda: float
    dominated: bool
    t_grid: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ratios: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def E_eigenvalues(self) -> np.ndarray:
        order = np.argsort(-self.eigenvalues.real, kind="stable")
        return self.eigenvalues[order][1:]

    @property
    def E_contracting(self) -> bool:
        rest = self.E_eigenvalues
        return bool(rest.size == 0 or rest.real.max() < 0)


def split_at_singularity(
    model: VectorFieldModel,
    sigma: Sequence[float],
    t_grid: Optional[Sequence[float]] = None,
    tol: Optional[float] = None,
) -> SplittingReport:
    """Eigen-splitting at sigma cross-checked against the decay of the frame-flow ratio."""

    tol = settings.eigen_tol if tol is None else tol
    point = np.asarray(sigma, dtype=float)
    matrix = model.jacobian(point)
    try:
        eigenvalues, left, right = linalg.eig(matrix, left=True, right=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise EigenFailure(f"eigen-solver failed at sigma: {exc}") from exc
    if not np.all(np.isfinite(eigenvalues)):
        raise EigenFailure("eigen-solver returned non-finite eigenvalues")

    order = np.argsort(-eigenvalues.real, kind="stable")
    top = eigenvalues[order[0]]
    if abs(top.imag) > tol:
        raise NoDominatedF(f"largest real part is attained by a complex pair {top:.6g}")
    if eigenvalues.size > 1 and eigenvalues[order[1]].real >= top.real - tol:
        raise NoDominatedF(
            f"largest real part {top.real:.6g} is not simple (next {eigenvalues[order[1]].real:.6g})"
        )

    f_vec = np.real(right[:, order[0]])
    f_vec = _positive_leading(f_vec / np.linalg.norm(f_vec))
    left_vec = np.real(left[:, order[0]])
    e_basis = linalg.null_space(left_vec[None, :])
    left_vec = left_vec / np.dot(left_vec, f_vec)

    lambda_f = float(top.real)
    rest = eigenvalues[order[1:]]
    gap = lambda_f - float(rest.real.max()) if rest.size else math.inf

    grid = default_ratio_grid(model, point) if t_grid is None else np.asarray(t_grid, dtype=float)
    ratios = domination_ratio(model, point, f_vec, grid)
    fitted_c, fitted_lambda = fit_exponential_decay(grid, ratios)
    dominated = bool(
        gap > tol
        and np.isfinite(fitted_lambda)
        and abs(fitted_lambda - gap) <= 0.1 * gap
    )
    if gap > tol and not dominated:
        logger.warning(
            f"split_at_singularity: fitted rate {fitted_lambda:.6g} disagrees with gap {gap:.6g}"
        )
    logger.info(
        f"split_at_singularity: lambda_F={lambda_f:.6g}, gap={gap:.6g}, "
        f"fitted lambda={fitted_lambda:.6g}, dominated={dominated}"
    )
    return SplittingReport(
        sigma=point,
        matrix=matrix,
        eigenvalues=eigenvalues[order],
        E_basis=e_basis,
        F_vector=f_vec,
        left_F=left_vec,
        lambda_F=lambda_f,
        spectral_gap=gap,
        fitted_C=fitted_c,
        fitted_lambda=fitted_lambda,
        dominated=dominated,
        t_grid=grid,
        ratios=ratios,
    )


def splitting_residuals(report: SplittingReport) -> tuple[float, float]:
    """Relative invariance defects of E and F under DX(sigma)."""

    a = report.matrix
    scale = max(float(np.linalg.norm(a, 2)), 1.0)
    f_defect = float(np.linalg.norm(a @ report.F_vector - report.lambda_F * report.F_vector))
    # the E-part of a vector is annihilated by left_F
    e_images = a @ report.E_basis
    e_defect = float(np.linalg.norm(report.left_F @ e_images)) if e_images.size else 0.0
    return e_defect / scale, f_defect / scale


@dataclass(frozen=True, eq=False)
class SplittingFrame:
    """Decomposition v = v_E + v_F for the constant extension of E (+) F."""

    E_basis: np.ndarray
    F_vector: np.ndarray
    left_F: np.ndarray
    orthogonal: bool = False

    @classmethod
    def from_report(cls, report: SplittingReport, orthogonal: bool = False) -> "SplittingFrame":
        return cls(report.E_basis, report.F_vector, report.left_F, orthogonal)

    @classmethod
    def from_subspaces(
        cls, E_basis: np.ndarray, F_vector: Sequence[float], orthogonal: bool = False
    ) -> "SplittingFrame":
        e_basis = np.asarray(E_basis, dtype=float).reshape(len(F_vector), -1)
        f_vec = np.asarray(F_vector, dtype=float)
        normal = linalg.null_space(e_basis.T)[:, 0]
        coupling = float(np.dot(normal, f_vec))
        if abs(coupling) < 1e-12:
            raise BadParameters("F lies inside E: the pair does not split the space")
        return cls(e_basis, f_vec, normal / coupling, orthogonal)

    def decompose(self, v: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
        vector = np.asarray(v, dtype=float)
        if self.orthogonal:
            unit = self.F_vector / np.linalg.norm(self.F_vector)
            v_f = np.dot(vector, unit) * unit
        else:
            v_f = np.dot(self.left_F, vector) * self.F_vector
        return vector - v_f, v_f

    def component_norms(self, v: Sequence[float]) -> tuple[float, float]:
        v_e, v_f = self.decompose(v)
        return float(np.linalg.norm(v_e)), float(np.linalg.norm(v_f))


class ConeKind(str, Enum):
    """Which direction a cone is centered on."""

    E = "E"
    F = "F"


@dataclass(frozen=True)
class ConeSpec:
    alpha: float
    which: ConeKind = ConeKind.F

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise BadParameters(f"cone aperture must be positive, got {self.alpha}")
        object.__setattr__(self, "which", ConeKind(self.which))


def _in_cone(spec: ConeSpec, frame: SplittingFrame, v: np.ndarray) -> bool:
    norm = float(np.linalg.norm(v))
    if norm < 1e-300:
        raise ZeroVector("cone membership is undefined for the zero vector")
    e_norm, f_norm = frame.component_norms(v)
    slack = 1e-12 * norm
    if spec.which == ConeKind.F:
        return e_norm <= spec.alpha * f_norm + slack
    return f_norm <= spec.alpha * e_norm + slack


def cone_contains(
    spec: ConeSpec,
    E_basis: np.ndarray,
    F_vector: Sequence[float],
    v: Sequence[float],
    orthogonal: bool = False,
) -> bool:
    """Non-strict cone test |v_E| <= alpha |v_F| (F-cone) or |v_F| <= alpha |v_E| (E-cone)."""

    frame = SplittingFrame.from_subspaces(E_basis, F_vector, orthogonal)
    return _in_cone(spec, frame, np.asarray(v, dtype=float))


def region_membership(
    model: VectorFieldModel,
    report: SplittingReport,
    alpha: float,
    beta: float,
    x: Sequence[float],
    orthogonal: bool = False,
) -> bool:
    """Whether |x - sigma| < beta and |X_E(x)| < alpha |X_F(x)| (both strict)."""

    point = np.asarray(x, dtype=float)
    if not np.linalg.norm(point - report.sigma) < beta:
        return False
    frame = SplittingFrame.from_report(report, orthogonal)
    e_norm, f_norm = frame.component_norms(model.evaluate(point))
    return bool(e_norm < alpha * f_norm)


@dataclass(frozen=True, eq=False)
class ManifoldCurve:
    """Samples of one branch of W^F starting at sigma, parametrized by arclength."""

    sigma: np.ndarray
    side: int
    params: np.ndarray
    points: np.ndarray
    tangent_at_sigma: np.ndarray
    source: str
    coefficients: Optional[np.ndarray] = None
    rate: float = float("nan")

    @property
    def arclength(self) -> float:
        return float(self.params[-1])

    def evaluate(self, theta: float) -> np.ndarray:
        """Point of the Taylor parametrization at parameter ``theta``."""

        if self.coefficients is None:
            raise Unsupported("curve has no polynomial parametrization")
        powers = theta ** np.arange(self.coefficients.shape[0])
        return powers @ self.coefficients

    def distance_to(self, point: Sequence[float]) -> float:
        """Euclidean distance from ``point`` to the sampled polyline."""

        q = np.asarray(point, dtype=float)
        starts = self.points[:-1]
        deltas = np.diff(self.points, axis=0)
        lengths = np.einsum("ij,ij->i", deltas, deltas)
        safe = np.where(lengths > 0, lengths, 1.0)
        tau = np.clip(np.einsum("ij,ij->i", q - starts, deltas) / safe, 0.0, 1.0)
        tau = np.where(lengths > 0, tau, 0.0)
        nearest = starts + tau[:, None] * deltas
        return float(np.linalg.norm(nearest - q, axis=1).min())

    def local_invariance_error(
        self,
        model: VectorFieldModel,
        h: float = 1e-2,
        fraction: float = 0.8,
        count: int = 20,
        tol: Optional[Tolerance] = None,
    ) -> float:
        """Largest distance from the curve of phi_{+-h} applied to inner samples."""

        limit = fraction * self.arclength
        inner = np.flatnonzero((self.params > 0) & (self.params <= limit))
        if inner.size == 0:
            return 0.0
        chosen = inner[np.linspace(0, inner.size - 1, min(count, inner.size)).astype(int)]
        worst = 0.0
        for idx in chosen:
            for step in (h, -h):
                image = flow_point(model, self.points[idx], step, tol)
                worst = max(worst, self.distance_to(image))
        return worst


def _taylor_coefficients(
    model: VectorFieldModel,
    report: SplittingReport,
    order: int,
    scale: float,
) -> np.ndarray:
    """Coefficients of P(theta) with X(P(theta)) = lambda_F theta P'(theta).

    Order k solves (A - k lambda_F) p_k = -[X(P_{<k})]_k, the right side read off
    by an FFT of X on the unit circle of complex theta.
    """

    d = model.dim
    lam = report.lambda_F
    a = report.matrix
    coefficients = np.zeros((order + 1, d))
    coefficients[0] = report.sigma
    coefficients[1] = scale * report.F_vector
    nodes = 8 * (order + 1)
    circle = np.exp(2j * np.pi * np.arange(nodes) / nodes)
    powers = circle[:, None] ** np.arange(order + 1)[None, :]
    a_scale = max(float(np.linalg.norm(a, 2)), 1.0)

    for k in range(2, order + 1):
        partial = powers[:, :k] @ coefficients[:k].astype(complex)
        values = np.array([model.evaluate(p) for p in partial])
        kth = np.fft.fft(values, axis=0)[k] / nodes
        system = a - k * lam * np.eye(d)
        smallest = linalg.svdvals(system)[-1]
        if smallest < 1e-12 * a_scale:
            raise ResonanceObstruction(
                f"order {k}: {k} * lambda_F = {k * lam:.6g} is an eigenvalue of DX(sigma)"
            )
        coefficients[k] = linalg.solve(system, -kth.real)
    return coefficients


def approximate_WF(
    model: VectorFieldModel,
    report: SplittingReport,
    side: int = 1,
    arclength: float = 0.5,
    order: int = 12,
    samples: int = 400,
    tol: Optional[float] = None,
) -> ManifoldCurve:
    """One branch of W^F: the model's analytic center curve, or a Taylor parametrization of W^u."""

    tol = settings.eigen_tol if tol is None else tol
    if side not in (1, -1):
        raise BadParameters("side must be +1 or -1")
    if arclength <= 0 or order < 1 or samples < 2:
        raise BadParameters("arclength, order and samples must be positive")

    if model.center_curve is not None:
        s_values = side * np.linspace(0.0, arclength, samples)
        points = np.array([model.center_curve(float(s)) for s in s_values])
        coefficients = None
        source = "center_curve"
    elif report.lambda_F > tol:
        coefficients = _taylor_coefficients(model, report, order, arclength)
        thetas = side * np.linspace(0.0, 1.0, samples)
        powers = thetas[:, None] ** np.arange(order + 1)[None, :]
        points = powers @ coefficients
        source = "taylor"
        tail = float(np.linalg.norm(coefficients[-1]))
        if tail > 1e-8 * arclength:
            logger.warning(f"approximate_WF: last Taylor coefficient {tail:.3e} is not small")
    else:
        raise Unsupported(
            f"F is not expanding (lambda_F = {report.lambda_F:.3g}) and {model.name} has no center curve"
        )

    steps = np.linalg.norm(np.diff(points, axis=0), axis=1)
    params = np.concatenate(([0.0], np.cumsum(steps)))
    return ManifoldCurve(
        sigma=report.sigma,
        side=side,
        params=params,
        points=points,
        tangent_at_sigma=side * report.F_vector,
        source=source,
        coefficients=coefficients,
        rate=report.lambda_F,
    )


@dataclass
class ConjugacyCheck:
    """Backward-convergence check of a Taylor curve read through the conjugacy."""

    flow_time: float
    preimage_distance: float
    shadow_error: float
    tip_gap: float
    passed: bool


def conjugacy_check(
    model: VectorFieldModel,
    curve: ManifoldCurve,
    target: float = 1e-6,
    tol: Optional[Tolerance] = None,
) -> ConjugacyCheck:
    """Pull the tip back to within ``target`` of sigma along the curve, then flow it forward.

    phi_t(P(theta)) = P(exp(lambda t) theta), so the tip's pre-image at time -t
    is P(exp(-lambda t) * tip); its forward orbit must shadow the curve.
    """

    if curve.coefficients is None or not curve.rate > 0:
        raise Unsupported("conjugacy check needs an expanding Taylor curve")
    tip_theta = float(curve.side)
    linear_size = float(np.linalg.norm(curve.coefficients[1]))
    flow_time = math.log(linear_size / (0.1 * target)) / curve.rate
    pre_theta = tip_theta * math.exp(-curve.rate * flow_time)
    preimage = curve.evaluate(pre_theta)
    endpoint = flow_point(model, preimage, flow_time, tol)
    preimage_distance = float(np.linalg.norm(preimage - curve.sigma))
    # along-curve drift past the tip is not a shadowing error
    nearest = minimize_scalar(
        lambda theta: float(np.linalg.norm(curve.evaluate(curve.side * theta) - endpoint)),
        bounds=(0.0, 1.5),
        method="bounded",
        options={"xatol": 1e-12},
    )
    shadow = min(float(nearest.fun), curve.distance_to(endpoint))
    tip_gap = float(np.linalg.norm(endpoint - curve.evaluate(tip_theta)))
    passed = preimage_distance <= target and shadow <= target * max(1.0, curve.arclength)
    return ConjugacyCheck(
        flow_time=flow_time,
        preimage_distance=preimage_distance,
        shadow_error=shadow,
        tip_gap=tip_gap,
        passed=passed,
    )


@dataclass
class ConeClaimReport:
    """Sampled check of backward E-cone invariance and backward doubling near sigma."""

    alpha: float
    T_step: float
    eps: float
    radius: float
    sample_radius: float
    trials: int
    checked: int = 0
    skipped: int = 0
    item1_failures: int = 0
    item2_failures: int = 0
    min_expansion: float = math.inf
    max_cone_ratio: float = 0.0
    counterexamples: list[dict[str, Any]] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return self.checked > 0 and self.item1_failures == 0 and self.item2_failures == 0


def cone_claim_check(
    model: VectorFieldModel,
    report: SplittingReport,
    alpha: float,
    T_step: float,
    eps: float,
    trials: int,
    radius: float = 0.1,
    seed: int = 0,
    orthogonal: bool = False,
    max_counterexamples: int = 10,
    tol: Optional[Tolerance] = None,
) -> ConeClaimReport:
    """Sample pairs (x, y) near sigma with y - x in the E-cone and test both items.

    Item 1: Phi_{-T}(x) maps the E-cone into the E-cone.
    Item 2: |phi_{-T}(x) - phi_{-T}(y)| > 2 |x - y|.
    """

    if not report.E_contracting:
        raise BadParameters("the cone claim needs a contracting E")
    if alpha <= 0 or T_step <= 0 or eps <= 0 or trials < 1:
        raise BadParameters("alpha, T_step, eps and trials must be positive")

    frame = SplittingFrame.from_report(report, orthogonal)
    cone = ConeSpec(alpha, ConeKind.E)
    rng = np.random.default_rng(seed)
    d = model.dim
    fastest = float(np.abs(report.E_eigenvalues.real).max())
    sample_radius = 0.5 * radius * math.exp(-T_step * fastest)
    result = ConeClaimReport(
        alpha=alpha,
        T_step=T_step,
        eps=eps,
        radius=radius,
        sample_radius=sample_radius,
        trials=trials,
    )

    for _ in range(trials):
        direction = rng.standard_normal(d)
        x = report.sigma + sample_radius * rng.uniform() ** (1.0 / d) * direction / np.linalg.norm(direction)
        e_part = report.E_basis @ rng.standard_normal(report.E_basis.shape[1])
        f_part = rng.uniform(-alpha, alpha) * np.linalg.norm(e_part) * report.F_vector
        w = e_part + f_part
        if not _in_cone(cone, frame, w):
            result.skipped += 1
            continue
        w = w / np.linalg.norm(w)
        y = x + eps * w

        back_x = flow_point(model, x, -T_step, tol)
        back_y = flow_point(model, y, -T_step, tol)
        if max(np.linalg.norm(back_x - report.sigma), np.linalg.norm(back_y - report.sigma)) >= radius:
            result.skipped += 1
            continue
        result.checked += 1

        image = tangent_flow(model, x, -T_step, tol) @ w
        e_norm, f_norm = frame.component_norms(image)
        cone_ratio = f_norm / e_norm if e_norm > 0 else math.inf
        result.max_cone_ratio = max(result.max_cone_ratio, cone_ratio)
        expansion = float(np.linalg.norm(back_x - back_y)) / eps
        result.min_expansion = min(result.min_expansion, expansion)

        item1 = _in_cone(cone, frame, image)
        item2 = expansion > 2.0
        if not item1:
            result.item1_failures += 1
        if not item2:
            result.item2_failures += 1
        if (not item1 or not item2) and len(result.counterexamples) < max_counterexamples:
            result.counterexamples.append(
                {
                    "x": x.tolist(),
                    "y": y.tolist(),
                    "items": [label for label, ok in ((1, item1), (2, item2)) if not ok],
                    "cone_ratio": cone_ratio,
                    "expansion": expansion,
                }
            )

    if result.checked == 0:
        logger.warning("cone_claim_check: every sample was skipped")
    logger.info(
        f"cone_claim_check: checked={result.checked}, skipped={result.skipped}, "
        f"item1 failures={result.item1_failures}, item2 failures={result.item2_failures}"
    )
    return result


@dataclass
class DiskIntersection:
    hit: bool
    distance: float
    closest_point: np.ndarray
    segment: int


def disk_meets_WF(
    model: VectorFieldModel,
    report: SplittingReport,
    curve: ManifoldCurve,
    z: Sequence[float],
    delta: float,
) -> DiskIntersection:
    """Distance between the normal disk {z + v : v perp X(z), |v| <= delta |X(z)|} and the curve."""

    base = np.asarray(z, dtype=float)
    flow_dir = model.evaluate(base)
    speed = float(np.linalg.norm(flow_dir))
    if speed <= settings.singular_tol:
        raise BadParameters("disk center must be a regular point")
    unit = flow_dir / speed
    radius = delta * speed
    scale = max(float(np.linalg.norm(base - report.sigma)), radius, 1e-300)

    def split(q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        offsets = np.atleast_2d(q) - base
        heights = offsets @ unit
        in_plane = offsets - heights[:, None] * unit
        return heights, np.linalg.norm(in_plane, axis=1)

    def disk_distance(q: np.ndarray) -> float:
        height, spread = split(q)
        return float(math.hypot(height[0], max(spread[0] - radius, 0.0)))

    points = curve.points
    heights, spreads = split(points)

    # exact plane crossings of the polyline
    crossings = np.flatnonzero(heights[:-1] * heights[1:] <= 0)
    for i in crossings:
        h0, h1 = heights[i], heights[i + 1]
        tau = 0.0 if h0 == h1 else h0 / (h0 - h1)
        q = points[i] + tau * (points[i + 1] - points[i])
        if split(q)[1][0] <= radius:
            return DiskIntersection(hit=True, distance=0.0, closest_point=q, segment=int(i))

    vertex = np.hypot(heights, np.maximum(spreads - radius, 0.0))
    nearest = int(np.argmin(vertex))
    best_distance, best_point, best_segment = float(vertex[nearest]), points[nearest], max(nearest - 1, 0)
    for i in (nearest - 1, nearest):
        if i < 0 or i + 1 >= len(points):
            continue
        p0, p1 = points[i], points[i + 1]
        found = minimize_scalar(
            lambda tau: disk_distance(p0 + tau * (p1 - p0)),
            bounds=(0.0, 1.0),
            method="bounded",
            options={"xatol": 1e-12},
        )
        if found.fun < best_distance:
            best_distance = float(found.fun)
            best_point = p0 + found.x * (p1 - p0)
            best_segment = i
    return DiskIntersection(
        hit=best_distance <= 1e-7 * scale,
        distance=best_distance,
        closest_point=np.asarray(best_point),
        segment=best_segment,
    )


@dataclass
class LemmaConstants:
    c: float
    c0: float
    alpha: float
    beta: float
    ball_samples: int
    region_samples: int


def _sample_region(
    model: VectorFieldModel,
    report: SplittingReport,
    alpha: float,
    beta: float,
    count: int,
    rng: np.random.Generator,
    orthogonal: bool = False,
    max_draws: int = 200_000,
) -> np.ndarray:
    """Rejection sampling of the region around sigma inside a cone-shaped proposal."""

    e_rates = np.abs(report.E_eigenvalues.real)
    slowest_e = float(e_rates.min()) if e_rates.size and e_rates.min() > 0 else 1.0
    widen = 1.2 * max(abs(report.lambda_F), 1e-3) / slowest_e
    dim_e = report.E_basis.shape[1]
    accepted: list[np.ndarray] = []
    draws = 0
    while len(accepted) < count and draws < max_draws:
        draws += 1
        f = rng.uniform(-beta, beta)
        direction = rng.standard_normal(dim_e)
        direction /= np.linalg.norm(direction)
        e_size = alpha * abs(f) * widen * rng.uniform() ** (1.0 / dim_e)
        x = report.sigma + f * report.F_vector + report.E_basis @ (e_size * direction)
        if region_membership(model, report, alpha, beta, x, orthogonal):
            accepted.append(x)
    if len(accepted) < count:
        logger.warning(f"_sample_region: {len(accepted)} of {count} points after {draws} draws")
    return np.array(accepted).reshape(-1, model.dim)


def measure_lemma_constants(
    model: VectorFieldModel,
    report: SplittingReport,
    beta: float,
    alpha: float,
    samples: int = 2000,
    seed: int = 0,
    orthogonal: bool = False,
) -> LemmaConstants:
    """Empirical c with |x_E| <= c |X_E(x)| on the beta-ball, and c0(alpha) on the region.

    c0 is the smallest E-extent, per unit radius, of the normal disk at a region
    point: 1 / sqrt(1 + (|X_E| / |X_F|)^2), which stays above 1 / sqrt(1 + alpha^2).
    """

    rng = np.random.default_rng(seed)
    frame = SplittingFrame.from_report(report, orthogonal)
    d = model.dim
    c = 0.0
    counted = 0
    for _ in range(samples):
        direction = rng.standard_normal(d)
        x = report.sigma + beta * rng.uniform() ** (1.0 / d) * direction / np.linalg.norm(direction)
        x_e, _ = frame.decompose(x - report.sigma)
        flow_e, _ = frame.decompose(model.evaluate(x))
        size_e = float(np.linalg.norm(x_e))
        size_flow = float(np.linalg.norm(flow_e))
        if size_e <= 1e-12 * beta or size_flow <= 1e-300:
            continue
        counted += 1
        c = max(c, size_e / size_flow)

    region = _sample_region(model, report, alpha, beta, samples, rng, orthogonal)
    if region.size:
        ratios = []
        for x in region:
            e_norm, f_norm = frame.component_norms(model.evaluate(x))
            ratios.append(e_norm / f_norm)
        c0 = float(np.min(1.0 / np.sqrt(1.0 + np.square(ratios))))
    else:
        c0 = 1.0 / math.sqrt(1.0 + alpha * alpha)
    return LemmaConstants(
        c=c, c0=c0, alpha=alpha, beta=beta, ball_samples=counted, region_samples=len(region)
    )


@dataclass
class LemmaDiskParameters:
    delta: float
    alpha: float
    beta: float
    c: float
    c0: float


def lemma_disk_parameters(
    model: VectorFieldModel,
    report: SplittingReport,
    delta: float,
    beta: float = 0.1,
    iterations: int = 4,
    samples: int = 2000,
    seed: int = 0,
    orthogonal: bool = False,
) -> LemmaDiskParameters:
    """Pick alpha with alpha * c / c0 <= delta (half of it, as margin) at a fixed beta."""

    if delta <= 0 or beta <= 0:
        raise BadParameters("delta and beta must be positive")
    alpha = delta
    constants = measure_lemma_constants(model, report, beta, alpha, samples, seed, orthogonal)
    for _ in range(iterations):
        if constants.c <= 0:
            raise BadParameters("could not measure c: no usable samples in the beta-ball")
        alpha = 0.5 * delta * constants.c0 / constants.c
        constants = measure_lemma_constants(model, report, beta, alpha, samples, seed, orthogonal)
    return LemmaDiskParameters(delta=delta, alpha=alpha, beta=beta, c=constants.c, c0=constants.c0)


@dataclass
class LemmaDiskReport:
    parameters: LemmaDiskParameters
    trials: int
    hits: int
    distances: np.ndarray
    misses: list[list[float]] = field(default_factory=list)

    @property
    def all_hit(self) -> bool:
        return self.trials > 0 and self.hits == self.trials


def lemma_disk_experiment(
    model: VectorFieldModel,
    report: SplittingReport,
    delta: float,
    parameters: Optional[LemmaDiskParameters] = None,
    trials: int = 100,
    seed: int = 0,
    order: int = 12,
    orthogonal: bool = False,
) -> LemmaDiskReport:
    """Sample z in the region and test whether each normal disk of size delta meets W^F."""

    params = parameters or lemma_disk_parameters(model, report, delta, seed=seed, orthogonal=orthogonal)
    reach = 1.5 * params.beta
    curves = {
        side: approximate_WF(model, report, side=side, arclength=reach, order=order)
        for side in (1, -1)
    }
    rng = np.random.default_rng(seed + 1)
    points = _sample_region(model, report, params.alpha, params.beta, trials, rng, orthogonal)
    hits = 0
    distances = []
    misses = []
    for z in points:
        side = 1 if np.dot(report.left_F, z - report.sigma) >= 0 else -1
        outcome = disk_meets_WF(model, report, curves[side], z, delta)
        distances.append(outcome.distance)
        if outcome.hit:
            hits += 1
        else:
            misses.append(z.tolist())
    logger.info(f"lemma_disk_experiment: {hits}/{len(points)} disks meet W^F")
    return LemmaDiskReport(
        parameters=params,
        trials=len(points),
        hits=hits,
        distances=np.asarray(distances),
        misses=misses,
    )


def predict_entry_time(
    model: VectorFieldModel,
    report: SplittingReport,
    v: Sequence[float],
    alpha: float,
    t_grid: Sequence[float],
    orthogonal: bool = False,
) -> Optional[float]:
    """First grid time after which Phi^1_t(v) at sigma stays in the open F-cone."""

    frame = SplittingFrame.from_report(report, orthogonal)
    inside = []
    for t in t_grid:
        direction = sphere_flow(model, report.sigma, v, float(t))
        e_norm, f_norm = frame.component_norms(direction)
        inside.append(e_norm < alpha * f_norm)
    flags = np.asarray(inside)
    if flags.size == 0 or not flags[-1]:
        return None
    outside = np.flatnonzero(~flags)
    start = 0 if outside.size == 0 else int(outside[-1]) + 1
    return float(np.asarray(t_grid)[start])


@dataclass
class EntryRecord:
    index: int
    intervals: list[tuple[float, float]]
    first_entry: Optional[float]
    first_exit: Optional[float]


@dataclass
class EntryTimeReport:
    """Entry intervals of each point and how the first entry time settles along the sequence."""

    alpha: float
    beta: float
    t_step: float
    L_max: float
    records: list[EntryRecord]
    stabilized_from: Optional[int]
    L_star: Optional[float]
    common_exit: Optional[float]
    predicted_L: Optional[float]

    @property
    def matches_prediction(self) -> bool:
        if self.L_star is None or self.predicted_L is None or self.common_exit is None:
            return False
        # L* must open a nonempty window shared by the stabilized tail
        if not self.L_star < self.common_exit:
            return False
        return abs(self.L_star - self.predicted_L) <= self.t_step + 1e-9


def _runs(grid: np.ndarray, mask: np.ndarray) -> list[tuple[float, float]]:
    runs = []
    start = None
    for t, flag in zip(grid, mask):
        if flag and start is None:
            start = float(t)
        if not flag and start is not None:
            runs.append((start, float(prev)))
            start = None
        prev = t
    if start is not None:
        runs.append((start, float(grid[-1])))
    return runs


def entry_time_experiment(
    model: VectorFieldModel,
    report: SplittingReport,
    alpha: float,
    beta: float,
    contracted_seq: Sequence[Sequence[float]],
    L_max: float,
    t_step: float = 0.05,
    orthogonal: bool = False,
    escape_factor: float = 4.0,
    tol: Optional[Tolerance] = None,
) -> EntryTimeReport:
    """Measure {t in [0, L_max] : phi_t(x_n) in the region} on a grid for each x_n."""

    if t_step <= 0 or L_max <= 0:
        raise BadParameters("t_step and L_max must be positive")
    grid = np.arange(0.0, L_max + 0.5 * t_step, t_step)
    records: list[EntryRecord] = []
    for index, x in enumerate(contracted_seq):
        segment = integrate_until_escape(
            model, x, L_max, report.sigma, escape_factor * beta, tol
        )
        end = segment.times[-1]
        mask = np.array(
            [
                t <= end + 1e-12
                and region_membership(
                    model, report, alpha, beta, segment.interp(min(float(t), end)), orthogonal
                )
                for t in grid
            ]
        )
        intervals = _runs(grid, mask)
        first = intervals[0] if intervals else None
        records.append(
            EntryRecord(
                index=index,
                intervals=intervals,
                first_entry=first[0] if first else None,
                first_exit=first[1] if first else None,
            )
        )

    entries = [record.first_entry for record in records]
    stabilized_from = None
    l_star = None
    common_exit = None
    if entries and entries[-1] is not None:
        last = entries[-1]
        start = len(entries) - 1
        while start > 0:
            previous = entries[start - 1]
            if previous is None or abs(previous - last) > t_step + 1e-9:
                break
            start -= 1
        stabilized_from = start
        tail = records[start:]
        l_star = max(record.first_entry for record in tail)  # type: ignore[type-var]
        common_exit = min(record.first_exit for record in tail)  # type: ignore[type-var]

    predicted = None
    if len(contracted_seq):
        last_point = np.asarray(contracted_seq[-1], dtype=float)
        flow_dir = model.evaluate(last_point)
        if np.linalg.norm(flow_dir) > settings.singular_tol:
            predicted = predict_entry_time(model, report, flow_dir, alpha, grid, orthogonal)

    logger.info(
        f"entry_time_experiment: stabilized from n={stabilized_from}, L*={l_star}, predicted={predicted}"
    )
    return EntryTimeReport(
        alpha=alpha,
        beta=beta,
        t_step=t_step,
        L_max=L_max,
        records=records,
        stabilized_from=stabilized_from,
        L_star=l_star,
        common_exit=common_exit,
        predicted_L=predicted,
    )


__all__ = [
    "SplittingReport",
    "SplittingFrame",
    "ConeKind",
    "ConeSpec",
    "ManifoldCurve",
    "ConjugacyCheck",
    "ConeClaimReport",
    "DiskIntersection",
    "LemmaConstants",
    "LemmaDiskParameters",
    "LemmaDiskReport",
    "EntryRecord",
    "EntryTimeReport",
    "split_at_singularity",
    "splitting_residuals",
    "cone_contains",
    "region_membership",
    "approximate_WF",
    "conjugacy_check",
    "cone_claim_check",
    "disk_meets_WF",
    "measure_lemma_constants",
    "lemma_disk_parameters",
    "lemma_disk_experiment",
    "predict_entry_time",
    "entry_time_experiment",
]
