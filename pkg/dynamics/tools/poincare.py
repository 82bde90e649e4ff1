"""Linear Poincare flow, its rescaled version, chain products and the sectional map."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg
from scipy.optimize import brentq
from scipy.spatial.distance import cdist, pdist

from src.config import settings
from src.utils.error_handler import BadParameters, LeftDomain, NoCrossing, SingularPoint

from .field import VectorFieldModel
from .flow import Tolerance, flow_point, flow_with_tangent, integrate
from .pliss import is_contracted

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class NormalBasis:
    """Orthonormal basis of the normal space N_x; ``vectors`` holds one basis vector per column."""

    base: np.ndarray
    vectors: np.ndarray
    flow_direction: np.ndarray

    @property
    def rank(self) -> int:
        return self.vectors.shape[1]

    def matches(self, other: "NormalBasis", atol: float = 1e-12) -> bool:
        return bool(
            np.allclose(self.base, other.base, atol=atol)
            and np.allclose(self.vectors, other.vectors, atol=atol)
        )


def normal_basis(
    model: VectorFieldModel, x: Sequence[float], singular_tol: Optional[float] = None
) -> NormalBasis:
    """Householder completion of X(x)/|X(x)| to an orthonormal frame.

    Each returned vector has its first nonzero coordinate positive.
    """

    singular_tol = settings.singular_tol if singular_tol is None else singular_tol
    point = np.asarray(x, dtype=float)
    vector = model.evaluate(point)
    speed = float(np.linalg.norm(vector))
    if speed <= singular_tol:
        raise SingularPoint(f"|X(x)| = {speed:.3e} at {point}: normal space undefined")

    w = vector / speed
    e1 = np.zeros_like(w)
    e1[0] = 1.0
    reflector = w + e1 if w[0] > 0 else e1 - w
    householder = np.eye(len(w)) - 2.0 * np.outer(reflector, reflector) / np.dot(
        reflector, reflector
    )
    vectors = householder[:, 1:].copy()
    for j in range(vectors.shape[1]):
        column = vectors[:, j]
        leading = np.flatnonzero(np.abs(column) > 1e-14)
        if leading.size and column[leading[0]] < 0:
            vectors[:, j] = -column
    return NormalBasis(base=point, vectors=vectors, flow_direction=w)


@dataclass(frozen=True, eq=False)
class NormalOperator:
    """Matrix of psi_t (or psi*_t when ``rescaled``) between two normal bases."""

    from_basis: NormalBasis
    to_basis: NormalBasis
    matrix: np.ndarray
    rescaled: bool
    elapsed: float

    def apply(self, coords: Sequence[float]) -> np.ndarray:
        """Image of a vector given in ``from_basis`` coordinates, in ``to_basis`` coordinates."""

        return self.matrix @ np.asarray(coords, dtype=float)

    def apply_vector(self, v: Sequence[float]) -> np.ndarray:
        """Image of an ambient normal vector as an ambient vector at the target point."""

        coords = self.from_basis.vectors.T @ np.asarray(v, dtype=float)
        return self.to_basis.vectors @ self.apply(coords)

    def norm(self) -> float:
        values = linalg.svdvals(self.matrix)
        return float(values[0]) if values.size else 0.0

    def compose(self, other: "NormalOperator") -> "NormalOperator":
        """Return ``other`` after ``self``; ``other`` must start where ``self`` ends."""

        if self.rescaled != other.rescaled:
            raise BadParameters("cannot compose rescaled and unrescaled operators")
        if not self.to_basis.matches(other.from_basis, atol=1e-8):
            raise BadParameters("operators do not chain: bases differ")
        return NormalOperator(
            from_basis=self.from_basis,
            to_basis=other.to_basis,
            matrix=other.matrix @ self.matrix,
            rescaled=self.rescaled,
            elapsed=self.elapsed + other.elapsed,
        )


@dataclass(frozen=True, eq=False)
class PartitionSchedule:
    """Partition times 0 = t_0 < ... < t_n with gaps at most ``gap_bound``."""

    times: np.ndarray
    gap_bound: float

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", times)
        if times.ndim != 1 or times.size < 1 or times[0] != 0.0:
            raise BadParameters("schedule must start at t_0 = 0")
        gaps = np.diff(times)
        if np.any(gaps <= 0):
            raise BadParameters("schedule times must be strictly increasing")
        if np.any(gaps > self.gap_bound * (1 + 1e-12)):
            raise BadParameters(
                f"schedule gap {gaps.max():.6g} exceeds bound T={self.gap_bound:.6g}"
            )

    @classmethod
    def uniform(cls, span: float, gap_bound: float) -> "PartitionSchedule":
        """Fewest equal legs covering [0, span] with gaps at most ``gap_bound``."""

        if span <= 0 or gap_bound <= 0:
            raise BadParameters("span and gap bound must be positive")
        legs = max(1, int(np.ceil(span / gap_bound - 1e-12)))
        return cls(times=np.linspace(0.0, span, legs + 1), gap_bound=gap_bound)

    @property
    def durations(self) -> np.ndarray:
        return np.diff(self.times)

    @property
    def span(self) -> float:
        return float(self.times[-1])

    @property
    def legs(self) -> int:
        return len(self.times) - 1

    def shifted(self, k: int) -> "PartitionSchedule":
        """Cyclic shift that starts the schedule at leg ``k``."""

        gaps = np.roll(self.durations, -k)
        return PartitionSchedule(
            times=np.concatenate(([0.0], np.cumsum(gaps))), gap_bound=self.gap_bound
        )

    def repeated(self, copies: int) -> "PartitionSchedule":
        gaps = np.tile(self.durations, copies)
        return PartitionSchedule(
            times=np.concatenate(([0.0], np.cumsum(gaps))), gap_bound=self.gap_bound
        )


def linear_poincare(
    model: VectorFieldModel,
    x: Sequence[float],
    t: float,
    rescaled: bool = False,
    tol: Optional[Tolerance] = None,
) -> NormalOperator:
    """psi_t (or psi*_t) at ``x`` in the deterministic normal bases."""

    source = normal_basis(model, x)
    endpoint, matrix = flow_with_tangent(model, source.base, t, tol)
    target = normal_basis(model, endpoint)
    # the projection along X(phi_t x) vanishes in target coordinates
    block = target.vectors.T @ matrix @ source.vectors
    if rescaled:
        block = block * (model.speed(source.base) / model.speed(target.base))
    return NormalOperator(
        from_basis=source, to_basis=target, matrix=block, rescaled=rescaled, elapsed=float(t)
    )


@dataclass(frozen=True, eq=False)
class ChainProduct:
    """Per-leg norms of a chained psi (or psi*) product along a schedule."""

    leg_norms: np.ndarray
    times: np.ndarray
    points: np.ndarray
    rescaled: bool

    @property
    def log_norms(self) -> np.ndarray:
        return np.log(self.leg_norms)

    @property
    def log_product(self) -> float:
        return float(np.sum(self.log_norms))

    @property
    def product(self) -> float:
        return float(np.exp(self.log_product))


def chain_product(
    model: VectorFieldModel,
    x: Sequence[float],
    schedule: PartitionSchedule,
    rescaled: bool = False,
    tol: Optional[Tolerance] = None,
) -> ChainProduct:
    """Chain psi over the schedule, one fresh pair of bases per leg."""

    point = np.asarray(x, dtype=float)
    norms = []
    points = [point]
    for dt in schedule.durations:
        operator = linear_poincare(model, point, float(dt), rescaled=rescaled, tol=tol)
        norms.append(operator.norm())
        point = operator.to_basis.base
        points.append(point)
    return ChainProduct(
        leg_norms=np.asarray(norms),
        times=schedule.times.copy(),
        points=np.asarray(points),
        rescaled=rescaled,
    )


def _check_disk(model: VectorFieldModel, x: np.ndarray, y: np.ndarray, radius: float) -> None:
    offset = y - x
    distance = float(np.linalg.norm(offset))
    if distance > radius * (1 + 1e-12):
        raise BadParameters(f"|y - x| = {distance:.3e} exceeds disk radius {radius:.3e}")
    flow_dir = model.evaluate(x)
    if abs(float(np.dot(offset, flow_dir))) > 1e-8 * max(distance, 1e-300) * np.linalg.norm(
        flow_dir
    ):
        raise BadParameters("y is not on the normal disk at x")


def sectional_map(
    model: VectorFieldModel,
    x: Sequence[float],
    t: float,
    y: Sequence[float],
    radius_check: Optional[float] = None,
    domain_bound: Optional[float] = None,
    tol: Optional[Tolerance] = None,
) -> np.ndarray:
    """Holonomy from the normal disk at x to the normal hyperplane at phi_t(x)."""

    if t < 0:
        raise BadParameters("sectional map requires t >= 0")
    base = np.asarray(x, dtype=float)
    start = np.asarray(y, dtype=float)
    speed = model.speed(base)
    if speed <= settings.singular_tol:
        raise SingularPoint(f"x = {base} is a singularity")
    radius = settings.radius_fraction * speed if radius_check is None else radius_check
    bound = settings.section_domain_bound if domain_bound is None else domain_bound
    _check_disk(model, base, start, radius)

    target = flow_point(model, base, t, tol)
    normal = model.evaluate(target)
    normal_norm = float(np.linalg.norm(normal))
    if normal_norm <= settings.singular_tol:
        raise SingularPoint(f"phi_t(x) = {target} is a singularity")
    if np.array_equal(start, base):
        return target

    s_low, s_high = 0.5 * t, 2.0 * t + 1.0
    orbit = integrate(model, start, s_high, tol)
    reference = integrate(model, base, s_high, tol)

    def crossing(s: float) -> float:
        return float(np.dot(orbit.interp(s) - target, normal))

    samples = max(200, int(np.ceil(50 * (s_high - s_low))))
    grid = np.linspace(s_low, s_high, samples)
    values = np.array([crossing(s) for s in grid])
    scale = normal_norm * max(normal_norm, 1.0) * settings.crossing_tol

    candidates: list[float] = []
    for i in range(samples - 1):
        if abs(values[i]) <= scale:
            candidates.append(float(grid[i]))
        elif values[i] < 0 < values[i + 1]:
            candidates.append(
                float(brentq(crossing, grid[i], grid[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps))
            )
    if abs(values[-1]) <= scale:
        candidates.append(float(grid[-1]))
    if not candidates:
        raise NoCrossing(f"no crossing of the section within s in [{s_low:.4g}, {s_high:.4g}]")
    hit_time = min(candidates, key=lambda s: abs(s - t))

    # the whole y-orbit up to the crossing, including s < s_low
    path = np.array([orbit.interp(s) for s in np.linspace(0.0, hit_time, samples)])
    ref_points = np.array([reference.interp(s) for s in np.linspace(0.0, s_high, samples)])
    stray = float(cdist(path, ref_points).min(axis=1).max())
    if stray > bound:
        raise LeftDomain(
            f"orbit of y strays {stray:.3e} from the reference orbit (bound {bound:.3e})",
            distance=stray,
        )
    logger.debug(f"sectional map: crossing at s={hit_time:.12g} (t={t:.6g})")
    return orbit.interp(hit_time)


def sectional_map_jacobian(
    model: VectorFieldModel,
    x: Sequence[float],
    t: float,
    h: float = 1e-5,
    tol: Optional[Tolerance] = None,
) -> np.ndarray:
    """Central-difference Jacobian of the sectional map in normal-basis coordinates."""

    source = normal_basis(model, x)
    target = normal_basis(model, flow_point(model, source.base, t, tol))
    radius = max(2 * h, settings.radius_fraction * model.speed(source.base))
    columns = []
    for j in range(source.rank):
        step = h * source.vectors[:, j]
        plus = sectional_map(model, source.base, t, source.base + step, radius, tol=tol)
        minus = sectional_map(model, source.base, t, source.base - step, radius, tol=tol)
        columns.append(target.vectors.T @ (plus - minus) / (2 * h))
    return np.column_stack(columns)


@dataclass
class ShrinkProbeResult:
    """Diameter curve of a sampled normal disk under the sectional map."""

    times: np.ndarray
    diameters: np.ndarray
    relative_diameters: np.ndarray
    initial_diameter: float
    shrinks: bool
    contraction_verified: bool
    failing_radius: Optional[float] = None
    notes: list[str] = field(default_factory=list)


def _boundary_directions(rank: int, n_samples: int, seed: int) -> np.ndarray:
    if rank == 1:
        return np.array([[1.0], [-1.0]])
    if rank == 2:
        angles = 2 * np.pi * np.arange(n_samples) / n_samples
        return np.column_stack((np.cos(angles), np.sin(angles)))
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((n_samples, rank))
    return raw / np.linalg.norm(raw, axis=1, keepdims=True)


def shrink_probe(
    model: VectorFieldModel,
    x: Sequence[float],
    C: float,
    eta: float,
    T: float,
    r: float,
    horizon: float,
    n_samples: int = 16,
    seed: int = 0,
    tol: Optional[Tolerance] = None,
) -> ShrinkProbeResult:
    """Track the image diameter of the disk N_x(r|X(x)|) at times T, 2T, ... up to the horizon."""

    if T <= 0 or r <= 0 or horizon < T:
        raise BadParameters("shrink probe needs T > 0, r > 0 and horizon >= T")
    basis = normal_basis(model, x)
    base = basis.base
    speed = model.speed(base)
    radius = r * speed
    directions = _boundary_directions(basis.rank, n_samples, seed)
    samples = base + radius * directions @ basis.vectors.T
    initial = float(pdist(samples).max())

    steps = int(np.floor(horizon / T + 1e-12))
    schedule = PartitionSchedule.uniform(steps * T, T)
    notes: list[str] = []
    chain = chain_product(model, base, schedule, rescaled=True, tol=tol)
    verified = is_contracted(chain.log_norms, C, eta, schedule.durations)
    if not verified:
        notes.append("rescaled leg norms do not witness (C, eta, T)-contraction")
        logger.warning(f"shrink_probe: {notes[-1]}")

    times, diameters, relative = [], [], []
    failing = None
    for k in range(1, steps + 1):
        t_k = k * T
        try:
            images = np.array(
                [sectional_map(model, base, t_k, y, radius_check=radius, tol=tol) for y in samples]
            )
        except LeftDomain as exc:
            failing = r
            notes.append(f"left domain at t={t_k:.4g}: {exc}")
            logger.warning(f"shrink_probe: {notes[-1]}")
            break
        diameter = float(pdist(images).max())
        moving_speed = model.speed(chain.points[k])
        times.append(t_k)
        diameters.append(diameter)
        relative.append((diameter / moving_speed) / (initial / speed))

    diameters_arr = np.asarray(diameters)
    shrinks = failing is None and bool(np.any(diameters_arr < 0.1 * initial))
    return ShrinkProbeResult(
        times=np.asarray(times),
        diameters=diameters_arr,
        relative_diameters=np.asarray(relative),
        initial_diameter=initial,
        shrinks=shrinks,
        contraction_verified=verified,
        failing_radius=failing,
        notes=notes,
    )


__all__ = [
    "NormalBasis",
    "NormalOperator",
    "PartitionSchedule",
    "ChainProduct",
    "ShrinkProbeResult",
    "normal_basis",
    "linear_poincare",
    "chain_product",
    "sectional_map",
    "sectional_map_jacobian",
    "shrink_probe",
]
