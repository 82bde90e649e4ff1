"""Vector-field models, the built-in catalog and singularity classification."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy import linalg

from src.config import settings
from src.utils.error_handler import ConfigError, EigenFailure, NotASingularity

logger = logging.getLogger(__name__)

ArrayFn = Callable[[np.ndarray], np.ndarray]


def _as_array(x: Any) -> np.ndarray:
    arr = np.asarray(x)
    if np.iscomplexobj(arr):
        return arr.astype(complex)
    return arr.astype(float)


@dataclass(frozen=True, eq=False)
class VectorFieldModel:
    """A smooth field on R^d with its Jacobian and known equilibria.

    ``evaluate`` keeps complex input complex, which lets callers sample the
    field on complex circles (Taylor coefficients of invariant curves).
    """

    name: str
    dim: int
    evaluate_fn: ArrayFn = field(repr=False)
    jacobian_fn: ArrayFn = field(repr=False)
    singularities: tuple[np.ndarray, ...] = ()
    params: Mapping[str, Any] = field(default_factory=dict)
    center_curve: Optional[Callable[[float], np.ndarray]] = field(
        default=None, repr=False
    )

    def evaluate(self, x: Any) -> np.ndarray:
        """Return X(x)."""

        return _as_array(self.evaluate_fn(_as_array(x)))

    def jacobian(self, x: Any) -> np.ndarray:
        """Return DX(x) as a d x d matrix."""

        return _as_array(self.jacobian_fn(_as_array(x))).reshape(self.dim, self.dim)

    def speed(self, x: Any) -> float:
        return float(np.linalg.norm(self.evaluate(x)))


@dataclass(frozen=True)
class SingularityClass:
    """Spectral classification of an equilibrium."""

    eigenvalues: np.ndarray
    is_hyperbolic: bool
    is_sectionally_dissipative: bool
    max_real_part: float


def classify_singularity(
    model: VectorFieldModel,
    sigma: Sequence[float],
    tol: Optional[float] = None,
) -> SingularityClass:
    """Classify ``sigma`` by the eigenvalues of DX(sigma).

    Pair sums exactly at the tolerance count as dissipative.
    """

    tol = settings.eigen_tol if tol is None else tol
    point = np.asarray(sigma, dtype=float)
    residual = model.speed(point)
    if residual > tol:
        raise NotASingularity(
            f"|X(sigma)| = {residual:.3e} exceeds tolerance {tol:.1e} for model {model.name}"
        )

    matrix = model.jacobian(point)
    try:
        eigenvalues = linalg.eigvals(matrix)
    except (linalg.LinAlgError, ValueError) as exc:
        raise EigenFailure(f"eigen-solver failed at sigma: {exc}") from exc
    if not np.all(np.isfinite(eigenvalues)):
        raise EigenFailure("eigen-solver returned non-finite eigenvalues")

    order = np.lexsort((eigenvalues.imag, -eigenvalues.real))
    eigenvalues = eigenvalues[order]
    real_parts = eigenvalues.real

    is_hyperbolic = bool(np.all(np.abs(real_parts) > tol))
    if real_parts.size >= 2:
        # the two largest real parts give the worst pair sum
        is_dissipative = bool(real_parts[0] + real_parts[1] <= tol)
    else:
        is_dissipative = True

    result = SingularityClass(
        eigenvalues=eigenvalues,
        is_hyperbolic=is_hyperbolic,
        is_sectionally_dissipative=is_dissipative,
        max_real_part=float(real_parts[0]),
    )
    logger.debug(
        f"{model.name}: eigenvalues={np.round(eigenvalues, 6)}, "
        f"hyperbolic={is_hyperbolic}, dissipative={is_dissipative}"
    )
    return result


def check_jacobian(
    model: VectorFieldModel,
    points: Iterable[Sequence[float]],
    h: float = 1e-6,
) -> float:
    """Worst relative gap between the Jacobian and central differences."""

    worst = 0.0
    for x in points:
        point = np.asarray(x, dtype=float)
        analytic = model.jacobian(point)
        numeric = np.empty_like(analytic)
        for j in range(model.dim):
            step = np.zeros(model.dim)
            step[j] = h
            numeric[:, j] = (model.evaluate(point + step) - model.evaluate(point - step)) / (
                2 * h
            )
        scale = max(float(np.linalg.norm(analytic)), 1.0)
        worst = max(worst, float(np.linalg.norm(analytic - numeric)) / scale)
    return worst


def _matrix_param(value: Any, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 1:
        return np.diag(arr)
    if arr.ndim == 2 and arr.shape[0] == arr.shape[1]:
        return arr
    raise ConfigError(f"parameter '{name}' must be a diagonal list or a square matrix", name)


def linear(matrix: Any = None, diagonal: Any = None, name: str = "linear") -> VectorFieldModel:
    """Linear field X(x) = A x."""

    if matrix is not None:
        a = _matrix_param(matrix, "matrix")
    else:
        a = np.diag(np.asarray(diagonal if diagonal is not None else (1.0, -1.0), dtype=float))
    dim = a.shape[0]
    return VectorFieldModel(
        name=name,
        dim=dim,
        evaluate_fn=lambda x: a @ x,
        jacobian_fn=lambda x: a,
        singularities=(np.zeros(dim),),
        params={"matrix": a.tolist()},
    )


def linear_sink() -> VectorFieldModel:
    return linear(diagonal=(-1.0, -2.0), name="linear_sink")


def degenerate_sink() -> VectorFieldModel:
    """diag(0, -1, -2): non-hyperbolic and sectionally dissipative."""

    return linear(diagonal=(0.0, -1.0, -2.0), name="degenerate_sink")


def radial(dim: int = 2) -> VectorFieldModel:
    identity = np.eye(dim)
    return VectorFieldModel(
        name="radial",
        dim=dim,
        evaluate_fn=lambda x: -x,
        jacobian_fn=lambda x: -identity,
        singularities=(np.zeros(dim),),
        params={"dim": dim},
    )


def rotation() -> VectorFieldModel:
    a = np.array([[0.0, -1.0], [1.0, 0.0]])
    return VectorFieldModel(
        name="rotation",
        dim=2,
        evaluate_fn=lambda x: a @ x,
        jacobian_fn=lambda x: a,
        singularities=(np.zeros(2),),
    )


def hopf(mu: float = 0.5) -> VectorFieldModel:
    """Hopf normal form; the limit cycle is the circle of radius sqrt(mu)."""

    if mu <= 0:
        raise ConfigError("hopf requires mu > 0", "mu")

    def evaluate(p: np.ndarray) -> np.ndarray:
        x, y = p[0], p[1]
        r2 = x * x + y * y
        return np.array([mu * x - y - x * r2, x + mu * y - y * r2])

    def jacobian(p: np.ndarray) -> np.ndarray:
        x, y = p[0], p[1]
        return np.array(
            [
                [mu - (3 * x * x + y * y), -1.0 - 2 * x * y],
                [1.0 - 2 * x * y, mu - (x * x + 3 * y * y)],
            ]
        )

    return VectorFieldModel(
        name="hopf",
        dim=2,
        evaluate_fn=evaluate,
        jacobian_fn=jacobian,
        singularities=(np.zeros(2),),
        params={"mu": mu},
    )


def lorenz(sigma: float = 10.0, rho: float = 28.0, beta: float = 8.0 / 3.0) -> VectorFieldModel:
    def evaluate(p: np.ndarray) -> np.ndarray:
        x, y, z = p[0], p[1], p[2]
        return np.array([sigma * (y - x), x * (rho - z) - y, x * y - beta * z])

    def jacobian(p: np.ndarray) -> np.ndarray:
        x, y, z = p[0], p[1], p[2]
        return np.array(
            [
                [-sigma, sigma, 0.0],
                [rho - z, -1.0, -x],
                [y, x, -beta],
            ]
        )

    equilibria = [np.zeros(3)]
    if beta * (rho - 1.0) > 0:
        q = np.sqrt(beta * (rho - 1.0))
        equilibria.append(np.array([q, q, rho - 1.0]))
        equilibria.append(np.array([-q, -q, rho - 1.0]))

    return VectorFieldModel(
        name="lorenz",
        dim=3,
        evaluate_fn=evaluate,
        jacobian_fn=jacobian,
        singularities=tuple(equilibria),
        params={"sigma": sigma, "rho": rho, "beta": beta},
    )


def lemma_model(
    a_f: float = 1.0,
    a_e: Any = (-1.0, -2.0),
    b: float = 0.0,
    k: float = 0.3,
    c: float = 0.3,
    e: float = 0.0,
) -> VectorFieldModel:
    """Split model with coordinates x = (x_F, x_E).

    X_F = a_f x_F + c x_F^2 + e |x_E|^2
    X_E = A_E x_E + b x_F^2 + k x_F x_E
    """

    a_mat = _matrix_param(a_e, "a_e")
    m = a_mat.shape[0]
    identity = np.eye(m)

    def evaluate(p: np.ndarray) -> np.ndarray:
        x_f = p[0]
        x_e = p[1:]
        out_f = a_f * x_f + c * x_f * x_f + e * np.sum(x_e * x_e)
        out_e = a_mat @ x_e + b * x_f * x_f + k * x_f * x_e
        return np.concatenate(([out_f], out_e))

    def jacobian(p: np.ndarray) -> np.ndarray:
        x_f = p[0]
        x_e = p[1:]
        jac = np.zeros((m + 1, m + 1), dtype=np.result_type(p, float))
        jac[0, 0] = a_f + 2 * c * x_f
        jac[0, 1:] = 2 * e * x_e
        jac[1:, 0] = 2 * b * x_f + k * x_e
        jac[1:, 1:] = a_mat + k * x_f * identity
        return jac

    return VectorFieldModel(
        name="lemma_model",
        dim=m + 1,
        evaluate_fn=evaluate,
        jacobian_fn=jacobian,
        singularities=(np.zeros(m + 1),),
        params={"a_f": a_f, "a_e": a_mat.tolist(), "b": b, "k": k, "c": c, "e": e},
    )


def center_normal_form(q: float = 1.0, a_e: Any = (-1.0,), k: float = 0.0) -> VectorFieldModel:
    """Center-direction normal form x_F' = q x_F^2, x_E' = A_E x_E + k x_F x_E.

    The F-axis is invariant and serves as the analytic center curve.
    """

    a_mat = _matrix_param(a_e, "a_e")
    m = a_mat.shape[0]
    identity = np.eye(m)

    def evaluate(p: np.ndarray) -> np.ndarray:
        x_f = p[0]
        x_e = p[1:]
        return np.concatenate(([q * x_f * x_f], a_mat @ x_e + k * x_f * x_e))

    def jacobian(p: np.ndarray) -> np.ndarray:
        x_f = p[0]
        x_e = p[1:]
        jac = np.zeros((m + 1, m + 1), dtype=np.result_type(p, float))
        jac[0, 0] = 2 * q * x_f
        jac[1:, 0] = k * x_e
        jac[1:, 1:] = a_mat + k * x_f * identity
        return jac

    def curve(s: float) -> np.ndarray:
        point = np.zeros(m + 1)
        point[0] = s
        return point

    return VectorFieldModel(
        name="center_normal_form",
        dim=m + 1,
        evaluate_fn=evaluate,
        jacobian_fn=jacobian,
        singularities=(np.zeros(m + 1),),
        params={"q": q, "a_e": a_mat.tolist(), "k": k},
        center_curve=curve,
    )


_CATALOG: Dict[str, Callable[..., VectorFieldModel]] = {
    "linear_sink": linear_sink,
    "radial": radial,
    "rotation": rotation,
    "hopf": hopf,
    "lorenz": lorenz,
    "lemma_model": lemma_model,
    "degenerate_sink": degenerate_sink,
    "linear": linear,
    "center_normal_form": center_normal_form,
}


def register_model(name: str, factory: Callable[..., VectorFieldModel]) -> None:
    """Add a user-defined model factory to the catalog."""

    if name in _CATALOG:
        logger.warning(f"Replacing registered model '{name}'")
    _CATALOG[name] = factory


def list_models() -> list[str]:
    return sorted(_CATALOG)


def get_model(name: str, **params: Any) -> VectorFieldModel:
    """Build a catalog model by name with keyword parameters."""

    try:
        factory = _CATALOG[name]
    except KeyError:
        raise ConfigError(
            f"unknown model '{name}'; available: {', '.join(list_models())}", "model.name"
        ) from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigError(f"invalid parameters for model '{name}': {exc}", "model.params") from exc


def builtin_models() -> list[VectorFieldModel]:
    """Every catalog model with default parameters."""

    return [factory() for _, factory in sorted(_CATALOG.items())]


__all__ = [
    "VectorFieldModel",
    "SingularityClass",
    "classify_singularity",
    "check_jacobian",
    "linear",
    "linear_sink",
    "degenerate_sink",
    "radial",
    "rotation",
    "hopf",
    "lorenz",
    "lemma_model",
    "center_normal_form",
    "register_model",
    "list_models",
    "get_model",
    "builtin_models",
]
