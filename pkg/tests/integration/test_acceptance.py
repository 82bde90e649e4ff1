"""Desk-scale checks over the bundled scenarios and the numerical identities they rely on."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from dynamics.scenarios import run
from dynamics.tools.field import (
    VectorFieldModel,
    builtin_models,
    degenerate_sink,
    hopf,
    lemma_model,
    lorenz,
    radial,
)
from dynamics.tools.flow import (
    flow_point,
    second_component_operator,
    sphere_flow,
    tangent_flow,
)
from dynamics.tools.pliss import adversarial_search, find_tail_offset, pliss_bound
from dynamics.tools.poincare import (
    PartitionSchedule,
    chain_product,
    linear_poincare,
    sectional_map_jacobian,
)
from dynamics.tools.sinks import (
    PeriodicOrbit,
    certify_sink,
    extract_contracted_point,
    verify_contracted,
)
from dynamics.tools.splitting import (
    cone_claim_check,
    lemma_disk_experiment,
    lemma_disk_parameters,
    split_at_singularity,
)
from src.reports import load_config_file, parse_config

pytestmark = pytest.mark.slow

CONFIG_DIR = Path(__file__).resolve().parents[2] / "configs"
FINE_TOL = (1e-12, 1e-12)

EXPECTED_VERDICTS = {
    "hopf_certify_sink.json": ("certify_sink",),
    "hopf_pliss_extract.json": ("certify_sink", "verify_contracted"),
    "hopf_shrink_probe.json": ("shrink_probe",),
    "lemma_cone_claim.json": ("cone_claim",),
    "lemma_disk_intersection.json": ("disk_intersection",),
    "lemma_entry_time.json": ("splitting", "entry_time"),
    "lorenz_splitting.json": ("splitting",),
    "pipeline.json": (
        "certify_sink",
        "verify_contracted",
        "uniform_scale",
        "splitting",
        "entry_time",
        "disk_meets_WF",
    ),
}


@pytest.mark.parametrize("name", sorted(EXPECTED_VERDICTS))
def test_bundled_scenario(name: str) -> None:
    report = run(parse_config(load_config_file(str(CONFIG_DIR / name))))
    for stage in EXPECTED_VERDICTS[name]:
        assert report.verdicts.get(stage) is True, stage
    if name != "lorenz_splitting.json":
        assert not report.has_numerical_failure


def _sample_points(model: VectorFieldModel, count: int, rng: np.random.Generator) -> np.ndarray:
    if model.name == "lorenz":
        return np.column_stack(
            (rng.uniform(-10, 10, count), rng.uniform(-10, 10, count), rng.uniform(5, 40, count))
        )
    return rng.uniform(-0.5, 0.5, size=(count, model.dim))


def _ambient(operator) -> np.ndarray:
    return operator.to_basis.vectors @ operator.matrix


def _assert_close_in_norm(actual: np.ndarray, expected: np.ndarray, rel: float) -> None:
    scale = max(1.0, float(np.linalg.norm(expected, 2)))
    assert float(np.linalg.norm(actual - expected, 2)) <= rel * scale


@pytest.mark.parametrize("model", builtin_models(), ids=lambda model: model.name)
def test_variational_equation_matches_finite_differences(model: VectorFieldModel) -> None:
    rng = np.random.default_rng(1)
    h = 1e-5
    for x in _sample_points(model, 100, rng):
        t = float(rng.uniform(0.05, 0.3))
        exact = tangent_flow(model, x, t, FINE_TOL)
        columns = []
        for j in range(model.dim):
            step = np.zeros(model.dim)
            step[j] = h
            plus = flow_point(model, x + step, t, FINE_TOL)
            minus = flow_point(model, x - step, t, FINE_TOL)
            columns.append((plus - minus) / (2 * h))
        error = np.linalg.norm(np.column_stack(columns) - exact, 2)
        assert error <= 1e-3 * np.linalg.norm(exact, 2)


@pytest.mark.parametrize("model", builtin_models(), ids=lambda model: model.name)
def test_flow_and_cocycle_identities(model: VectorFieldModel) -> None:
    rng = np.random.default_rng(2)
    for x in _sample_points(model, 100, rng):
        s, t = rng.uniform(0.05, 0.2, size=2)
        middle = flow_point(model, x, s, FINE_TOL)
        whole_point = flow_point(model, x, s + t, FINE_TOL)
        assert np.linalg.norm(flow_point(model, middle, t, FINE_TOL) - whole_point) <= 1e-8 * (
            1.0 + np.linalg.norm(whole_point)
        )

        whole = tangent_flow(model, x, s + t)
        split = tangent_flow(model, middle, t) @ tangent_flow(model, x, s)
        _assert_close_in_norm(split, whole, 1e-5)

        for rescaled in (False, True):
            first = linear_poincare(model, x, s, rescaled=rescaled)
            second = linear_poincare(model, first.to_basis.base, t, rescaled=rescaled)
            composed = first.compose(second)
            direct = linear_poincare(model, x, s + t, rescaled=rescaled)
            _assert_close_in_norm(_ambient(composed), _ambient(direct), 1e-5)


def test_rescaled_operator_is_speed_ratio_times_plain() -> None:
    model = lorenz()
    for x in _sample_points(model, 5, np.random.default_rng(3)):
        plain = linear_poincare(model, x, 0.1)
        rescaled = linear_poincare(model, x, 0.1, rescaled=True)
        end = plain.to_basis.base
        factor = model.speed(x) / model.speed(end)
        np.testing.assert_allclose(rescaled.matrix, factor * plain.matrix, rtol=1e-12)


@pytest.mark.parametrize("gap_bound", [0.3, 0.7, 1.5])
def test_hopf_chain_telescopes(gap_bound: float) -> None:
    schedule = PartitionSchedule.uniform(2 * math.pi, gap_bound)
    chain = chain_product(hopf(), [math.sqrt(0.5), 0.0], schedule, rescaled=True)
    assert chain.log_product == pytest.approx(-2 * math.pi, rel=1e-6)


def test_sphere_flow_derivative_at_singularities() -> None:
    anchors = [(model, sigma) for model in builtin_models() for sigma in model.singularities]
    rng = np.random.default_rng(4)
    h = 1e-6
    for choice in rng.integers(len(anchors), size=20):
        model, sigma = anchors[choice]
        t = float(rng.uniform(0.1, 0.5))
        u = rng.standard_normal(model.dim)
        u /= np.linalg.norm(u)
        operator, complement, image_norm = second_component_operator(
            tangent_flow(model, sigma, t), u
        )
        for j in range(complement.shape[1]):
            q = complement[:, j]
            derivative = (
                sphere_flow(model, sigma, u + h * q, t) - sphere_flow(model, sigma, u - h * q, t)
            ) / (2 * h)
            np.testing.assert_allclose(
                derivative, operator[:, j] / image_norm, rtol=1e-3, atol=1e-7
            )


def _premise_sequence(rng: np.random.Generator, C: float, lambda1: float, length: int) -> np.ndarray:
    values = np.empty(length)
    total = 0.0
    for i in range(length):
        values[i] = min(rng.normal(lambda1, 2.0), C + (i + 1) * lambda1 - total)
        total += values[i]
    return values


@pytest.mark.parametrize(
    "C, lambda1, lambda2",
    [(0.5, -1.0, -0.5), (2.0, -0.5, -0.2), (5.0, -0.3, -0.1)],
)
def test_tail_offset_bound_on_random_sequences(C: float, lambda1: float, lambda2: float) -> None:
    rng = np.random.default_rng(int(C * 10))
    bound = pliss_bound(C, lambda1, lambda2)
    for _ in range(10_000):
        selection = find_tail_offset(_premise_sequence(rng, C, lambda1, 200), lambda2)
        assert selection is not None
        assert selection.L <= bound


@pytest.mark.parametrize("mu", [0.25, 0.5, 1.0])
def test_hopf_cycles_are_certified(mu: float) -> None:
    orbit = PeriodicOrbit(anchor=np.array([math.sqrt(mu), 0.0]), period=2 * math.pi, residual=0.0)
    cert = certify_sink(hopf(mu=mu), orbit, alpha=mu, T=1.0, phases=8)
    assert cert.certified
    assert cert.m == 1
    assert cert.exponent == pytest.approx(2 * mu, rel=1e-5)
    assert cert.margin == pytest.approx(2 * math.pi * mu, rel=1e-4)


@pytest.mark.parametrize("eta", [0.2, 0.5, 0.8])
def test_contracted_points_survive_eight_periods(eta: float) -> None:
    model = hopf()
    orbit = PeriodicOrbit(anchor=np.array([math.sqrt(0.5), 0.0]), period=2 * math.pi, residual=0.0)
    cert = certify_sink(model, orbit, alpha=0.9, T=1.0, phases=8)
    contracted = extract_contracted_point(model, cert, eta=eta)
    check = verify_contracted(model, contracted.point, contracted.schedule, C=1.0, eta=eta, periods=8)
    assert check.contracted


@pytest.mark.parametrize(
    "a_f, a_e, gap",
    [(1.0, (-1.0, -2.0), 2.0), (0.5, (-0.5, -3.0), 1.0), (2.0, (-0.5, -1.0), 2.5)],
)
def test_domination_rate_matches_spectral_gap(a_f: float, a_e: tuple, gap: float) -> None:
    report = split_at_singularity(lemma_model(a_f=a_f, a_e=a_e), np.zeros(3))
    assert report.spectral_gap == pytest.approx(gap)
    assert report.fitted_lambda == pytest.approx(gap, rel=1e-5)


def test_sectional_jacobian_matches_linear_map() -> None:
    model = hopf()
    for angle in np.linspace(0.0, 2 * math.pi, 5, endpoint=False):
        x = 0.6 * np.array([math.cos(angle), math.sin(angle)])
        for t in (0.5, 1.5):
            numeric = sectional_map_jacobian(model, x, t)
            np.testing.assert_allclose(numeric, linear_poincare(model, x, t).matrix, atol=1e-4)


def test_cone_claim_large_sample() -> None:
    model = lemma_model()
    report = split_at_singularity(model, np.zeros(3))
    result = cone_claim_check(model, report, alpha=0.5, T_step=1.0, eps=1e-4, trials=1000, seed=0)
    assert result.holds
    assert result.checked > 0
    assert result.item1_failures == 0


def test_disk_intersection_sample() -> None:
    model = lemma_model()
    report = split_at_singularity(model, np.zeros(3))
    parameters = lemma_disk_parameters(model, report, 0.5, beta=0.1)
    assert parameters.alpha * parameters.c / parameters.c0 <= 0.5
    result = lemma_disk_experiment(model, report, 0.5, parameters=parameters, trials=100)
    assert result.all_hit


def test_radial_field_rescaled_flow_is_isometric() -> None:
    model = radial()
    rng = np.random.default_rng(5)
    for x in rng.uniform(-1.0, 1.0, size=(50, 2)):
        for t in (0.5, 2.0, 5.0):
            assert linear_poincare(model, x, t, rescaled=True).norm() == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("periods", [1, 2, 3, 4])
def test_rescaled_and_plain_products_agree_on_cycle(periods: int) -> None:
    schedule = PartitionSchedule.uniform(2 * math.pi, 1.0).repeated(periods)
    point = [math.sqrt(0.5), 0.0]
    plain = chain_product(hopf(), point, schedule)
    rescaled = chain_product(hopf(), point, schedule, rescaled=True)
    assert rescaled.log_product == pytest.approx(plain.log_product, abs=1e-8)


def test_adversarial_search_stays_below_bound() -> None:
    result = adversarial_search(2.0, -0.5, -0.2, length=30, grid=0.05)
    assert result.worst_L < result.bound
    if result.witness is not None:
        assert find_tail_offset(result.witness, -0.2).L == result.worst_L


def test_domination_rate_at_degenerate_and_lorenz_origins() -> None:
    sink = split_at_singularity(degenerate_sink(), np.zeros(3))
    assert sink.fitted_lambda == pytest.approx(1.0, rel=0.05)
    origin = split_at_singularity(lorenz(), np.zeros(3))
    assert origin.fitted_lambda == pytest.approx(origin.spectral_gap, rel=0.05)
