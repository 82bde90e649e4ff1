"""
Модульные тесты для линейного потока Пуанкаре и секционного отображения.
"""

import math

import numpy as np
import pytest

from dynamics.tools.field import VectorFieldModel, hopf, linear, radial, rotation
from dynamics.tools.flow import flow_point
from dynamics.tools.poincare import (
    PartitionSchedule,
    chain_product,
    linear_poincare,
    normal_basis,
    sectional_map,
    sectional_map_jacobian,
    shrink_probe,
)
from src.utils.error_handler import BadParameters, LeftDomain, SingularPoint

CYCLE_POINT = np.array([math.sqrt(0.5), 0.0])


class TestNormalBasis:
    """Тесты базиса нормального пространства."""

    def test_orthonormal_and_normal(self):
        """Тест ортонормальности и ортогональности полю."""
        model = hopf()
        basis = normal_basis(model, [0.3, -0.8])
        vectors = basis.vectors
        assert basis.rank == 1
        np.testing.assert_allclose(vectors.T @ vectors, np.eye(1), atol=1e-12)
        assert abs(vectors[:, 0] @ model.evaluate([0.3, -0.8])) < 1e-12

    def test_sign_convention(self):
        """Тест: первая ненулевая координата каждого вектора положительна."""
        basis = normal_basis(linear(matrix=np.diag([1.0, -1.0, 0.5])), [0.2, 0.7, -1.0])
        for column in basis.vectors.T:
            leading = column[np.flatnonzero(np.abs(column) > 1e-14)[0]]
            assert leading > 0

    def test_singular_point(self):
        """Тест ошибки в особой точке."""
        with pytest.raises(SingularPoint):
            normal_basis(hopf(), [0.0, 0.0])


class TestLinearPoincare:
    """Тесты линейного потока Пуанкаре."""

    def test_radial_rescaled_is_isometry(self):
        """Тест: для радиального поля перемасштабированный поток изометричен."""
        model = radial(dim=3)
        x = [1.0, 0.5, -0.25]
        assert linear_poincare(model, x, 2.0, rescaled=True).norm() == pytest.approx(1.0, rel=1e-8)
        assert linear_poincare(model, x, 2.0).norm() == pytest.approx(math.exp(-2.0), rel=1e-8)

    def test_apply_vector_on_radial(self):
        """Тест образа нормального вектора в объемлющих координатах."""
        model = radial(dim=3)
        operator = linear_poincare(model, [1.0, 0.0, 0.0], 1.0)
        image = operator.apply_vector([0.0, 1.0, 0.0])
        np.testing.assert_allclose(image, [0.0, math.exp(-1.0), 0.0], atol=1e-9)

    def test_hopf_cycle_contraction(self):
        """Тест: на цикле Хопфа psi_t = exp(-2 mu t)."""
        model = hopf(mu=0.5)
        for t in (0.5, 1.0, 2.0):
            plain = linear_poincare(model, CYCLE_POINT, t)
            rescaled = linear_poincare(model, CYCLE_POINT, t, rescaled=True)
            assert plain.norm() == pytest.approx(math.exp(-t), rel=1e-7)
            assert rescaled.norm() == pytest.approx(plain.norm(), rel=1e-7)

    def test_compose_matches_longer_time(self):
        """Тест композиции операторов."""
        model = hopf()
        first = linear_poincare(model, [0.3, 0.4], 0.5)
        second = linear_poincare(model, first.to_basis.base, 0.7)
        total = linear_poincare(model, [0.3, 0.4], 1.2)
        composed = first.compose(second)
        assert composed.elapsed == pytest.approx(1.2)
        np.testing.assert_allclose(composed.matrix, total.matrix, atol=1e-7)

    def test_compose_rejects_mismatched_bases(self):
        """Тест ошибки при несовпадении базисов."""
        model = hopf()
        first = linear_poincare(model, [0.3, 0.4], 0.5)
        other = linear_poincare(model, [0.9, 0.0], 0.5)
        with pytest.raises(BadParameters):
            first.compose(other)
        with pytest.raises(BadParameters):
            first.compose(linear_poincare(model, first.to_basis.base, 0.5, rescaled=True))


class TestPartitionSchedule:
    """Тесты разбиений времени."""

    def test_uniform(self):
        """Тест равномерного разбиения."""
        schedule = PartitionSchedule.uniform(2 * math.pi, 1.0)
        assert schedule.legs == 7
        assert schedule.span == pytest.approx(2 * math.pi)
        assert np.all(schedule.durations <= 1.0)

    @pytest.mark.parametrize(
        "times",
        [[0.5, 1.0], [0.0, 1.0, 1.0], [0.0, 2.0]],
    )
    def test_invalid_schedules(self, times):
        """Тест отклонения неверных разбиений."""
        with pytest.raises(BadParameters):
            PartitionSchedule(times=np.array(times), gap_bound=1.0)

    def test_shift_and_repeat(self):
        """Тест сдвига и повторения."""
        schedule = PartitionSchedule(times=np.array([0.0, 0.5, 1.5, 2.0]), gap_bound=1.0)
        np.testing.assert_allclose(schedule.shifted(1).durations, [1.0, 0.5, 0.5])
        repeated = schedule.repeated(3)
        assert repeated.legs == 9
        assert repeated.span == pytest.approx(6.0)


class TestChainProduct:
    """Тесты произведений по разбиению."""

    def test_hopf_period_product(self):
        """Тест: логарифм произведения за период равен -2 mu * период."""
        model = hopf(mu=0.5)
        schedule = PartitionSchedule.uniform(2 * math.pi, 1.0)
        chain = chain_product(model, CYCLE_POINT, schedule)
        rescaled = chain_product(model, CYCLE_POINT, schedule, rescaled=True)
        assert chain.log_product == pytest.approx(-2 * math.pi, rel=1e-6)
        np.testing.assert_allclose(chain.log_norms, -schedule.durations, rtol=1e-6)
        np.testing.assert_allclose(rescaled.leg_norms, chain.leg_norms, rtol=1e-6)
        assert chain.points.shape == (8, 2)
        np.testing.assert_allclose(chain.points[-1], CYCLE_POINT, atol=1e-8)


class TestSectionalMap:
    """Тесты секционного отображения."""

    def test_negative_time(self):
        """Тест ошибки для отрицательного времени."""
        with pytest.raises(BadParameters):
            sectional_map(hopf(), CYCLE_POINT, -1.0, CYCLE_POINT)

    def test_base_point_maps_to_orbit(self):
        """Тест: x переходит в phi_t(x)."""
        model = hopf()
        np.testing.assert_allclose(
            sectional_map(model, CYCLE_POINT, 1.3, CYCLE_POINT),
            flow_point(model, CYCLE_POINT, 1.3),
            atol=1e-12,
        )

    def test_point_off_disk(self):
        """Тест ошибки для точки вне нормального диска."""
        with pytest.raises(BadParameters):
            sectional_map(hopf(), CYCLE_POINT, 1.0, CYCLE_POINT + np.array([0.0, 0.05]))

    def test_image_lies_on_section(self):
        """Тест: образ лежит на нормальной гиперплоскости в phi_t(x)."""
        model = hopf()
        y = CYCLE_POINT + np.array([0.01, 0.0])
        image = sectional_map(model, CYCLE_POINT, 2.0, y)
        target = flow_point(model, CYCLE_POINT, 2.0)
        assert abs(np.dot(image - target, model.evaluate(target))) < 1e-8
        # радиальное возмущение затухает как exp(-2 mu t)
        assert np.linalg.norm(image - target) == pytest.approx(0.01 * math.exp(-2.0), rel=0.05)

    def test_rotation_quarter_turn(self):
        """Тест: вращение за четверть оборота переводит (1.1, 0) в (0, 1.1)."""
        image = sectional_map(rotation(), [1.0, 0.0], math.pi / 2, [1.1, 0.0])
        np.testing.assert_allclose(image, [0.0, 1.1], atol=1e-6)

    def test_crossing_at_window_end(self):
        """Тест: касание сечения в последней точке сетки поиска не теряется."""
        model = VectorFieldModel(
            name="shear",
            dim=2,
            evaluate_fn=lambda p: np.array([1.0 - p[1], 0.0]),
            jacobian_fn=lambda p: np.array([[0.0, -1.0], [0.0, 0.0]]),
        )
        # y идет со скоростью чуть меньше 1/4 и к s = 2t + 1 = 2 не доходит до сечения на 2e-12
        y = [0.0, 0.75 + 1e-12]
        image = sectional_map(model, [0.0, 0.0], 0.5, y, radius_check=1.0, domain_bound=1.0)
        np.testing.assert_allclose(image, [0.5, 0.75], atol=1e-9)

    def test_excursion_before_window_is_detected(self):
        """Тест: уход орбиты y до начала окна поиска фиксируется как LeftDomain."""
        k = 12.0
        model = VectorFieldModel(
            name="bump",
            dim=2,
            evaluate_fn=lambda p: np.array([1.0, k * p[1] * (1.0 - 2.0 * p[0])]),
            jacobian_fn=lambda p: np.array(
                [[0.0, 0.0], [-2.0 * k * p[1], k * (1.0 - 2.0 * p[0])]]
            ),
        )
        # x2(s) = 0.1 exp(k (s - s^2)): около 2 при s = 1/2, снова 0.1 при s = 1 = t/2
        with pytest.raises(LeftDomain):
            sectional_map(model, [0.0, 0.0], 2.0, [0.0, 0.1], radius_check=0.2, domain_bound=1.0)

    @pytest.mark.parametrize(
        "model, x, t",
        [
            (hopf(), CYCLE_POINT, 1.0),
            (linear(), np.array([1.0, 1.0]), 0.5),
        ],
    )
    def test_jacobian_matches_linear_poincare(self, model, x, t):
        """Тест: производная секционного отображения равна psi_t."""
        jacobian = sectional_map_jacobian(model, x, t)
        expected = linear_poincare(model, x, t).matrix
        np.testing.assert_allclose(jacobian, expected, atol=1e-4)


class TestShrinkProbe:
    """Тесты проверки сжатия дисков."""

    def test_hopf_disk_shrinks(self):
        """Тест сжатия диска на притягивающем цикле."""
        result = shrink_probe(hopf(), CYCLE_POINT, C=2.0, eta=0.5, T=1.0, r=0.05, horizon=8.0)
        assert result.contraction_verified
        assert result.shrinks
        assert result.failing_radius is None
        assert len(result.times) == 8
        assert np.all(np.diff(result.diameters) < 0)
        assert result.relative_diameters[-1] < 1e-2

    def test_saddle_disk_does_not_shrink(self):
        """Тест: при растягивающем нормальном направлении диск не сжимается."""
        model = linear(diagonal=(-1.0, 1.0))
        result = shrink_probe(model, [1.0, 0.0], C=2.0, eta=0.5, T=1.0, r=0.05, horizon=2.0)
        assert not result.shrinks
        assert not result.contraction_verified

    def test_bad_parameters(self):
        """Тест ошибки для горизонта короче T."""
        with pytest.raises(BadParameters):
            shrink_probe(hopf(), CYCLE_POINT, C=2.0, eta=0.5, T=1.0, r=0.05, horizon=0.5)
