"""
Модульные тесты для моделей векторных полей.

Тестирует каталог моделей, якобианы и классификацию особых точек.
"""

import numpy as np
import pytest

from dynamics.tools.field import (
    VectorFieldModel,
    builtin_models,
    center_normal_form,
    check_jacobian,
    classify_singularity,
    degenerate_sink,
    get_model,
    hopf,
    lemma_model,
    linear,
    list_models,
    lorenz,
    register_model,
)
from src.utils.error_handler import ConfigError, NotASingularity


class TestCatalog:
    """Тесты каталога моделей."""

    def test_builtin_names(self):
        """Тест наличия встроенных моделей."""
        names = list_models()
        for name in ("linear_sink", "radial", "rotation", "hopf", "lorenz", "lemma_model", "degenerate_sink"):
            assert name in names

    def test_get_model_with_params(self):
        """Тест создания модели с параметрами."""
        model = get_model("hopf", mu=0.25)
        assert model.name == "hopf"
        assert model.params["mu"] == 0.25

    def test_unknown_model(self):
        """Тест ошибки для неизвестной модели."""
        with pytest.raises(ConfigError) as exc_info:
            get_model("duffing")
        assert exc_info.value.field_name == "model.name"

    def test_unknown_parameter(self):
        """Тест ошибки для неизвестного параметра модели."""
        with pytest.raises(ConfigError) as exc_info:
            get_model("hopf", nu=1.0)
        assert exc_info.value.field_name == "model.params"

    def test_hopf_rejects_nonpositive_mu(self):
        """Тест проверки параметра mu."""
        with pytest.raises(ConfigError):
            hopf(mu=0.0)

    def test_register_model(self):
        """Тест регистрации пользовательской модели."""
        register_model("scaled_sink", lambda: linear(diagonal=(-3.0, -4.0), name="scaled_sink"))
        model = get_model("scaled_sink")
        np.testing.assert_allclose(model.evaluate([1.0, 1.0]), [-3.0, -4.0])

    def test_every_builtin_has_singularity_zeros(self):
        """Тест: заявленные особые точки - нули поля."""
        for model in builtin_models():
            for sigma in model.singularities:
                assert model.speed(sigma) < 1e-12, model.name


class TestJacobian:
    """Тесты аналитических якобианов."""

    def test_builtin_jacobians_match_differences(self):
        """Тест совпадения якобиана с центральными разностями."""
        rng = np.random.default_rng(3)
        for model in builtin_models():
            points = 0.5 * rng.standard_normal((5, model.dim))
            assert check_jacobian(model, points) < 1e-6, model.name

    def test_complex_input_stays_complex(self):
        """Тест вычисления поля в комплексных точках."""
        model = lemma_model()
        value = model.evaluate(np.array([0.1 + 0.1j, 0.0, 0.0]))
        assert np.iscomplexobj(value)
        assert value[0] == pytest.approx((0.1 + 0.1j) + 0.3 * (0.1 + 0.1j) ** 2)

    def test_center_curve_is_invariant(self):
        """Тест: поле на центральной кривой касается ее."""
        model = center_normal_form(q=1.0, a_e=(-1.0,))
        for s in (-0.4, 0.1, 0.3):
            point = model.center_curve(s)
            np.testing.assert_allclose(point, [s, 0.0])
            value = model.evaluate(point)
            assert value[1] == 0.0
            assert value[0] == pytest.approx(s * s)


class TestClassification:
    """Тесты классификации особых точек."""

    def test_saddle(self):
        """Тест седла diag(1, -1): гиперболично и диссипативно (сумма ровно 0)."""
        result = classify_singularity(linear(), [0.0, 0.0])
        assert result.is_hyperbolic
        assert result.is_sectionally_dissipative
        np.testing.assert_allclose(result.eigenvalues.real, [1.0, -1.0])
        assert result.max_real_part == pytest.approx(1.0)

    def test_degenerate_sink(self):
        """Тест diag(0, -1, -2): не гиперболично, диссипативно."""
        result = classify_singularity(degenerate_sink(), np.zeros(3))
        assert not result.is_hyperbolic
        assert result.is_sectionally_dissipative

    def test_lorenz_origin(self):
        """Тест начала координат Лоренца."""
        model = lorenz()
        result = classify_singularity(model, np.zeros(3))
        expected_top = (-11.0 + np.sqrt(1201.0)) / 2.0
        assert result.max_real_part == pytest.approx(expected_top, rel=1e-9)
        assert result.is_hyperbolic
        assert not result.is_sectionally_dissipative
        assert np.all(np.diff(result.eigenvalues.real) <= 0)

    def test_lorenz_nontrivial_equilibria(self):
        """Тест ненулевых равновесий Лоренца: комплексная пара с положительной частью."""
        model = lorenz()
        for sigma in model.singularities[1:]:
            result = classify_singularity(model, sigma)
            assert result.is_hyperbolic
            assert not result.is_sectionally_dissipative
            assert abs(result.eigenvalues[0].imag) > 1.0

    def test_regular_point_rejected(self):
        """Тест ошибки для регулярной точки."""
        with pytest.raises(NotASingularity):
            classify_singularity(hopf(), [1.0, 0.0])

    def test_model_is_hashable_by_identity(self):
        """Тест: модели сравниваются по идентичности."""
        first = hopf()
        second = hopf()
        assert isinstance(first, VectorFieldModel)
        assert first != second
        assert len({first, second}) == 2
