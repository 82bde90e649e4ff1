"""
Модульные тесты для выбора точек по хвостовым суммам.
"""

import math

import numpy as np
import pytest

from dynamics.tools.pliss import (
    WeightSequence,
    adversarial_search,
    find_tail_offset,
    is_contracted,
    pliss_bound,
    pliss_point,
    tail_violation,
)
from src.utils.error_handler import BadParameters, NoPlissPoint


def premise_sequence(rng, C, lambda1, length):
    """Случайная последовательность с частичными суммами не выше C + n*lambda1."""
    values = np.empty(length)
    total = 0.0
    for i in range(length):
        cap = C + (i + 1) * lambda1 - total
        values[i] = min(rng.normal(lambda1, 1.5), cap)
        total += values[i]
    return values


class TestWeightSequence:
    """Тесты последовательности весов."""

    def test_default_durations(self):
        """Тест длительностей по умолчанию."""
        seq = WeightSequence(values=[-1.0, 0.5])
        np.testing.assert_array_equal(seq.leg_durations, [1.0, 1.0])
        assert len(seq) == 2

    def test_mismatched_lengths(self):
        """Тест ошибки при разной длине."""
        with pytest.raises(BadParameters):
            WeightSequence(values=[1.0, 2.0], leg_durations=[1.0])

    def test_duration_over_gap_bound(self):
        """Тест ошибки при длительности больше T."""
        with pytest.raises(BadParameters):
            WeightSequence(values=[1.0], leg_durations=[2.0], gap_bound=1.0)


class TestBound:
    """Тесты оценки длины смещения."""

    @pytest.mark.parametrize(
        "C, lambda1, lambda2, expected",
        [(1.0, 0.1, 0.2, 11), (2.5, 0.3, 0.8, 6), (0.0, 0.1, 0.2, 1), (2.0, -0.5, -0.2, 7)],
    )
    def test_values(self, C, lambda1, lambda2, expected):
        """Тест значений оценки."""
        n = pliss_bound(C, lambda1, lambda2)
        assert n == expected
        assert C + n * lambda1 < n * lambda2
        assert n == 1 or not C + (n - 1) * lambda1 < (n - 1) * lambda2

    def test_invalid(self):
        """Тест неверных параметров."""
        with pytest.raises(BadParameters):
            pliss_bound(-1.0, 0.1, 0.2)
        with pytest.raises(BadParameters):
            pliss_bound(1.0, 0.2, 0.2)


class TestTailOffset:
    """Тесты поиска смещения хвоста."""

    def test_single_large_weight(self):
        """Тест: после первого большого веса все хвосты отрицательны."""
        selection = find_tail_offset([5.0] + [-1.0] * 9, 0.0)
        assert selection is not None
        assert selection.L == 1
        assert selection.verified_upto == 9

    def test_no_offset(self):
        """Тест: растущий хвост не дает смещения."""
        assert find_tail_offset([-1.0, -1.0, 3.0], 0.0) is None
        assert find_tail_offset([], 0.0) is None

    def test_random_sequences_respect_bound(self):
        """Тест: для последовательностей с посылкой смещение не больше оценки."""
        rng = np.random.default_rng(11)
        C, lambda1, lambda2 = 2.0, -0.5, -0.2
        bound = pliss_bound(C, lambda1, lambda2)
        for _ in range(300):
            a = premise_sequence(rng, C, lambda1, 60)
            selection = find_tail_offset(a, lambda2)
            assert selection is not None
            assert selection.L <= bound
            tails = np.cumsum(a[selection.L :] - lambda2)
            assert tails.max() <= 1e-8


class TestContraction:
    """Тесты проверки сжатия префиксов."""

    def test_contracted(self):
        """Тест сжатой последовательности."""
        assert tail_violation([-1.0, -1.0, -1.0], 1.0, 0.5) == pytest.approx(-0.5)
        assert is_contracted([-1.0, -1.0, -1.0], 1.0, 0.5)

    def test_not_contracted(self):
        """Тест нарушения сжатия."""
        assert not is_contracted([0.2, -1.0], 1.0, 0.5)
        assert tail_violation([0.2, -1.0], 1.0, 0.5) == pytest.approx(0.7)

    def test_durations_and_constant(self):
        """Тест учета длительностей и константы C."""
        assert tail_violation([-0.5], math.e, 1.0, durations=[0.5]) == pytest.approx(-1.0)

    def test_empty_and_invalid(self):
        """Тест пустой последовательности и C <= 0."""
        assert tail_violation([], 1.0, 0.5) == -math.inf
        with pytest.raises(BadParameters):
            tail_violation([-1.0], 0.0, 0.5)


class TestPlissPoint:
    """Тесты выбора начальных индексов."""

    def test_alternating_sequence(self):
        """Тест чередующейся последовательности."""
        seq = WeightSequence(values=[-2.0, 1.0] * 4)
        assert pliss_point(seq, 0.4) == [0, 2, 4, 6]

    def test_average_too_large(self):
        """Тест: среднее не ниже -eta."""
        with pytest.raises(NoPlissPoint):
            pliss_point(WeightSequence(values=[-2.0, 1.0] * 4), 0.6)

    def test_weighted_by_durations(self):
        """Тест учета длительностей в среднем."""
        seq = WeightSequence(values=[-1.0, -1.0], leg_durations=[0.5, 1.5])
        assert pliss_point(seq, 0.9) == [0]
        with pytest.raises(NoPlissPoint):
            pliss_point(seq, 1.0)


class TestAdversarialSearch:
    """Тесты исчерпывающего поиска худшего смещения."""

    def test_worst_offset(self):
        """Тест худшего смещения на решетке."""
        result = adversarial_search(1.0, 0.1, 0.2, length=30, grid=0.05)
        assert result.bound == 11
        assert result.worst_L == 9
        assert result.worst_L < result.bound
        assert not result.partial
        assert result.witness is not None
        assert find_tail_offset(result.witness, 0.2).L == result.worst_L

    def test_zero_constant(self):
        """Тест: при C = 0 смещение нулевое."""
        result = adversarial_search(0.0, 0.1, 0.2, length=10, grid=0.05)
        assert result.worst_L == 0
        assert result.bound == 1

    def test_invalid(self):
        """Тест неверных параметров поиска."""
        with pytest.raises(BadParameters):
            adversarial_search(1.0, 0.1, 0.2, length=10, grid=0.0)
