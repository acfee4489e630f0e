"""测试重复测量方差分析与配对检验。"""

from __future__ import annotations

import numpy as np
import pytest
from scipy import stats

from eegrc.config.schema import default_channels
from eegrc.erp.stats import (
    MEASURES,
    bonferroni_pairwise,
    component_frame,
    component_table,
    greenhouse_geisser_epsilon,
    permutation_paired_test,
    rm_anova,
)
from eegrc.signal.recording import EpochMatrix, WordLabel
from eegrc.utils.errors import DataError, ParameterError
from eegrc.utils.types import Region, SentenceRelevance, WordType


def _lstsq_f(values: np.ndarray) -> float:
    """用线性模型比较（被试 + 条件 vs 仅被试）计算 F。"""
    n, k = values.shape
    y = values.reshape(-1)
    subj = np.kron(np.eye(n), np.ones((k, 1)))
    cond = np.kron(np.ones((n, 1)), np.eye(k))[:, 1:]
    full = np.hstack([subj, cond])

    def _sse(x: np.ndarray) -> float:
        beta, *_ = np.linalg.lstsq(x, y, rcond=None)
        return float(np.sum((y - x @ beta) ** 2))

    sse_full, sse_reduced = _sse(full), _sse(subj)
    return ((sse_reduced - sse_full) / (k - 1)) / (sse_full / ((n - 1) * (k - 1)))


class TestRmAnova:
    """单因素重复测量方差分析测试。"""

    def test_matches_linear_model(self) -> None:
        """测试 F 与线性模型比较的结果一致，p 值来自 F 分布。"""
        rng = np.random.default_rng(0)
        values = rng.normal(size=(12, 3)) + np.array([0.0, 0.4, 1.0]) + rng.normal(size=(12, 1))
        result = rm_anova(values, ['a', 'b', 'c'], gg_threshold=0.0)
        assert result.f_value == pytest.approx(_lstsq_f(values), rel=1e-9)
        assert result.df == (2.0, 22.0)
        assert result.df_uncorrected == (2, 22)
        assert result.p_value == pytest.approx(stats.f.sf(result.f_value, 2, 22))
        assert not result.corrected
        np.testing.assert_allclose(result.condition_means, values.mean(axis=0))

    def test_identical_conditions(self) -> None:
        """测试各条件完全相同时 F 为 0、p 为 1。"""
        col = np.arange(5, dtype=float)[:, None]
        result = rm_anova(np.hstack([col, col, col]))
        assert result.f_value == 0.0
        assert result.p_value == 1.0
        assert all(p == 1.0 for p in result.pairwise.values())

    def test_additive_effect_without_error(self) -> None:
        """测试纯加性数据（误差为 0）时 F 为 inf、p 为 0。"""
        values = np.arange(4, dtype=float)[:, None] + np.array([0.0, 1.0, 3.0])
        result = rm_anova(values)
        assert np.isinf(result.f_value)
        assert result.p_value == 0.0

    def test_too_few_subjects(self) -> None:
        """测试只有一个被试时抛出参数错误。"""
        with pytest.raises(ParameterError, match='at least 2 subjects'):
            rm_anova(np.ones((1, 3)))

    def test_missing_cell(self) -> None:
        """测试存在缺失值时抛出数据错误。"""
        values = np.ones((4, 3))
        values[2, 1] = np.nan
        with pytest.raises(DataError, match='non-finite'):
            rm_anova(values)

    def test_condition_name_count(self) -> None:
        """测试列名数量不符时抛出参数错误。"""
        with pytest.raises(ParameterError, match='condition names'):
            rm_anova(np.ones((4, 3)), ['a', 'b'])


class TestGreenhouseGeisser:
    """Greenhouse-Geisser 校正测试。"""

    def test_degenerate_covariance(self) -> None:
        """测试条件间差值几乎无方差时 epsilon 取 1。"""
        rng = np.random.default_rng(1)
        subject = rng.normal(size=(200, 1))
        values = subject + rng.normal(size=(200, 3)) * 1e-9
        assert greenhouse_geisser_epsilon(values) == pytest.approx(1.0)

    def test_non_spherical_data(self) -> None:
        """测试某一条件方差远大于其他条件时 epsilon 降低并触发校正。"""
        rng = np.random.default_rng(2)
        values = rng.normal(size=(30, 3)) * np.array([1.0, 1.0, 20.0])
        eps = greenhouse_geisser_epsilon(values)
        assert 0.5 <= eps < 0.95
        result = rm_anova(values)
        assert result.corrected
        assert result.df == pytest.approx((2 * eps, 58 * eps))
        assert result.p_value == pytest.approx(stats.f.sf(result.f_value, 2 * eps, 58 * eps))
        assert result.p_uncorrected == pytest.approx(stats.f.sf(result.f_value, 2, 58))


class TestBonferroni:
    """Bonferroni 事后检验测试。"""

    def test_three_pairs_scaled(self) -> None:
        """测试三对比较的 p 值乘以 3 并截断到 1。"""
        rng = np.random.default_rng(3)
        values = rng.normal(size=(15, 3)) + np.array([0.0, 0.3, 1.5])
        adjusted = bonferroni_pairwise(values, ['x', 'y', 'z'])
        assert list(adjusted) == ['x vs y', 'x vs z', 'y vs z']
        raw = stats.ttest_rel(values[:, 0], values[:, 2]).pvalue
        assert adjusted['x vs z'] == pytest.approx(min(1.0, 3 * raw))
        assert all(0.0 <= p <= 1.0 for p in adjusted.values())


class TestPermutation:
    """符号翻转置换检验测试。"""

    def test_identical_samples(self) -> None:
        """测试两组完全相同时 p 为 1。"""
        assert permutation_paired_test([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 1.0

    def test_consistent_difference(self) -> None:
        """测试 10 个被试的一致差异得到很小的 p 值。"""
        rng = np.random.default_rng(4)
        a = rng.normal(size=10)
        b = a - 1.0 - rng.uniform(0.0, 0.2, size=10)
        p = permutation_paired_test(a, b, n_permutations=5000)
        assert p < 0.01

    def test_deterministic_for_seed(self) -> None:
        """测试相同种子给出相同 p 值，p 值形如 (1 + c) / (1 + B)。"""
        rng = np.random.default_rng(5)
        a, b = rng.normal(size=8), rng.normal(size=8)
        p1 = permutation_paired_test(a, b, n_permutations=999, seed=7)
        p2 = permutation_paired_test(a, b, n_permutations=999, seed=7)
        assert p1 == p2
        assert (p1 * 1000) == pytest.approx(round(p1 * 1000))

    def test_invalid_arguments(self) -> None:
        """测试置换次数不足或长度不符时抛出参数错误。"""
        with pytest.raises(ParameterError, match='>= 100'):
            permutation_paired_test([1.0, 2.0], [0.0, 1.0], n_permutations=50)
        with pytest.raises(ParameterError, match='equal length'):
            permutation_paired_test([1.0, 2.0, 3.0], [0.0, 1.0])


class TestNullCalibration:
    """无效应数据上的第一类错误率测试。"""

    DRAWS = 1000

    def test_anova_degrees_of_freedom(self) -> None:
        """测试 21 名被试、3 个条件时未校正自由度为 (2, 40)，校正自由度按 epsilon 缩放。"""
        result = rm_anova(np.random.default_rng(0).normal(size=(21, 3)))
        assert result.df_uncorrected == (2, 40)
        scale = result.gg_epsilon if result.corrected else 1.0
        assert result.df == pytest.approx((2 * scale, 40 * scale))

    @pytest.mark.timeout(120)
    def test_anova_false_positive_rate(self) -> None:
        """测试 i.i.d. 数据上 p < 0.05 的比例落在 [0.03, 0.07]。"""
        rng = np.random.default_rng(2024)
        hits = sum(rm_anova(rng.normal(size=(21, 3))).p_value < 0.05 for _ in range(self.DRAWS))
        assert 0.03 <= hits / self.DRAWS <= 0.07

    @pytest.mark.timeout(120)
    def test_permutation_false_positive_rate(self) -> None:
        """测试两组 i.i.d. 配对样本上置换检验 p < 0.05 的比例落在 [0.03, 0.07]。"""
        rng = np.random.default_rng(2025)
        hits = sum(
            permutation_paired_test(rng.normal(size=21), rng.normal(size=21), n_permutations=1000, seed=i) < 0.05
            for i in range(self.DRAWS)
        )
        assert 0.03 <= hits / self.DRAWS <= 0.07


def _constant_epochs() -> list[EpochMatrix]:
    channels = tuple(default_channels())
    epochs = []
    for p in range(3):
        for j, wt in enumerate((WordType.ANSWER, WordType.SEMANTIC_RELATED, WordType.ORDINARY)):
            relevance = SentenceRelevance.PERFECTLY_RELEVANT if wt is WordType.ANSWER else SentenceRelevance.RELEVANT
            epochs.append(
                EpochMatrix(
                    data=np.full((len(channels), 475), float(p + 2 * j)),
                    rate_hz=500.0,
                    t0_ms=-200.0,
                    channel_names=channels,
                    label=WordLabel(
                        word_type=wt,
                        sentence_relevance=relevance,
                        trial_id=j + 1,
                        word_index=0,
                        participant_id=f'p{p + 1:02d}',
                    ),
                )
            )
    return epochs


class TestComponentTable:
    """脑区 × 成分检验表测试。"""

    def test_table_and_frame(self) -> None:
        """测试每个脑区三种测量各一行，表格列完整。"""
        tests = component_table(_constant_epochs(), regions=[Region.CENTRAL, Region.PARIETAL])
        assert [(t.region, t.measure) for t in tests] == [
            (r, m) for r in (Region.CENTRAL, Region.PARIETAL) for m in MEASURES
        ]
        by_measure = {t.measure: t.anova for t in tests if t.region is Region.CENTRAL}
        # 常数波形没有 N100-P200 变化
        assert by_measure['n100_p200'].f_value == 0.0
        assert np.isinf(by_measure['n400'].f_value)
        assert by_measure['n400'].condition_means == (1.0, 3.0, 5.0)
        frame = component_frame(tests)
        assert len(frame) == 6
        assert {'f_value', 'p_value', 'gg_epsilon', 'mean.answer', 'bonferroni.answer vs ordinary'} <= set(
            frame.columns
        )
