"""测试 CVOT 与 LOPO 划分。"""

from __future__ import annotations

from typing import TYPE_CHECKING

import pytest

from eegrc.eval.splits import (
    Fold,
    SplitPlan,
    check_disjoint,
    holdout_questions,
    select_units,
    split_cvot,
    split_lopo,
)
from eegrc.signal.recording import WordLabel
from eegrc.utils.errors import LeakageError, ParameterError
from eegrc.utils.types import Scheme, SentenceRelevance, WordType


if TYPE_CHECKING:
    from pathlib import Path


class TestCvot:
    """按问题划分测试。"""

    def test_even_folds(self) -> None:
        """测试 150 个问题分成 10 折、每折 15 个。"""
        plan = split_cvot(range(1, 151), k=10, seed=0)
        assert plan.scheme is Scheme.CVOT
        assert [len(f.validation) for f in plan.folds] == [15] * 10
        assert all(len(f.train) == 135 for f in plan.folds)

    def test_uneven_folds(self) -> None:
        """测试 155 个问题分成 5 折 16 个与 5 折 15 个，并覆盖全部问题。"""
        plan = split_cvot(range(1, 156), k=10, seed=1)
        sizes = sorted(len(f.validation) for f in plan.folds)
        assert sizes == [15] * 5 + [16] * 5
        assert set().union(*(f.validation for f in plan.folds)) == {str(i) for i in range(1, 156)}

    def test_question_moves_as_unit(self) -> None:
        """测试重复出现的问题标识只属于一折。"""
        ids = [q for q in range(1, 21) for _ in range(3)]
        plan = split_cvot(ids, k=4, seed=2)
        assert sum(len(f.validation) for f in plan.folds) == 20

    def test_seeded(self) -> None:
        """测试相同种子给出相同划分，不同种子不同。"""
        assert split_cvot(range(30), 5, 3) == split_cvot(range(30), 5, 3)
        assert split_cvot(range(30), 5, 3) != split_cvot(range(30), 5, 4)

    def test_numeric_order(self) -> None:
        """测试数字标识按数值排序。"""
        plan = split_cvot([10, 2, 1], k=3, seed=0)
        assert sorted(plan.folds[0].train + plan.folds[0].validation, key=int) == ['1', '2', '10']
        assert list(plan.folds[0].train) == sorted(plan.folds[0].train, key=int)

    def test_too_few_questions(self) -> None:
        """测试问题少于折数或折数小于 2 时抛出参数错误。"""
        with pytest.raises(ParameterError, match='cannot fill 10 folds'):
            split_cvot(range(5), k=10)
        with pytest.raises(ParameterError, match='at least 2 folds'):
            split_cvot(range(5), k=1)


class TestLopo:
    """留一被试测试。"""

    def test_one_fold_per_participant(self) -> None:
        """测试每个被试恰好作为一次验证集。"""
        plan = split_lopo(['p02', 'p01', 'p03', 'p01'])
        assert [f.validation for f in plan.folds] == [('p01',), ('p02',), ('p03',)]
        assert plan.folds[1].train == ('p01', 'p03')
        assert plan.unit == 'participant_id'

    def test_single_participant(self) -> None:
        """测试只有一个被试时抛出参数错误。"""
        with pytest.raises(ParameterError, match='at least 2 participants'):
            split_lopo(['p01', 'p01'])


class TestPlan:
    """划分方案测试。"""

    def test_overlap_rejected(self) -> None:
        """测试训练与验证重叠的折被拒绝。"""
        with pytest.raises(ValueError, match='both train and validation'):
            SplitPlan(scheme=Scheme.CVOT, folds=(Fold(train=('1', '2'), validation=('2',)),))

    def test_repeated_validation_rejected(self) -> None:
        """测试两折验证同一单元时被拒绝。"""
        folds = (Fold(train=('2',), validation=('1',)), Fold(train=('2',), validation=('1',)))
        with pytest.raises(ValueError, match='already validated'):
            SplitPlan(scheme=Scheme.CVOT, folds=folds)

    def test_json_round_trip(self, tmp_path: Path) -> None:
        """测试保存为 JSON 后读回相同。"""
        plan = split_cvot(range(12), 3, seed=5)
        assert SplitPlan.load(plan.save(tmp_path / 'split.json')) == plan


class TestHelpers:
    """划分辅助函数测试。"""

    def test_check_disjoint(self) -> None:
        """测试训练与验证单元相交时抛出泄漏错误。"""
        check_disjoint(['1', '2'], ['3'])
        with pytest.raises(LeakageError, match="question_id \\['2'\\]"):
            check_disjoint([1, 2], ['2'], 'question_id')

    def test_select_units_keeps_order(self) -> None:
        """测试按单元挑选样本并保持原顺序。"""
        labels = [
            WordLabel(
                word_type=WordType.ORDINARY,
                sentence_relevance=SentenceRelevance.IRRELEVANT,
                trial_id=t,
                word_index=0,
                participant_id=pid,
            )
            for pid, t in (('p02', 3), ('p01', 1), ('p02', 1))
        ]
        picked = select_units(labels, ['p02'], 'participant_id')
        assert [lab.trial_id for lab in picked] == [3, 1]

    def test_holdout(self) -> None:
        """测试内部留出比例、确定性与边界情况。"""
        kept, held = holdout_questions(range(20), 0.1, seed=1)
        assert len(held) == 2
        assert len(kept) == 18
        assert (kept, held) == holdout_questions(range(20), 0.1, seed=1)
        kept, held = holdout_questions([1, 2], 0.9)
        assert (len(kept), len(held)) == (1, 1)
        with pytest.raises(ParameterError, match='at least 2 questions'):
            holdout_questions([1, 1], 0.5)
