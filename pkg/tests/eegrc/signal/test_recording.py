"""测试会话与 epoch 数据模型。"""

from __future__ import annotations

import numpy as np
import pytest
from pydantic import ValidationError

from eegrc.signal.recording import EpochMatrix, SessionRecording, TriggerCode, TriggerEvent, WordLabel
from eegrc.utils.errors import DataError
from eegrc.utils.types import SentenceRelevance, WordType


class TestWordLabel:
    """词标签测试。"""

    def test_question_defaults_to_trial(self) -> None:
        """测试缺省 question_id 等于 trial_id。"""
        lab = WordLabel(
            word_type=WordType.ORDINARY,
            sentence_relevance=SentenceRelevance.RELEVANT,
            trial_id=7,
            word_index=2,
            participant_id='p03',
        )
        assert lab.question_id == 7
        assert lab.key == ('p03', 7, 2)

    def test_answer_only_in_perfect_sentence(self) -> None:
        """测试答案词出现在非完全相关句子时抛出异常。"""
        with pytest.raises(ValueError, match='answer word 1/0'):
            WordLabel(
                word_type=WordType.ANSWER,
                sentence_relevance=SentenceRelevance.RELEVANT,
                trial_id=1,
                word_index=0,
                participant_id='p01',
            )


class TestSessionRecording:
    """会话记录测试。"""

    def test_word_trigger_needs_index(self) -> None:
        """测试词呈现触发缺少词序号时抛出异常。"""
        with pytest.raises(ValueError, match='has no word_index'):
            TriggerEvent(sample_index=5, code=TriggerCode.WORD_ONSET, trial_id=1)

    def test_trigger_beyond_end(self) -> None:
        """测试触发位于记录之外时抛出异常。"""
        with pytest.raises(ValueError, match='beyond recording length'):
            SessionRecording(
                data=np.zeros((2, 10)),
                rate_hz=100.0,
                channel_names=('A1', 'A2'),
                triggers=(TriggerEvent(sample_index=10, code=TriggerCode.FIXATION, trial_id=1),),
                participant_id='p01',
            )

    def test_non_finite_rejected(self) -> None:
        """测试含 NaN 的数据被拒绝。"""
        data = np.zeros((2, 10))
        data[0, 3] = np.nan
        with pytest.raises(DataError, match='non-finite'):
            SessionRecording(data=data, rate_hz=100.0, channel_names=('A1', 'A2'), participant_id='p01')

    def test_other_violations_stay_validation_errors(self) -> None:
        """测试非数组字段的错误仍以 ValidationError 报告。"""
        with pytest.raises(ValidationError, match='channel names'):
            SessionRecording(data=np.zeros((2, 10)), rate_hz=100.0, channel_names=('A1',), participant_id='p01')

    def test_data_is_read_only(self) -> None:
        """测试记录数据不可原地修改。"""
        rec = SessionRecording(data=np.zeros((2, 10)), rate_hz=100.0, channel_names=('A1', 'A2'), participant_id='p01')
        with pytest.raises(ValueError, match='read-only'):
            rec.data[0, 0] = 1.0


class TestEpochMatrix:
    """epoch 测试。"""

    def test_times_and_rows(self) -> None:
        """测试时间轴与电极行号。"""
        e = EpochMatrix(
            data=np.zeros((3, 5)),
            rate_hz=500.0,
            t0_ms=-4.0,
            channel_names=('Cz', 'Pz', 'Oz'),
            label=WordLabel(
                word_type=WordType.ORDINARY,
                sentence_relevance=SentenceRelevance.IRRELEVANT,
                trial_id=1,
                word_index=0,
                participant_id='p01',
            ),
        )
        np.testing.assert_allclose(e.times_ms, [-4.0, -2.0, 0.0, 2.0, 4.0])
        assert e.end_ms == 6.0
        np.testing.assert_array_equal(e.channel_rows(['Oz', 'Cz']), [2, 0])
        with pytest.raises(KeyError, match='Fz'):
            e.channel_rows(['Fz'])

    def test_infinite_sample_is_data_error(self) -> None:
        """测试含无穷值的 epoch 抛出数据错误。"""
        data = np.zeros((1, 4))
        data[0, 2] = np.inf
        label = WordLabel(
            word_type=WordType.ORDINARY,
            sentence_relevance=SentenceRelevance.IRRELEVANT,
            trial_id=1,
            word_index=0,
            participant_id='p01',
        )
        with pytest.raises(DataError, match='non-finite'):
            EpochMatrix(data=data, rate_hz=500.0, t0_ms=0.0, channel_names=('Cz',), label=label)
