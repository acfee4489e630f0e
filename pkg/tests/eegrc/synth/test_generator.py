"""测试合成会话生成。"""

from __future__ import annotations

from collections import defaultdict
from typing import TYPE_CHECKING

import numpy as np
import pytest

from eegrc.config.schema import (
    ComponentAmplitudes,
    EffectSpec,
    RoiMap,
    SynthConfig,
    TimeWindows,
    default_channels,
)
from eegrc.signal.io import read_session
from eegrc.signal.recording import TriggerCode
from eegrc.synth.generator import (
    ARTIFACT_LATENCY_MS,
    ARTIFACT_WIDTH_MS,
    TRUTH,
    biphasic_spike,
    channel_gains,
    component_template,
    generate_cohort,
    generate_session,
    participant_gains,
    pink_noise,
    read_truth,
    write_cohort,
)
from eegrc.utils.errors import DataError, ParameterError
from eegrc.utils.types import SentenceRelevance, WordType


if TYPE_CHECKING:
    from pathlib import Path


def _quiet() -> SynthConfig:
    return SynthConfig(effects=EffectSpec(noise_uv=0.0, common_mode_uv=0.0, dc_offset_uv=0.0))


class TestTemplates:
    """波形模板测试。"""

    def test_component_peaks_at_window_centers(self) -> None:
        """测试单个成分在时间窗中点取到峰值。"""
        times = np.arange(1000, dtype=float)
        wave = component_template(times, ComponentAmplitudes(p600=4.0))
        start, end = TimeWindows().p600
        assert times[np.argmax(wave)] == pytest.approx((start + end) / 2.0, abs=1.0)
        assert wave.max() == pytest.approx(4.0, rel=1e-3)

    def test_silent_template(self) -> None:
        """测试全零幅度得到全零模板。"""
        wave = component_template(np.arange(1000, dtype=float), ComponentAmplitudes())
        np.testing.assert_array_equal(wave, 0.0)

    def test_biphasic_spike_extremes(self) -> None:
        """测试伪迹在潜伏期两侧各一个宽度处取到 ±幅度。"""
        times = np.arange(1000, dtype=float)
        spike = biphasic_spike(times, 200.0)
        assert spike.max() == pytest.approx(200.0, rel=1e-3)
        assert spike.min() == pytest.approx(-200.0, rel=1e-3)
        assert times[np.argmax(spike)] == ARTIFACT_LATENCY_MS + ARTIFACT_WIDTH_MS
        assert times[np.argmin(spike)] == ARTIFACT_LATENCY_MS - ARTIFACT_WIDTH_MS

    def test_pink_noise_unit_std(self) -> None:
        """测试 1/f 噪声每通道零均值、单位标准差。"""
        noise = pink_noise(4, 4096, np.random.default_rng(0))
        assert noise.shape == (4, 4096)
        np.testing.assert_allclose(noise.std(axis=1), 1.0)
        np.testing.assert_allclose(noise.mean(axis=1), 0.0, atol=1e-9)

    def test_pink_noise_low_frequency_dominant(self) -> None:
        """测试低频功率高于高频功率。"""
        noise = pink_noise(1, 8192, np.random.default_rng(1))[0]
        power = np.abs(np.fft.rfft(noise)) ** 2
        assert power[1:100].mean() > 10 * power[-1000:].mean()


class TestChannelGains:
    """地形增益测试。"""

    def test_mastoids_and_regions(self) -> None:
        """测试乳突增益为 0，中央区取脑区增益。"""
        channels = default_channels()
        gains = channel_gains(channels, EffectSpec(), RoiMap.default())
        assert gains[channels.index('A1')] == 0.0
        assert gains[channels.index('A2')] == 0.0
        assert gains[channels.index('Cz')] == 1.0
        assert gains[channels.index('Oz')] == pytest.approx(0.4)


class TestGenerateSession:
    """单次会话生成测试。"""

    def test_silent_spec_is_flat(self) -> None:
        """测试无效应、无噪声时记录全为 0。"""
        rec, truth = generate_session(3, SynthConfig(effects=EffectSpec.silent()), seed=1)
        np.testing.assert_array_equal(rec.data, 0.0)
        assert not truth.artifact_keys

    def test_same_seed_same_session(self) -> None:
        """测试相同种子给出相同记录与真值。"""
        a, ta = generate_session(4, seed=3)
        b, tb = generate_session(4, seed=3)
        c, _ = generate_session(4, seed=4)
        np.testing.assert_array_equal(a.data, b.data)
        assert ta == tb
        assert a.triggers == b.triggers
        assert not np.array_equal(a.data[:, :1000], c.data[:, :1000])

    def test_trial_structure(self) -> None:
        """测试每个试次依次有问题、注视点与词触发，词标注与触发一一对应。"""
        rec, truth = generate_session(5, seed=2)
        codes = [t.code for t in rec.triggers if t.trial_id == 1]
        assert codes[:2] == [TriggerCode.QUESTION_ONSET, TriggerCode.FIXATION]
        assert set(codes[2:]) == {TriggerCode.WORD_ONSET}
        words = [t for t in rec.triggers if t.code is TriggerCode.WORD_ONSET]
        assert len(words) == len(rec.labels) == len(truth.words)
        assert all(4 <= len([w for w in words if w.trial_id == tid]) <= 8 for tid in range(1, 6))

    def test_one_answer_sentence_per_question(self) -> None:
        """测试每个问题恰有一句完全相关的句子，答案词只出现在该句中。"""
        rec, _ = generate_session(9, seed=5)
        sentences: dict[int, set[tuple[int, SentenceRelevance]]] = defaultdict(set)
        for label in rec.labels:
            sentences[label.question_id].add((label.trial_id, label.sentence_relevance))
            if label.word_type is WordType.ANSWER:
                assert label.sentence_relevance is SentenceRelevance.PERFECTLY_RELEVANT
        assert sorted(sentences) == [1, 2, 3]
        for members in sentences.values():
            assert sum(r is SentenceRelevance.PERFECTLY_RELEVANT for _, r in members) == 1
        answers = {label.trial_id for label in rec.labels if label.word_type is WordType.ANSWER}
        relevant = {label.trial_id for label in rec.labels if label.sentence_relevance is SentenceRelevance.PERFECTLY_RELEVANT}
        assert answers == relevant

    def test_injected_waveform_without_noise(self) -> None:
        """测试无噪声时词 epoch 在中央电极上等于成分模板乘以增益。"""
        rec, truth = generate_session(2, _quiet(), seed=6, gain=1.5)
        word = truth.words[0]
        cz = rec.channel_index('Cz')
        times = np.arange(1000, dtype=float)
        expected = 1.5 * component_template(times, EffectSpec().components[word.word_type])
        np.testing.assert_allclose(rec.data[cz, word.onset_sample : word.onset_sample + 1000], expected)
        np.testing.assert_array_equal(rec.data[rec.channel_index('A1')], 0.0)
        assert word.p200 == pytest.approx(1.5 * EffectSpec().components[word.word_type].p200)

    def test_artifacts_recorded_in_truth(self) -> None:
        """测试伪迹率为 1 时每个词都注入伪迹，且只落在头皮电极上。"""
        cfg = SynthConfig(
            effects=EffectSpec.silent().model_copy(update={'artifact_rate': 1.0, 'artifact_uv': 150.0})
        )
        rec, truth = generate_session(2, cfg, seed=7)
        assert len(truth.artifact_keys) == len(truth.words)
        word = truth.words[0]
        peak = word.onset_sample + int(ARTIFACT_LATENCY_MS + ARTIFACT_WIDTH_MS)
        assert rec.data[rec.channel_index('Cz'), peak] == pytest.approx(150.0)
        assert rec.data[rec.channel_index('A2'), peak] == 0.0

    def test_invalid_arguments(self) -> None:
        """测试试次数不足或增益为负时抛出参数错误。"""
        with pytest.raises(ParameterError, match='n_trials'):
            generate_session(0)
        with pytest.raises(ParameterError, match='non-negative'):
            generate_session(2, gain=-0.5)


class TestTruth:
    """真值表测试。"""

    def test_write_and_read(self, tmp_path: Path) -> None:
        """测试真值写出后读回一致。"""
        _, truth = generate_session(3, seed=8, participant_id='p07', gain=1.2)
        path = truth.write(tmp_path)
        assert path.name == TRUTH
        loaded = read_truth(tmp_path, seed=8, gain=1.2)
        assert loaded.participant_id == 'p07'
        assert len(loaded.words) == len(truth.words)
        assert loaded.words[0].word_type is truth.words[0].word_type
        assert loaded.words[0].n400 == pytest.approx(truth.words[0].n400)

    def test_frame_columns(self) -> None:
        """测试真值表每词一行。"""
        _, truth = generate_session(2, seed=9)
        frame = truth.frame()
        assert len(frame) == len(truth.words)
        assert list(frame.columns[:2]) == ['participant_id', 'trial_id']

    def test_missing_truth(self, tmp_path: Path) -> None:
        """测试缺少真值文件时抛出数据错误。"""
        with pytest.raises(DataError, match='missing'):
            read_truth(tmp_path)


class TestCohort:
    """被试队列测试。"""

    def test_gains_without_jitter(self) -> None:
        """测试抖动为 0 时所有增益为 1。"""
        np.testing.assert_array_equal(participant_gains(5, 0.0, np.random.default_rng(0)), 1.0)

    def test_gains_floor(self) -> None:
        """测试增益下限为 0.1。"""
        assert participant_gains(200, 5.0, np.random.default_rng(0)).min() >= 0.1

    def test_ids_and_determinism(self) -> None:
        """测试被试编号补零且同一种子给出相同队列。"""
        a = generate_cohort(3, 2, seed=11)
        b = generate_cohort(3, 2, seed=11)
        assert [rec.participant_id for rec, _ in a] == ['p01', 'p02', 'p03']
        for (ra, ta), (rb, tb) in zip(a, b, strict=True):
            np.testing.assert_array_equal(ra.data, rb.data)
            assert ta.seed == tb.seed
        assert len({t.seed for _, t in a}) == 3

    def test_too_few_participants(self) -> None:
        """测试少于两名被试时抛出参数错误。"""
        with pytest.raises(ParameterError, match='at least 2 participants'):
            generate_cohort(1, 2)

    def test_write_cohort(self, tmp_path: Path) -> None:
        """测试每名被试一个会话目录，含真值表。"""
        sessions = generate_cohort(2, 2, config=_quiet(), seed=12)
        paths = write_cohort(sessions, tmp_path)
        assert [p.name for p in paths] == ['p01', 'p02']
        assert all((p / TRUTH).is_file() for p in paths)
        loaded = read_session(paths[0])
        np.testing.assert_allclose(loaded.data, sessions[0][0].data, atol=1e-3)
        assert loaded.labels == sessions[0][0].labels
