"""测试合成队列上 UERCM 相对未训练基线的提升。"""

from __future__ import annotations

from typing import TYPE_CHECKING

import pytest

from eegrc.config.schema import EffectSpec, ModelConfig, SynthConfig
from eegrc.eval.evaluate import UercmScorer, evaluate
from eegrc.eval.splits import split_cvot, split_lopo
from eegrc.features.extract import word_feature_vector
from eegrc.model.data import build_sentence_samples
from eegrc.signal.preprocess import preprocess_session
from eegrc.synth.generator import generate_cohort
from eegrc.utils.types import Task


if TYPE_CHECKING:
    from eegrc.model.data import SentenceSample


def _strong_cohort() -> list[SentenceSample]:
    """2 名被试 × 150 个试次，成分幅度放大 4 倍，噪声 1 µV。"""
    effects = EffectSpec().scaled(4.0).model_copy(update={'noise_uv': 1.0})
    config = SynthConfig(rate_hz=500.0, question_ms=300.0, fixation_ms=300.0, soa_ms=800.0, effects=effects)
    vectors = [
        word_feature_vector(e)
        for rec, _ in generate_cohort(2, 150, config, seed=7)
        for e in preprocess_session(rec).kept
    ]
    return build_sentence_samples(vectors)


class TestUercmLearning:
    """端到端学习测试。"""

    @pytest.mark.slow
    @pytest.mark.timeout(600)
    def test_beats_untrained_under_cvot_and_lopo(self) -> None:
        """测试答案抽取 ΔAUC 与句子分类 ΔMAP 在 CVOT 与 LOPO 下都不低于 0.10。"""
        samples = _strong_cohort()
        assert len({s.participant_id for s in samples}) == 2
        scorer = UercmScorer(ModelConfig())
        plans = (split_cvot([s.question_id for s in samples], 10, seed=0), split_lopo([s.participant_id for s in samples]))
        for plan in plans:
            extraction = evaluate(scorer, samples, plan, Task.ANSWER_EXTRACTION, seed=1, draws=200)
            assert extraction.delta_auc >= 0.10, plan.scheme
            sentences = evaluate(scorer, samples, plan, Task.SENTENCE_CLASSIFICATION, seed=1, draws=200)
            assert sentences.delta_map is not None
            assert sentences.delta_map >= 0.10, plan.scheme
