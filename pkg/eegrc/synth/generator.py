"""带标注的合成 EEG 会话。

每个词的 epoch 由四个高斯成分模板（中心位于各成分时间窗中点，宽度为窗长的 1/4）
按词类型、脑区增益与被试增益缩放后叠加，再加上 1/f 噪声、共模参考漂移与通道直流偏置。
"""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from eegrc.config.schema import ComponentAmplitudes, RoiMap, SynthConfig, TimeWindows, default_channels
from eegrc.signal.io import write_csv, write_session
from eegrc.signal.recording import SessionRecording, TriggerCode, TriggerEvent, WordLabel
from eegrc.utils.errors import DataError, ParameterError
from eegrc.utils.types import ParticipantId, QuestionId, SentenceRelevance, TrialId, WordIndex, WordType


if TYPE_CHECKING:
    from collections.abc import Sequence

    from eegrc.config.schema import EffectSpec


TRUTH = 'truth.csv'

ARTIFACT_LATENCY_MS = 400.0
ARTIFACT_WIDTH_MS = 15.0


class InjectedWord(BaseModel):
    """一个词 epoch 中实际注入的内容。"""

    model_config = ConfigDict(frozen=True)

    trial_id: TrialId
    question_id: QuestionId
    word_index: WordIndex
    word_type: WordType
    sentence_relevance: SentenceRelevance
    onset_sample: int = Field(ge=0)
    """词呈现所在采样点。"""
    n100: float
    """注入的 N100 峰值（µV，已乘被试增益）。"""
    p200: float
    n400: float
    p600: float
    artifact: bool = False
    """是否注入了伪迹。"""


class SyntheticTruth(BaseModel):
    """一次合成会话的真值。"""

    model_config = ConfigDict(frozen=True)

    participant_id: ParticipantId
    seed: int
    gain: float
    """被试乘性增益。"""
    words: tuple[InjectedWord, ...]

    @property
    def artifact_keys(self) -> set[tuple[TrialId, WordIndex]]:
        """注入伪迹的词。

        Returns:
            (trial_id, word_index) 集合。
        """
        return {(w.trial_id, w.word_index) for w in self.words if w.artifact}

    def frame(self) -> pd.DataFrame:
        """每词一行的真值表。

        Returns:
            DataFrame。
        """
        rows = [{'participant_id': self.participant_id, **w.model_dump(mode='json')} for w in self.words]
        return pd.DataFrame(rows, columns=['participant_id', *InjectedWord.model_fields])

    def write(self, directory: str | Path) -> Path:
        """写 truth.csv。

        Args:
            directory: 会话目录。

        Returns:
            文件路径。
        """
        path = Path(directory) / TRUTH
        write_csv(path, self.frame())
        return path


def read_truth(directory: str | Path, seed: int = 0, gain: float = 1.0) -> SyntheticTruth:
    """读取会话目录中的 truth.csv。

    Args:
        directory: 会话目录。
        seed: 记录到结果中的种子（文件不保存种子）。
        gain: 记录到结果中的增益。

    Returns:
        SyntheticTruth。

    Raises:
        DataError: 文件缺失或为空时抛出。
    """
    path = Path(directory) / TRUTH
    if not path.is_file():
        raise DataError(f'missing {path}')
    frame = pd.read_csv(path, dtype={'participant_id': str})
    if frame.empty:
        raise DataError(f'{path} has no rows')
    words = tuple(InjectedWord.model_validate(row) for row in frame.drop(columns='participant_id').to_dict('records'))
    return SyntheticTruth(participant_id=str(frame['participant_id'].iloc[0]), seed=seed, gain=gain, words=words)


def component_template(
    times_ms: np.ndarray, amplitudes: ComponentAmplitudes, windows: TimeWindows | None = None
) -> np.ndarray:
    """四个高斯成分之和。

    Args:
        times_ms: 相对刺激的时间点。
        amplitudes: 成分峰值。
        windows: 成分时间窗，决定中心与宽度。

    Returns:
        与 times_ms 等长的波形（µV）。
    """
    win = windows or TimeWindows()
    out = np.zeros_like(times_ms, dtype=np.float64)
    for name, (start, end) in win.as_dict().items():
        center = (start + end) / 2.0
        sigma = (end - start) / 4.0
        out += getattr(amplitudes, name) * np.exp(-0.5 * ((times_ms - center) / sigma) ** 2)
    return out


def pink_noise(n_channels: int, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """单位标准差的 1/f 噪声：白噪声频谱按 1/√f 整形。

    Args:
        n_channels: 通道数。
        n_samples: 采样点数。
        rng: 随机数发生器。

    Returns:
        (n_channels, n_samples) 数组。
    """
    white = np.fft.rfft(rng.standard_normal((n_channels, n_samples)), axis=1)
    f = np.arange(white.shape[1], dtype=np.float64)
    shape = np.zeros_like(f)
    shape[1:] = 1.0 / np.sqrt(f[1:])
    noise = np.fft.irfft(white * shape, n=n_samples, axis=1)
    std = noise.std(axis=1, keepdims=True)
    return noise / np.where(std > 0, std, 1.0)


def biphasic_spike(times_ms: np.ndarray, amplitude_uv: float) -> np.ndarray:
    """高斯一阶导形状的双相伪迹，峰值 ±amplitude_uv。

    Args:
        times_ms: 相对刺激的时间点。
        amplitude_uv: 峰值幅度。

    Returns:
        波形。
    """
    z = (times_ms - ARTIFACT_LATENCY_MS) / ARTIFACT_WIDTH_MS
    return amplitude_uv * z * np.exp(0.5 - 0.5 * z**2)


def channel_gains(channels: Sequence[str], spec: EffectSpec, roi_map: RoiMap) -> np.ndarray:
    """每个通道的地形增益；同属多个脑区取最大，不属于任何脑区为 0。

    Args:
        channels: 通道名。
        spec: 效应规格。
        roi_map: 脑区划分。

    Returns:
        长度为通道数的增益。
    """
    gains = np.zeros(len(channels))
    index = {c: i for i, c in enumerate(channels)}
    for region, electrodes in roi_map.regions.items():
        g = spec.roi_gains.get(region, 0.0)
        for e in electrodes:
            if e in index:
                gains[index[e]] = max(gains[index[e]], g)
    return gains


def _sentence_design(
    n_trials: int, config: SynthConfig, rng: np.random.Generator
) -> list[tuple[QuestionId, SentenceRelevance, list[WordType]]]:
    spq = config.sentences_per_question
    others = [SentenceRelevance.RELEVANT, SentenceRelevance.IRRELEVANT]
    lo, hi = config.words_per_sentence
    design = []
    for q_start in range(0, n_trials, spq):
        k = min(spq, n_trials - q_start)
        roles = [SentenceRelevance.PERFECTLY_RELEVANT] + [others[i % 2] for i in range(spq - 1)]
        roles = roles[:k]
        for pick in rng.permutation(k):
            relevance = roles[pick]
            length = int(rng.integers(lo, hi + 1))
            types = [WordType.ORDINARY] * length
            slots = rng.permutation(length)
            if relevance is SentenceRelevance.PERFECTLY_RELEVANT:
                types[slots[0]] = WordType.ANSWER
                if length >= 3:
                    types[slots[1]] = WordType.SEMANTIC_RELATED
            elif relevance is SentenceRelevance.RELEVANT:
                for s in slots[: max(1, length // 3)]:
                    types[s] = WordType.SEMANTIC_RELATED
            design.append((q_start // spq + 1, relevance, types))
    return design


def generate_session(
    n_trials: int,
    config: SynthConfig | None = None,
    seed: int = 0,
    participant_id: ParticipantId = 'p01',
    gain: float = 1.0,
    roi_map: RoiMap | None = None,
    channels: Sequence[str] | None = None,
) -> tuple[SessionRecording, SyntheticTruth]:
    """生成一次带标注的连续记录。

    每个试次依次呈现问题、注视点和句子中的词；每个问题下恰有一句完全相关（含答案词）。

    Args:
        n_trials: 句子（试次）数。
        config: 试次设计与注入效应。
        seed: 随机种子；相同参数与种子给出相同记录。
        participant_id: 被试标识。
        gain: 被试乘性增益。
        roi_map: 脑区划分。
        channels: 通道名（需包含乳突电极）。

    Returns:
        (SessionRecording, SyntheticTruth)。

    Raises:
        ParameterError: n_trials < 1 或增益为负时抛出。
    """
    if n_trials < 1:
        raise ParameterError(f'n_trials must be at least 1, got {n_trials}')
    if gain < 0:
        raise ParameterError(f'participant gain must be non-negative, got {gain}')
    cfg = config or SynthConfig()
    spec = cfg.effects
    rois = roi_map or RoiMap.default()
    names = tuple(channels or default_channels())
    rng = np.random.default_rng(seed)
    per_ms = cfg.rate_hz / 1000.0

    design = _sentence_design(n_trials, cfg, rng)
    triggers: list[TriggerEvent] = []
    labels: list[WordLabel] = []
    placed: list[tuple[int, TrialId, QuestionId, WordIndex, WordType, SentenceRelevance]] = []
    t_ms = cfg.lead_ms
    for trial_id, (question_id, relevance, types) in enumerate(design, start=1):
        triggers.append(TriggerEvent(sample_index=round(t_ms * per_ms), code=TriggerCode.QUESTION_ONSET, trial_id=trial_id))
        t_ms += cfg.question_ms
        triggers.append(TriggerEvent(sample_index=round(t_ms * per_ms), code=TriggerCode.FIXATION, trial_id=trial_id))
        t_ms += cfg.fixation_ms
        for word_index, word_type in enumerate(types):
            onset = round(t_ms * per_ms)
            triggers.append(
                TriggerEvent(sample_index=onset, code=TriggerCode.WORD_ONSET, trial_id=trial_id, word_index=word_index)
            )
            labels.append(
                WordLabel(
                    word_type=word_type,
                    sentence_relevance=relevance,
                    trial_id=trial_id,
                    word_index=word_index,
                    participant_id=participant_id,
                    question_id=question_id,
                )
            )
            placed.append((onset, trial_id, question_id, word_index, word_type, relevance))
            t_ms += cfg.soa_ms
    n_samples = round((t_ms + cfg.lead_ms) * per_ms)

    artifacts = rng.uniform(size=len(placed)) < spec.artifact_rate
    data = np.zeros((len(names), n_samples))
    if spec.noise_uv > 0:
        data += spec.noise_uv * pink_noise(len(names), n_samples, rng)
    if spec.common_mode_uv > 0:
        data += spec.common_mode_uv * pink_noise(1, n_samples, rng)
    if spec.dc_offset_uv > 0:
        data += rng.uniform(-spec.dc_offset_uv, spec.dc_offset_uv, size=(len(names), 1))

    span = round(cfg.soa_ms * per_ms)
    times = np.arange(span) / per_ms
    topo = channel_gains(names, spec, rois) * gain
    scalp = topo > 0
    templates = {wt: component_template(times, spec.components[wt]) for wt in WordType}
    spike = biphasic_spike(times, spec.artifact_uv)
    words = []
    for (onset, trial_id, question_id, word_index, word_type, relevance), artifact in zip(placed, artifacts, strict=True):
        data[:, onset : onset + span] += topo[:, None] * templates[word_type][None, :]
        if artifact:
            data[scalp, onset : onset + span] += spike[None, :]
        amp = spec.components[word_type]
        words.append(
            InjectedWord(
                trial_id=trial_id,
                question_id=question_id,
                word_index=word_index,
                word_type=word_type,
                sentence_relevance=relevance,
                onset_sample=onset,
                n100=amp.n100 * gain,
                p200=amp.p200 * gain,
                n400=amp.n400 * gain,
                p600=amp.p600 * gain,
                artifact=bool(artifact),
            )
        )

    rec = SessionRecording(
        data=data,
        rate_hz=cfg.rate_hz,
        channel_names=names,
        triggers=tuple(triggers),
        labels=tuple(labels),
        participant_id=participant_id,
    )
    truth = SyntheticTruth(participant_id=participant_id, seed=seed, gain=gain, words=tuple(words))
    logger.debug(
        'synthesized {}: {} trials, {} words, {} artifacts', participant_id, n_trials, len(words), int(artifacts.sum())
    )
    return rec, truth


def participant_gains(n_participants: int, jitter: float, rng: np.random.Generator) -> np.ndarray:
    """被试乘性增益 1 + jitter·N(0, 1)，下限 0.1。

    Args:
        n_participants: 被试数。
        jitter: 标准差。
        rng: 随机数发生器。

    Returns:
        增益数组。
    """
    return np.maximum(0.1, 1.0 + jitter * rng.standard_normal(n_participants))


def generate_cohort(
    n_participants: int,
    n_trials: int,
    config: SynthConfig | None = None,
    seed: int = 0,
    roi_map: RoiMap | None = None,
    channels: Sequence[str] | None = None,
) -> list[tuple[SessionRecording, SyntheticTruth]]:
    """生成多名被试的独立会话。

    每名被试的种子由 SeedSequence 派生，增益抖动取自 config.gain_jitter。

    Args:
        n_participants: 被试数。
        n_trials: 每名被试的试次数。
        config: 试次设计与注入效应。
        seed: 队列种子。
        roi_map: 脑区划分。
        channels: 通道名。

    Returns:
        每名被试的 (记录, 真值)。

    Raises:
        ParameterError: 被试少于 2 名时抛出。
    """
    if n_participants < 2:
        raise ParameterError(f'a cohort needs at least 2 participants, got {n_participants}')
    cfg = config or SynthConfig()
    root = np.random.SeedSequence(seed)
    gains = participant_gains(n_participants, cfg.gain_jitter, np.random.default_rng(root))
    children = root.spawn(n_participants)
    width = max(2, len(str(n_participants)))
    sessions = []
    for i, (child, g) in enumerate(zip(children, gains, strict=True), start=1):
        child_seed = int(child.generate_state(1)[0])
        sessions.append(
            generate_session(n_trials, cfg, child_seed, f'p{i:0{width}d}', float(g), roi_map, channels)
        )
    logger.info('synthesized cohort of {} participants x {} trials', n_participants, n_trials)
    return sessions


def write_cohort(sessions: Sequence[tuple[SessionRecording, SyntheticTruth]], directory: str | Path) -> list[Path]:
    """每名被试写一个会话目录（含 truth.csv）。

    Args:
        sessions: generate_cohort 的输出。
        directory: 输出根目录。

    Returns:
        会话目录列表。
    """
    root = Path(directory)
    out = []
    for rec, truth in sessions:
        path = write_session(rec, root / rec.participant_id)
        truth.write(path)
        out.append(path)
    return out
