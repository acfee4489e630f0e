"""会话记录、触发事件、词标签与 epoch 数据模型。"""

from __future__ import annotations

from enum import StrEnum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, ValidationInfo, field_validator, model_validator

from eegrc.utils.errors import DataError
from eegrc.utils.types import (
    ChannelName,
    ParticipantId,
    QuestionId,
    SentenceRelevance,
    TrialId,
    WordIndex,
    WordKey,
    WordType,
)


def frozen_array(value: object, ndim: int) -> np.ndarray:
    """转换为只读 float64 数组视图。

    Args:
        value: 任意可转换为数组的对象。
        ndim: 期望维数。

    Returns:
        只读数组视图。

    Raises:
        ValueError: 维数不符时抛出。
        DataError: 含非有限值时抛出。
    """
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != ndim:
        raise ValueError(f'expected a {ndim}-d array, got shape {arr.shape}')
    if not np.isfinite(arr).all():
        raise DataError('array contains non-finite values')
    view = arr.view()
    view.flags.writeable = False
    return view


class ArrayModel(BaseModel):
    """带数组字段的数据模型：数组校验中的 DataError 原样抛出，而不是包装成 ValidationError。"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    def __init__(self, **data: object) -> None:
        """校验并构造。

        Raises:
            DataError: 数组含非有限值时抛出。
            ValidationError: 其它字段不合法时抛出。
        """
        try:
            super().__init__(**data)
        except ValidationError as exc:
            for error in exc.errors():
                cause = error.get('ctx', {}).get('error')
                if isinstance(cause, DataError):
                    raise cause from exc
            raise


class TriggerCode(StrEnum):
    """触发事件类型。"""

    WORD_ONSET = 'word'
    """词呈现。"""
    FIXATION = 'fixation'
    """注视点。"""
    QUESTION_ONSET = 'question'
    """问题呈现。"""


class TriggerEvent(BaseModel):
    """记录中的一个触发事件。"""

    model_config = ConfigDict(frozen=True)

    sample_index: int = Field(ge=0)
    """事件所在采样点。"""
    code: TriggerCode
    """事件类型。"""
    trial_id: TrialId
    """所属试次。"""
    word_index: WordIndex | None = None
    """词序号（仅词呈现事件）。"""

    @model_validator(mode='after')
    def _check_word_index(self) -> TriggerEvent:
        """验证词呈现事件必须携带词序号。

        Returns:
            验证通过后的 TriggerEvent 实例。

        Raises:
            ValueError: 词呈现事件缺少 word_index 时抛出。
        """
        if self.code is TriggerCode.WORD_ONSET and self.word_index is None:
            raise ValueError(f'word-onset trigger at sample {self.sample_index} has no word_index')
        return self


class WordLabel(BaseModel):
    """单个词刺激的标签。"""

    model_config = ConfigDict(frozen=True)

    word_type: WordType
    """词类型。"""
    sentence_relevance: SentenceRelevance
    """所在句子的相关性。"""
    trial_id: TrialId
    """试次（句子）标识。"""
    word_index: WordIndex
    """句内词序号。"""
    participant_id: ParticipantId
    """被试标识。"""
    question_id: QuestionId | None = Field(default=None, validate_default=True)
    """所属问题；缺省时等于 trial_id。"""

    @field_validator('question_id')
    @classmethod
    def _default_question(cls, value: QuestionId | None, info: ValidationInfo) -> QuestionId | None:
        """缺省的 question_id 取 trial_id。

        Args:
            value: 原值。
            info: 校验上下文。

        Returns:
            问题标识。
        """
        if value is None:
            return info.data.get('trial_id')
        return value

    @model_validator(mode='after')
    def _check_answer_sentence(self) -> WordLabel:
        """验证答案词只出现在完全相关的句子中。

        Returns:
            验证通过后的 WordLabel 实例。

        Raises:
            ValueError: 答案词位于非完全相关句子时抛出。
        """
        if (
            self.word_type is WordType.ANSWER
            and self.sentence_relevance is not SentenceRelevance.PERFECTLY_RELEVANT
        ):
            raise ValueError(
                f'answer word {self.trial_id}/{self.word_index} in a {self.sentence_relevance} sentence'
            )
        return self

    @property
    def key(self) -> WordKey:
        """词级主键。

        Returns:
            (participant_id, trial_id, word_index)。
        """
        return (self.participant_id, self.trial_id, self.word_index)


class SessionRecording(ArrayModel):
    """一次会话的连续多通道记录，是数据接入的基本单位。"""

    data: np.ndarray
    """通道 × 采样点电压矩阵（µV）。"""
    rate_hz: float = Field(gt=0)
    """采样率。"""
    channel_names: tuple[ChannelName, ...]
    """通道名称（与 data 行一一对应）。"""
    triggers: tuple[TriggerEvent, ...] = ()
    """触发事件表。"""
    labels: tuple[WordLabel, ...] = ()
    """词标签表。"""
    participant_id: ParticipantId
    """被试标识。"""

    @field_validator('data', mode='before')
    @classmethod
    def _check_data(cls, value: object) -> np.ndarray:
        """转换为只读二维 float64 数组并检查有限性。

        Args:
            value: 原始数据。

        Returns:
            只读数组。
        """
        return frozen_array(value, ndim=2)

    @model_validator(mode='after')
    def _check_consistency(self) -> SessionRecording:
        """验证通道名唯一、与数据行数一致，且触发点位于记录内部。

        Returns:
            验证通过后的 SessionRecording 实例。

        Raises:
            ValueError: 任一约束不满足时抛出。
        """
        if len(set(self.channel_names)) != len(self.channel_names):
            raise ValueError('channel names must be unique')
        if len(self.channel_names) != self.data.shape[0]:
            raise ValueError(
                f'{len(self.channel_names)} channel names for {self.data.shape[0]} data rows'
            )
        for trig in self.triggers:
            if trig.sample_index >= self.n_samples:
                raise ValueError(
                    f'trigger at sample {trig.sample_index} beyond recording length {self.n_samples}'
                )
        return self

    @property
    def n_samples(self) -> int:
        """采样点数。

        Returns:
            每通道长度。
        """
        return int(self.data.shape[1])

    def channel_index(self, name: ChannelName) -> int:
        """通道名 → 行号。

        Args:
            name: 通道名。

        Returns:
            行号。

        Raises:
            KeyError: 通道不存在。
        """
        try:
            return self.channel_names.index(name)
        except ValueError:
            raise KeyError(name) from None

    def label_table(self) -> dict[tuple[TrialId, WordIndex], WordLabel]:
        """按 (trial_id, word_index) 索引的标签字典。

        Returns:
            标签字典。
        """
        return {(lab.trial_id, lab.word_index): lab for lab in self.labels}

    def with_data(self, data: np.ndarray, rate_hz: float | None = None) -> SessionRecording:
        """以新数据构造记录，其余元数据不变。

        Args:
            data: 新的电压矩阵。
            rate_hz: 新采样率，None 表示不变。

        Returns:
            新的 SessionRecording。
        """
        return SessionRecording(
            data=data,
            rate_hz=self.rate_hz if rate_hz is None else rate_hz,
            channel_names=self.channel_names,
            triggers=self.triggers,
            labels=self.labels,
            participant_id=self.participant_id,
        )


class EpochMatrix(ArrayModel):
    """单个词刺激的 EEG epoch。"""

    data: np.ndarray
    """通道 × 采样点电压矩阵（µV）。"""
    rate_hz: float = Field(gt=0)
    """采样率。"""
    t0_ms: float
    """首个采样点相对刺激出现的时间（ms）。"""
    channel_names: tuple[ChannelName, ...]
    """通道名称。"""
    label: WordLabel
    """词标签。"""

    @field_validator('data', mode='before')
    @classmethod
    def _check_data(cls, value: object) -> np.ndarray:
        """转换为只读二维 float64 数组并检查有限性。

        Args:
            value: 原始数据。

        Returns:
            只读数组。
        """
        return frozen_array(value, ndim=2)

    @model_validator(mode='after')
    def _check_channels(self) -> EpochMatrix:
        """验证通道名与数据行数一致。

        Returns:
            验证通过后的 EpochMatrix 实例。

        Raises:
            ValueError: 数量不一致时抛出。
        """
        if len(self.channel_names) != self.data.shape[0]:
            raise ValueError(
                f'{len(self.channel_names)} channel names for {self.data.shape[0]} data rows'
            )
        return self

    @property
    def n_samples(self) -> int:
        """采样点数。

        Returns:
            每通道长度。
        """
        return int(self.data.shape[1])

    @property
    def times_ms(self) -> np.ndarray:
        """每个采样点相对刺激的时间（ms）。

        Returns:
            长度为 n_samples 的数组。
        """
        return self.t0_ms + np.arange(self.n_samples) * 1000.0 / self.rate_hz

    @property
    def end_ms(self) -> float:
        """epoch 覆盖范围的右端点（不含）。

        Returns:
            t0_ms + 时长。
        """
        return self.t0_ms + self.n_samples * 1000.0 / self.rate_hz

    def channel_rows(self, names: tuple[ChannelName, ...] | list[ChannelName]) -> np.ndarray:
        """电极名 → 行号数组。

        Args:
            names: 电极名称。

        Returns:
            行号数组。

        Raises:
            KeyError: 任一电极不存在。
        """
        index = {name: i for i, name in enumerate(self.channel_names)}
        missing = [n for n in names if n not in index]
        if missing:
            raise KeyError(f'electrodes {missing} not in epoch montage')
        return np.array([index[n] for n in names], dtype=int)

    def with_data(self, data: np.ndarray, rate_hz: float | None = None) -> EpochMatrix:
        """以新数据构造 epoch，其余元数据不变。

        Args:
            data: 新的电压矩阵。
            rate_hz: 新采样率，None 表示不变。

        Returns:
            新的 EpochMatrix。
        """
        return EpochMatrix(
            data=data,
            rate_hz=self.rate_hz if rate_hz is None else rate_hz,
            t0_ms=self.t0_ms,
            channel_names=self.channel_names,
            label=self.label,
        )
