"""词特征 → 句子样本 → 补齐到 t_max 的训练批次。"""

from __future__ import annotations

from collections import defaultdict
from typing import TYPE_CHECKING

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from eegrc.features.scaler import fit_scaler
from eegrc.utils.errors import DataError, ParameterError
from eegrc.utils.types import (
    ParticipantId,
    QuestionId,
    SentenceRelevance,
    TrialId,
    WordIndex,
    WordType,
)


if TYPE_CHECKING:
    from collections.abc import Sequence

    from eegrc.features.extract import WordFeatureVector
    from eegrc.features.scaler import FeatureScaler


class SentenceSample(BaseModel):
    """一个被试阅读的一个句子。"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    participant_id: ParticipantId
    """被试。"""
    question_id: QuestionId
    """所属问题。"""
    trial_id: TrialId
    """句子（试次）。"""
    word_indices: tuple[WordIndex, ...]
    """句内词序号（升序）。"""
    word_types: tuple[WordType, ...]
    """每个词的类型。"""
    relevance: SentenceRelevance
    """句子相关性。"""
    features: np.ndarray
    """(词数, d) 特征矩阵。"""
    standardized: bool = False
    """特征是否已标准化。"""

    @field_validator('features', mode='before')
    @classmethod
    def _check_features(cls, value: object) -> np.ndarray:
        """转换为二维 float64 数组。

        Args:
            value: 原始特征。

        Returns:
            数组。

        Raises:
            ValueError: 不是非空二维矩阵时抛出。
        """
        arr = np.asarray(value, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise ValueError(f'sentence features must be a non-empty (words, d) matrix, got {arr.shape}')
        return arr

    @property
    def length(self) -> int:
        """词数。

        Returns:
            句长。
        """
        return int(self.features.shape[0])

    @property
    def sentence_label(self) -> int:
        """句子分类标签：完全相关为 1。

        Returns:
            0 或 1。
        """
        return int(self.relevance is SentenceRelevance.PERFECTLY_RELEVANT)

    @property
    def token_labels(self) -> np.ndarray:
        """答案抽取标签：答案词为 1。

        Returns:
            长度为句长的 0/1 数组。
        """
        return np.array([t is WordType.ANSWER for t in self.word_types], dtype=np.float64)

    @property
    def key(self) -> tuple[ParticipantId, TrialId]:
        """句子主键。

        Returns:
            (participant_id, trial_id)。
        """
        return (self.participant_id, self.trial_id)


class TrainingBatch(BaseModel):
    """补齐后的批次；补齐位置特征为 0，mask 为 0。"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    x: np.ndarray
    """(B, t_max, d) 特征。"""
    mask: np.ndarray
    """(B, t_max) 有效位置为 1。"""
    y_s: np.ndarray
    """(B,) 句子标签。"""
    y_o: np.ndarray
    """(B, t_max) 词标签。"""
    keys: tuple[tuple[ParticipantId, TrialId], ...] = Field(default=())
    """每行对应的句子主键。"""

    @property
    def size(self) -> int:
        """批大小。

        Returns:
            B。
        """
        return int(self.x.shape[0])


def build_sentence_samples(
    vectors: Sequence[WordFeatureVector], scaler: FeatureScaler | None = None
) -> list[SentenceSample]:
    """按 (被试, 句子) 分组并按词序排序。

    Args:
        vectors: 词特征向量。
        scaler: 若给出则先标准化。

    Returns:
        按 (participant_id, trial_id) 排序的句子样本。
    """
    groups: dict[tuple[ParticipantId, TrialId], list[WordFeatureVector]] = defaultdict(list)
    for v in vectors:
        groups[(v.label.participant_id, v.label.trial_id)].append(v)
    samples = []
    for (pid, trial), members in sorted(groups.items()):
        members.sort(key=lambda v: v.label.word_index)
        first = members[0].label
        matrix = np.stack([v.values for v in members])
        already = all(v.standardized for v in members)
        if scaler is not None and not already:
            matrix = scaler.transform(matrix)
        samples.append(
            SentenceSample(
                participant_id=pid,
                question_id=first.question_id,
                trial_id=trial,
                word_indices=tuple(v.label.word_index for v in members),
                word_types=tuple(v.label.word_type for v in members),
                relevance=first.sentence_relevance,
                features=matrix,
                standardized=already or scaler is not None,
            )
        )
    return samples


def rescale(
    train_samples: Sequence[SentenceSample], others: Sequence[SentenceSample]
) -> tuple[list[SentenceSample], list[SentenceSample], FeatureScaler]:
    """只用训练句子的词特征拟合标准化器，并应用到训练与其它句子。

    Args:
        train_samples: 训练句子（未标准化）。
        others: 需要用同一统计量标准化的句子。

    Returns:
        (标准化后的训练句子, 标准化后的其它句子, 标准化器)。

    Raises:
        DataError: 训练句子为空或已标准化时抛出。
    """
    if not train_samples:
        raise DataError('cannot fit a scaler on an empty training split')
    if any(s.standardized for s in (*train_samples, *others)):
        raise DataError('rescale expects raw features')
    scaler = fit_scaler(np.concatenate([s.features for s in train_samples]))

    def _apply(s: SentenceSample) -> SentenceSample:
        return s.model_copy(update={'features': scaler.transform(s.features), 'standardized': True})

    return [_apply(s) for s in train_samples], [_apply(s) for s in others], scaler


def collate(samples: Sequence[SentenceSample], t_max: int, d: int | None = None) -> TrainingBatch:
    """把句子样本补齐为批次。

    Args:
        samples: 句子样本。
        t_max: 补齐长度。
        d: 期望特征维度，None 取首个样本。

    Returns:
        TrainingBatch。

    Raises:
        DataError: 样本为空或特征维度不一致时抛出。
        ParameterError: 句长超过 t_max 时抛出。
    """
    if not samples:
        raise DataError('cannot collate an empty batch')
    dim = d if d is not None else samples[0].features.shape[1]
    x = np.zeros((len(samples), t_max, dim))
    mask = np.zeros((len(samples), t_max))
    y_o = np.zeros((len(samples), t_max))
    for i, s in enumerate(samples):
        if s.length > t_max:
            raise ParameterError(f'sentence {s.key} has {s.length} words, exceeds t_max={t_max}')
        if s.features.shape[1] != dim:
            raise DataError(f'sentence {s.key} has {s.features.shape[1]} features, expected {dim}')
        x[i, : s.length] = s.features
        mask[i, : s.length] = 1.0
        y_o[i, : s.length] = s.token_labels
    return TrainingBatch(
        x=x,
        mask=mask,
        y_s=np.array([s.sentence_label for s in samples], dtype=np.float64),
        y_o=y_o,
        keys=tuple(s.key for s in samples),
    )
