"""逐维 z-score 标准化；统计量只在训练集上拟合。"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from eegrc.features.extract import WordFeatureVector
from eegrc.utils.errors import DataError, StructuralError


if TYPE_CHECKING:
    from collections.abc import Sequence


class FeatureScaler(BaseModel):
    """每个维度的均值与标准差。"""

    model_config = ConfigDict(frozen=True)

    mean: tuple[float, ...]
    """训练集均值。"""
    std: tuple[float, ...]
    """训练集标准差（总体标准差，均为正）。"""

    @model_validator(mode='after')
    def _check_stats(self) -> FeatureScaler:
        """验证长度一致且标准差为正。

        Returns:
            验证通过后的 FeatureScaler 实例。

        Raises:
            ValueError: 长度不一致或存在非正标准差时抛出。
        """
        if len(self.mean) != len(self.std):
            raise ValueError(f'{len(self.mean)} means for {len(self.std)} standard deviations')
        if any(not s > 0 for s in self.std):
            raise ValueError('standard deviations must be positive')
        return self

    @property
    def dimension(self) -> int:
        """维度。

        Returns:
            特征维度。
        """
        return len(self.mean)

    def transform(self, matrix: np.ndarray) -> np.ndarray:
        """标准化一个 (n, d) 矩阵或单个向量。

        Args:
            matrix: 原始特征。

        Returns:
            标准化后的数组。

        Raises:
            StructuralError: 维度不符时抛出。
        """
        arr = np.asarray(matrix, dtype=np.float64)
        if arr.shape[-1] != self.dimension:
            raise StructuralError(f'scaler fitted on {self.dimension} dims, got {arr.shape[-1]}')
        return (arr - np.asarray(self.mean)) / np.asarray(self.std)


def _as_matrix(train: Sequence[WordFeatureVector] | np.ndarray) -> np.ndarray:
    if isinstance(train, np.ndarray):
        return np.atleast_2d(np.asarray(train, dtype=np.float64))
    if not train:
        raise DataError('cannot fit a scaler on an empty training set')
    return np.stack([v.values for v in train])


def fit_scaler(
    train: Sequence[WordFeatureVector] | np.ndarray, names: Sequence[str] | None = None
) -> FeatureScaler:
    """在训练集上估计逐维均值与标准差。

    Args:
        train: 训练特征向量或 (n, d) 矩阵。
        names: 维度名称，用于错误信息。

    Returns:
        FeatureScaler。

    Raises:
        DataError: 训练集为空或某维为常数时抛出（信息中包含维度名）。
    """
    matrix = _as_matrix(train)
    mean = matrix.mean(axis=0)
    std = matrix.std(axis=0)
    for i, s in enumerate(std):
        if not s > 1e-12 * max(1.0, abs(mean[i])):
            name = names[i] if names is not None and i < len(names) else f'f{i}'
            raise DataError(f'feature dimension {i} ({name}) is constant on the training set')
    return FeatureScaler(mean=tuple(float(m) for m in mean), std=tuple(float(s) for s in std))


def apply_scaler(scaler: FeatureScaler, v: WordFeatureVector) -> WordFeatureVector:
    """用已存统计量标准化一个特征向量。

    Args:
        scaler: 训练集上拟合的标准化器。
        v: 原始特征向量。

    Returns:
        standardized=True 的新向量。

    Raises:
        DataError: 输入已经标准化时抛出。
    """
    if v.standardized:
        raise DataError(f'feature vector {v.label.key} is already standardized')
    return WordFeatureVector(values=scaler.transform(v.values), label=v.label, standardized=True)
