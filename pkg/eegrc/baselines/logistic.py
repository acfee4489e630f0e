"""L2 正则逻辑回归词打分器（全批量梯度下降）。"""

from __future__ import annotations

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import expit

from eegrc.utils.errors import DataError


class LogisticWordScorer(BaseModel):
    """逻辑回归权重。"""

    model_config = ConfigDict(frozen=True)

    weights: tuple[float, ...]
    """每个特征的权重。"""
    bias: float = 0.0
    """截距（不正则化）。"""
    l2: float = Field(default=1e-3, ge=0)
    """训练时使用的 L2 系数。"""

    def predict(self, features: np.ndarray) -> np.ndarray:
        """答案词概率。

        Args:
            features: (n, d) 标准化特征。

        Returns:
            长度为 n 的概率。

        Raises:
            DataError: 特征含非有限值或维度不符时抛出。
        """
        x = _check_features(features)
        if x.shape[1] != len(self.weights):
            raise DataError(f'scorer expects {len(self.weights)} features, got {x.shape[1]}')
        return expit(x @ np.asarray(self.weights) + self.bias)


def _check_features(features: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if not np.isfinite(x).all():
        raise DataError('logistic scorer received non-finite features')
    return x


def logistic_objective(weights: np.ndarray, bias: float, x: np.ndarray, y: np.ndarray, l2: float) -> float:
    """平均交叉熵 + (l2/2)·‖w‖²。

    Args:
        weights: 权重。
        bias: 截距。
        x: 特征。
        y: 0/1 标签。
        l2: 正则系数。

    Returns:
        目标函数值。
    """
    z = x @ weights + bias
    # log(1 + e^z) − y·z，数值稳定形式
    return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * weights @ weights)


def fit_logistic_scorer(
    features: np.ndarray, labels: np.ndarray, l2: float = 1e-3, lr: float = 1.0, steps: int = 500
) -> LogisticWordScorer:
    """全批量梯度下降拟合。

    Args:
        features: (n, d) 标准化特征。
        labels: 0/1 标签。
        l2: L2 系数。
        lr: 步长。
        steps: 迭代次数。

    Returns:
        LogisticWordScorer。

    Raises:
        DataError: 特征含非有限值、为空或与标签数不符时抛出。
    """
    x = _check_features(features)
    y = np.asarray(labels, dtype=np.float64).ravel()
    if x.shape[0] == 0 or x.shape[0] != y.size:
        raise DataError(f'{x.shape[0]} feature rows for {y.size} labels')
    w = np.zeros(x.shape[1])
    b = 0.0
    n = x.shape[0]
    for _ in range(steps):
        residual = expit(x @ w + b) - y
        w -= lr * (x.T @ residual / n + l2 * w)
        b -= lr * float(residual.mean())
    logger.debug('logistic scorer objective {:.6f}', logistic_objective(w, b, x, y, l2))
    return LogisticWordScorer(weights=tuple(float(v) for v in w), bias=b, l2=l2)
