"""AUC 与 MAP。"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
from scipy.stats import rankdata
from sklearn.metrics import average_precision_score, roc_auc_score

from eegrc.utils.errors import MetricError


if TYPE_CHECKING:
    from collections.abc import Sequence


def _check_pair(scores: Sequence[float] | np.ndarray, labels: Sequence[int] | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).astype(int).ravel()
    if s.shape != y.shape:
        raise MetricError(f'{s.size} scores for {y.size} labels')
    if not np.isfinite(s).all():
        raise MetricError('scores contain non-finite values')
    return s, y


def auc(scores: Sequence[float] | np.ndarray, labels: Sequence[int] | np.ndarray) -> float:
    """ROC 曲线下面积：随机正例得分高于随机负例的概率，平局计 ½。

    Args:
        scores: 分数。
        labels: 0/1 标签。

    Returns:
        AUC。

    Raises:
        MetricError: 只有单一类别时抛出。
    """
    s, y = _check_pair(scores, labels)
    if np.unique(y).size < 2:
        raise MetricError('AUC needs both positive and negative labels')
    return float(roc_auc_score(y, s))


def average_precision(scores: Sequence[float] | np.ndarray, relevance: Sequence[int] | np.ndarray) -> float:
    """单个查询的平均精度；只有一个相关候选时等于 1/名次。

    Args:
        scores: 候选得分。
        relevance: 0/1 相关性。

    Returns:
        AP。

    Raises:
        MetricError: 没有相关候选时抛出。
    """
    s, y = _check_pair(scores, relevance)
    if not y.any():
        raise MetricError('query has no relevant candidate')
    return float(average_precision_score(y, s))


def mean_average_precision(
    queries: Sequence[tuple[Sequence[float] | np.ndarray, Sequence[int] | np.ndarray]],
) -> float:
    """所有查询平均精度的均值。

    Args:
        queries: 每个查询的 (候选得分, 相关性)。

    Returns:
        MAP。

    Raises:
        MetricError: 查询为空或某查询没有相关候选时抛出。
    """
    if not queries:
        raise MetricError('MAP needs at least one query')
    return float(np.mean([average_precision(s, r) for s, r in queries]))


def auc_draws(score_draws: np.ndarray, labels: Sequence[int] | np.ndarray) -> np.ndarray:
    """对多组分数（每行一组）同时计算 AUC，基于平均秩的 Mann-Whitney 统计量。

    Args:
        score_draws: (draws, n) 分数。
        labels: 长度 n 的 0/1 标签。

    Returns:
        长度 draws 的 AUC。

    Raises:
        MetricError: 只有单一类别时抛出。
    """
    y = np.asarray(labels).astype(bool).ravel()
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError('AUC needs both positive and negative labels')
    ranks = rankdata(np.atleast_2d(score_draws), axis=1)
    return (ranks[:, y].sum(axis=1) - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def map_draws(
    score_draws: np.ndarray, relevance: Sequence[int] | np.ndarray, groups: Sequence[object] | np.ndarray
) -> np.ndarray:
    """对多组分数同时计算 MAP（无平局的随机分数）。

    Args:
        score_draws: (draws, n) 分数。
        relevance: 长度 n 的 0/1 相关性。
        groups: 长度 n 的查询标识。

    Returns:
        长度 draws 的 MAP。

    Raises:
        MetricError: 某查询没有相关候选时抛出。
    """
    draws = np.atleast_2d(score_draws)
    rel = np.asarray(relevance).astype(float).ravel()
    keys = np.asarray([str(g) for g in groups])
    totals = np.zeros(draws.shape[0])
    unique = np.unique(keys)
    for key in unique:
        idx = np.flatnonzero(keys == key)
        r = rel[idx]
        if not r.any():
            raise MetricError(f'query {key} has no relevant candidate')
        order = np.argsort(-draws[:, idx], axis=1, kind='stable')
        ranked = r[order]
        precision = np.cumsum(ranked, axis=1) / np.arange(1, idx.size + 1)
        totals += (precision * ranked).sum(axis=1) / r.sum()
    return totals / unique.size
