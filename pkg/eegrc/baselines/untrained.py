"""未训练基线：所有预测都是随机选择。"""

from __future__ import annotations

import numpy as np


def untrained_scores(n_items: int, seed: int = 0) -> np.ndarray:
    """独立同分布的 uniform(0, 1) 分数。

    Args:
        n_items: 条目数。
        seed: 随机种子；相同种子给出相同分数。

    Returns:
        长度为 n_items 的数组。
    """
    return np.random.default_rng(seed).uniform(0.0, 1.0, size=n_items)


def untrained_draws(n_items: int, draws: int, seed: int = 0) -> np.ndarray:
    """多次独立抽样，用于平均掉随机基线的噪声。

    Args:
        n_items: 条目数。
        draws: 抽样次数。
        seed: 随机种子。

    Returns:
        (draws, n_items) 数组。
    """
    return np.random.default_rng(seed).uniform(0.0, 1.0, size=(draws, n_items))
