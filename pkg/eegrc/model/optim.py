"""Adam 优化器。"""

from __future__ import annotations

import numpy as np

from eegrc.model.params import TRAINABLE, ModelParams


class Adam:
    """带偏差校正的 Adam，原地更新 ModelParams。"""

    def __init__(
        self, params: ModelParams, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8
    ) -> None:
        """初始化一阶、二阶矩为 0。

        Args:
            params: 待优化参数。
            lr: 学习率。
            beta1: 一阶矩衰减。
            beta2: 二阶矩衰减。
            eps: 数值稳定项。
        """
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {name: np.zeros_like(params[name]) for name in TRAINABLE}
        self.v = {name: np.zeros_like(params[name]) for name in TRAINABLE}

    def step(self, params: ModelParams, grads: dict[str, np.ndarray]) -> None:
        """执行一步更新。

        Args:
            params: 参数（原地修改）。
            grads: 名称 → 梯度。
        """
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for name in TRAINABLE:
            g = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            params.tensors[name] -= self.lr * (self.m[name] / c1) / (np.sqrt(self.v[name] / c2) + self.eps)
