"""UERCM 参数表。"""

from __future__ import annotations

import numpy as np

from eegrc.config.schema import ModelConfig
from eegrc.utils.errors import StructuralError


TRAINABLE = (
    'W_h',
    'b_h',
    'P',
    'W_q',
    'b_q',
    'W_k',
    'b_k',
    'W_v',
    'b_v',
    'W_out',
    'b_out',
    'gamma',
    'beta',
    'W_s',
    'b_s',
    'W_o',
    'b_o',
)
BUFFERS = ('running_mean', 'running_var')  # 不参与梯度更新的 BatchNorm 滑动统计


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """每个张量的形状。

    Args:
        config: 模型配置。

    Returns:
        名称 → 形状，顺序为 TRAINABLE + BUFFERS。
    """
    d, h, t = config.d, config.h, config.t_max
    return {
        'W_h': (d, h),
        'b_h': (h,),
        'P': (t, h),
        'W_q': (h, h),
        'b_q': (h,),
        'W_k': (h, h),
        'b_k': (h,),
        'W_v': (h, h),
        'b_v': (h,),
        'W_out': (h, h),
        'b_out': (h,),
        'gamma': (h,),
        'beta': (h,),
        'W_s': (t * h, 2),
        'b_s': (2,),
        'W_o': (h, 2),
        'b_o': (2,),
        'running_mean': (h,),
        'running_var': (h,),
    }


_FAN_IN = {
    'W_h': 'd',
    'b_h': 'd',
    'W_q': 'h',
    'b_q': 'h',
    'W_k': 'h',
    'b_k': 'h',
    'W_v': 'h',
    'b_v': 'h',
    'W_out': 'h',
    'b_out': 'h',
    'W_s': 'th',
    'b_s': 'th',
    'W_o': 'h',
    'b_o': 'h',
}


class ModelParams:
    """模型配置 + 命名张量。

    张量以 float64 存放；优化器原地更新 tensors 中的数组。
    """

    def __init__(self, config: ModelConfig, tensors: dict[str, np.ndarray]) -> None:
        """校验张量集合与形状后构造。

        Args:
            config: 模型配置。
            tensors: 名称 → 数组。

        Raises:
            StructuralError: 缺少张量、多余张量或形状不符时抛出。
        """
        shapes = param_shapes(config)
        if set(tensors) != set(shapes):
            missing = sorted(set(shapes) - set(tensors))
            extra = sorted(set(tensors) - set(shapes))
            raise StructuralError(f'parameter set mismatch: missing {missing}, unexpected {extra}')
        for name, shape in shapes.items():
            if tuple(tensors[name].shape) != shape:
                raise StructuralError(f'{name} has shape {tensors[name].shape}, expected {shape}')
        self.config = config
        self.tensors = {name: np.asarray(tensors[name], dtype=np.float64) for name in shapes}

    @classmethod
    def initialize(cls, config: ModelConfig, rng: np.random.Generator | None = None) -> ModelParams:
        """按 uniform(±1/√fan_in) 初始化线性层；位置表为 0，gamma 为 1，beta 为 0。

        Args:
            config: 模型配置。
            rng: 随机数发生器，None 时使用 config.seed。

        Returns:
            新参数。
        """
        gen = rng if rng is not None else np.random.default_rng(config.seed)
        fan = {'d': config.d, 'h': config.h, 'th': config.t_max * config.h}
        tensors = {}
        for name, shape in param_shapes(config).items():
            if name in _FAN_IN:
                bound = 1.0 / np.sqrt(fan[_FAN_IN[name]])
                tensors[name] = gen.uniform(-bound, bound, size=shape)
            elif name in ('gamma', 'running_var'):
                tensors[name] = np.ones(shape)
            else:
                tensors[name] = np.zeros(shape)
        return cls(config, tensors)

    def __getitem__(self, name: str) -> np.ndarray:
        """按名称取张量。

        Args:
            name: 张量名。

        Returns:
            数组（可原地修改）。
        """
        return self.tensors[name]

    def copy(self) -> ModelParams:
        """深拷贝。

        Returns:
            独立的 ModelParams。
        """
        return ModelParams(self.config, {k: v.copy() for k, v in self.tensors.items()})

    def all_finite(self) -> bool:
        """所有张量是否有限。

        Returns:
            布尔值。
        """
        return all(np.isfinite(v).all() for v in self.tensors.values())

    def __repr__(self) -> str:
        """简要描述。

        Returns:
            含 h、heads、t_max 的字符串。
        """
        c = self.config
        return f'ModelParams(d={c.d}, h={c.h}, heads={c.heads}, t_max={c.t_max})'
