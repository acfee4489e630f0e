"""异常体系：每类异常携带 CLI 退出码与机器可读的类别名。"""

from __future__ import annotations


class EegrcError(Exception):
    """所有 eegrc 异常的基类。"""

    exit_code = 1
    """CLI 退出码。"""
    kind = 'error'
    """单行错误前缀中的类别名。"""


class ConfigError(EegrcError, ValueError):
    """配置错误（如缺少乳突参考电极）。"""

    exit_code = 2
    kind = 'config'


class ParameterError(ConfigError):
    """参数越界或不合法（如频带违反 Nyquist）。"""

    kind = 'parameter'


class DataError(EegrcError, ValueError):
    """输入数据错误（非有限值、缺失单元、退化 epoch 等）。"""

    exit_code = 3
    kind = 'data'


class StructuralError(DataError):
    """张量或文件结构与配置不一致。"""

    kind = 'structure'


class MetricError(DataError):
    """指标无法计算（如只有单一类别）。"""

    kind = 'metric'


class TrainingError(DataError):
    """训练失败（如出现非有限梯度）。"""

    kind = 'training'


class LeakageError(EegrcError):
    """训练集与验证集存在交叉（数据泄露）。"""

    exit_code = 4
    kind = 'leakage'
