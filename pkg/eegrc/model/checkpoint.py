"""二进制检查点。

布局::

    b'UERCM\\0'                 魔数
    uint16 LE                    格式版本
    uint32 LE + UTF-8 YAML       模型配置
    uint16 LE                    张量个数
    每个张量：
        uint16 LE + UTF-8        名称
        uint8                    维数
        uint32 LE × 维数          形状
        '<f8' × prod(形状)        数据
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np
import yaml
from pydantic import ValidationError

from eegrc.config.schema import ModelConfig
from eegrc.model.params import ModelParams, param_shapes
from eegrc.utils.errors import DataError, StructuralError


MAGIC = b'UERCM\0'
VERSION = 1
FLOAT64_LE = np.dtype('<f8')


def dumps(params: ModelParams) -> bytes:
    """序列化参数。

    Args:
        params: 模型参数。

    Returns:
        检查点字节串。
    """
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack('<H', VERSION))
    config = yaml.safe_dump(params.config.model_dump(), sort_keys=True).encode('utf-8')
    buf.write(struct.pack('<I', len(config)))
    buf.write(config)
    shapes = param_shapes(params.config)
    buf.write(struct.pack('<H', len(shapes)))
    for name in shapes:
        tensor = params[name]
        encoded = name.encode('utf-8')
        buf.write(struct.pack('<H', len(encoded)))
        buf.write(encoded)
        buf.write(struct.pack('<B', tensor.ndim))
        buf.write(struct.pack(f'<{tensor.ndim}I', *tensor.shape))
        buf.write(np.ascontiguousarray(tensor, dtype=FLOAT64_LE).tobytes())
    return buf.getvalue()


def _take(view: memoryview, offset: int, size: int) -> tuple[bytes, int]:
    if offset + size > len(view):
        raise StructuralError('checkpoint is truncated')
    return bytes(view[offset : offset + size]), offset + size


def loads(blob: bytes) -> ModelParams:
    """反序列化并按配置校验每个张量的形状。

    Args:
        blob: 检查点字节串。

    Returns:
        ModelParams。

    Raises:
        StructuralError: 魔数、版本、截断或形状不符时抛出。
        DataError: 配置块不合法时抛出。
    """
    view = memoryview(blob)
    magic, offset = _take(view, 0, len(MAGIC))
    if magic != MAGIC:
        raise StructuralError('not a UERCM checkpoint (bad magic)')
    raw, offset = _take(view, offset, 2)
    (version,) = struct.unpack('<H', raw)
    if version != VERSION:
        raise StructuralError(f'unsupported checkpoint version {version}')
    raw, offset = _take(view, offset, 4)
    (config_len,) = struct.unpack('<I', raw)
    raw, offset = _take(view, offset, config_len)
    try:
        config = ModelConfig.model_validate(yaml.safe_load(raw.decode('utf-8')))
    except (ValidationError, yaml.YAMLError) as exc:
        raise DataError(f'invalid checkpoint config: {exc}') from exc
    expected = param_shapes(config)
    raw, offset = _take(view, offset, 2)
    (count,) = struct.unpack('<H', raw)
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        raw, offset = _take(view, offset, 2)
        (name_len,) = struct.unpack('<H', raw)
        raw, offset = _take(view, offset, name_len)
        name = raw.decode('utf-8')
        raw, offset = _take(view, offset, 1)
        (ndim,) = struct.unpack('<B', raw)
        raw, offset = _take(view, offset, 4 * ndim)
        shape = struct.unpack(f'<{ndim}I', raw)
        if name not in expected:
            raise StructuralError(f'unexpected tensor {name!r} in checkpoint')
        if tuple(shape) != expected[name]:
            raise StructuralError(f'{name} has shape {shape}, config expects {expected[name]}')
        raw, offset = _take(view, offset, 8 * int(np.prod(shape, dtype=np.int64)))
        tensors[name] = np.frombuffer(raw, dtype=FLOAT64_LE).reshape(shape).astype(np.float64)
    if offset != len(view):
        raise StructuralError(f'{len(view) - offset} trailing bytes after the last tensor')
    return ModelParams(config, tensors)


def save_checkpoint(params: ModelParams, path: str | Path) -> Path:
    """写检查点文件。

    Args:
        params: 模型参数。
        path: 目标文件。

    Returns:
        路径。
    """
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(dumps(params))
    return out


def load_checkpoint(path: str | Path) -> ModelParams:
    """读检查点文件。

    Args:
        path: 文件路径。

    Returns:
        ModelParams。

    Raises:
        DataError: 文件不存在时抛出。
        StructuralError: 内容不合法时抛出。
    """
    src = Path(path)
    if not src.is_file():
        raise DataError(f'missing checkpoint {src}')
    return loads(src.read_bytes())
