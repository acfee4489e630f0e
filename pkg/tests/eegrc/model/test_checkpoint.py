"""测试二进制检查点。"""

from __future__ import annotations

import struct
from typing import TYPE_CHECKING

import numpy as np
import pytest

from eegrc.config.schema import ModelConfig
from eegrc.model.checkpoint import MAGIC, dumps, load_checkpoint, loads, save_checkpoint
from eegrc.model.params import ModelParams, param_shapes
from eegrc.utils.errors import DataError, StructuralError


if TYPE_CHECKING:
    from pathlib import Path


CONFIG = ModelConfig(d=4, h=8, heads=4, t_max=3, lr=0.01, seed=9)


class TestCheckpoint:
    """检查点测试。"""

    def test_exact_round_trip(self, tmp_path: Path) -> None:
        """测试保存再读取后配置与所有张量逐位相同。"""
        params = ModelParams.initialize(CONFIG)
        params.tensors['running_var'][:] = 1.5
        back = load_checkpoint(save_checkpoint(params, tmp_path / 'm' / 'checkpoint.bin'))
        assert back.config == CONFIG
        for name in param_shapes(CONFIG):
            np.testing.assert_array_equal(back[name], params[name])

    def test_deterministic_bytes(self) -> None:
        """测试同样的参数序列化为同样的字节。"""
        params = ModelParams.initialize(CONFIG)
        assert dumps(params) == dumps(params.copy())
        assert dumps(params).startswith(MAGIC)

    def test_bad_magic(self) -> None:
        """测试魔数错误时抛出结构错误。"""
        blob = dumps(ModelParams.initialize(CONFIG))
        with pytest.raises(StructuralError, match='bad magic'):
            loads(b'XXXXXX' + blob[6:])

    def test_unsupported_version(self) -> None:
        """测试版本号不支持时抛出结构错误。"""
        blob = dumps(ModelParams.initialize(CONFIG))
        patched = blob[: len(MAGIC)] + struct.pack('<H', 7) + blob[len(MAGIC) + 2 :]
        with pytest.raises(StructuralError, match='version 7'):
            loads(patched)

    def test_truncated(self) -> None:
        """测试截断的检查点抛出结构错误。"""
        blob = dumps(ModelParams.initialize(CONFIG))
        with pytest.raises(StructuralError, match='truncated'):
            loads(blob[:-5])

    def test_trailing_bytes(self) -> None:
        """测试末尾多余字节被拒绝。"""
        blob = dumps(ModelParams.initialize(CONFIG))
        with pytest.raises(StructuralError, match='trailing bytes'):
            loads(blob + b'\0\0')

    def test_missing_file(self, tmp_path: Path) -> None:
        """测试文件不存在时抛出数据错误。"""
        with pytest.raises(DataError, match='missing checkpoint'):
            load_checkpoint(tmp_path / 'none.bin')
