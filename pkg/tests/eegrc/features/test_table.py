"""测试特征表读写。"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import pytest

from eegrc.features.extract import WordFeatureVector, feature_names
from eegrc.features.table import order_path, read_feature_table, write_feature_table
from eegrc.signal.recording import WordLabel
from eegrc.utils.errors import DataError, StructuralError
from eegrc.utils.types import SentenceRelevance, WordType


if TYPE_CHECKING:
    from pathlib import Path


def _vectors() -> list[WordFeatureVector]:
    rng = np.random.default_rng(0)
    labels = [
        WordLabel(
            word_type=WordType.ANSWER,
            sentence_relevance=SentenceRelevance.PERFECTLY_RELEVANT,
            trial_id=1,
            word_index=0,
            participant_id='007',
            question_id=4,
        ),
        WordLabel(
            word_type=WordType.ORDINARY,
            sentence_relevance=SentenceRelevance.IRRELEVANT,
            trial_id=2,
            word_index=3,
            participant_id='007',
            question_id=4,
        ),
    ]
    return [WordFeatureVector(values=rng.normal(size=69), label=lab) for lab in labels]


class TestFeatureTable:
    """特征表测试。"""

    def test_read_back(self, tmp_path: Path) -> None:
        """测试写出后读回标签与数值一致，被试编号保留前导零。"""
        vectors = _vectors()
        path = write_feature_table(vectors, tmp_path / 'features.csv')
        back = read_feature_table(path)
        assert [v.label for v in back] == [v.label for v in vectors]
        assert back[0].label.participant_id == '007'
        np.testing.assert_allclose(back[1].values, vectors[1].values, rtol=1e-12)

    def test_order_sidecar(self, tmp_path: Path) -> None:
        """测试维度顺序文件逐行列出列名与特征名。"""
        path = write_feature_table(_vectors(), tmp_path / 'features.csv')
        lines = order_path(path).read_text(encoding='utf-8').splitlines()
        assert order_path(path).name == 'features.order.txt'
        assert len(lines) == 69
        assert lines[0] == f'f0\t{feature_names()[0]}'

    def test_sidecar_mismatch(self, tmp_path: Path) -> None:
        """测试列与顺序文件不符时抛出结构错误。"""
        path = write_feature_table(_vectors(), tmp_path / 'features.csv')
        order_path(path).write_text('f0\tcentral.bp.delta\n', encoding='utf-8')
        with pytest.raises(StructuralError, match='do not match'):
            read_feature_table(path)

    def test_wrong_dimension(self, tmp_path: Path) -> None:
        """测试维度与配置不符的向量不能写出。"""
        v = _vectors()[0]
        short = WordFeatureVector(values=v.values[:10], label=v.label)
        with pytest.raises(StructuralError, match='expected 69'):
            write_feature_table([short], tmp_path / 'features.csv')

    def test_missing_file(self, tmp_path: Path) -> None:
        """测试文件不存在时抛出数据错误。"""
        with pytest.raises(DataError, match='missing feature table'):
            read_feature_table(tmp_path / 'none.csv')
