"""特征表 CSV 与维度顺序说明文件。"""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd

from eegrc.features.extract import WordFeatureVector, feature_names
from eegrc.signal.io import write_csv
from eegrc.signal.recording import WordLabel
from eegrc.utils.errors import DataError, StructuralError


if TYPE_CHECKING:
    from collections.abc import Sequence

    from eegrc.config.schema import FeatureConfig


KEY_COLUMNS = ['participant_id', 'trial_id', 'word_index', 'word_type', 'sentence_relevance', 'question_id']


def order_path(path: str | Path) -> Path:
    """特征表对应的维度顺序文件路径。

    Args:
        path: 特征表路径。

    Returns:
        同目录下的 '<stem>.order.txt'。
    """
    p = Path(path)
    return p.with_name(f'{p.stem}.order.txt')


def write_feature_table(
    vectors: Sequence[WordFeatureVector], path: str | Path, config: FeatureConfig | None = None
) -> Path:
    """写特征表与维度顺序文件。

    Args:
        vectors: 特征向量。
        path: CSV 路径。
        config: 特征配置（决定维度名称）。

    Returns:
        CSV 路径。

    Raises:
        StructuralError: 向量维度与配置不符时抛出。
    """
    names = feature_names(config)
    for v in vectors:
        if v.dimension != len(names):
            raise StructuralError(f'vector {v.label.key} has {v.dimension} dims, expected {len(names)}')
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    keys = pd.DataFrame(
        [
            {
                'participant_id': v.label.participant_id,
                'trial_id': v.label.trial_id,
                'word_index': v.label.word_index,
                'word_type': v.label.word_type.value,
                'sentence_relevance': v.label.sentence_relevance.value,
                'question_id': v.label.question_id,
            }
            for v in vectors
        ],
        columns=KEY_COLUMNS,
    )
    values = pd.DataFrame(
        np.stack([v.values for v in vectors]) if vectors else np.zeros((0, len(names))),
        columns=[f'f{i}' for i in range(len(names))],
    )
    write_csv(out, pd.concat([keys, values], axis=1))
    order = [f'f{i}\t{name}' for i, name in enumerate(names)]
    order_path(out).write_text('\n'.join(order) + '\n', encoding='utf-8')
    return out


def read_feature_table(path: str | Path) -> list[WordFeatureVector]:
    """读取特征表。

    Args:
        path: CSV 路径。

    Returns:
        特征向量列表（standardized=False）。

    Raises:
        DataError: 文件缺失或标签不合法时抛出。
        StructuralError: 列与维度顺序文件不符时抛出。
    """
    src = Path(path)
    if not src.is_file():
        raise DataError(f'missing feature table {src}')
    frame = pd.read_csv(src, dtype={'participant_id': str})
    value_columns = [c for c in frame.columns if c not in KEY_COLUMNS]
    sidecar = order_path(src)
    if sidecar.is_file():
        expected = [line.split('\t')[0] for line in sidecar.read_text(encoding='utf-8').splitlines() if line]
        if value_columns != expected:
            raise StructuralError(f'feature columns in {src.name} do not match {sidecar.name}')
    matrix = frame[value_columns].to_numpy(dtype=np.float64)
    vectors = []
    for row, values in zip(frame.itertuples(index=False), matrix, strict=True):
        try:
            label = WordLabel(
                participant_id=str(row.participant_id),
                trial_id=int(row.trial_id),
                word_index=int(row.word_index),
                word_type=row.word_type,
                sentence_relevance=row.sentence_relevance,
                question_id=int(row.question_id) if 'question_id' in frame.columns else None,
            )
            vectors.append(WordFeatureVector(values=values, label=label))
        except ValueError as exc:
            raise DataError(f'invalid feature row {row.participant_id}/{row.trial_id}: {exc}') from exc
    return vectors
