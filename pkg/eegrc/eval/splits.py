"""CVOT（按问题）与 LOPO（按被试）数据划分。"""

from __future__ import annotations

import json
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from eegrc.utils.errors import LeakageError, ParameterError
from eegrc.utils.types import Scheme


if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence


class Fold(BaseModel):
    """一折的训练与验证单元。"""

    model_config = ConfigDict(frozen=True)

    train: tuple[str, ...]
    """训练单元标识。"""
    validation: tuple[str, ...]
    """验证单元标识。"""


class SplitPlan(BaseModel):
    """划分方案；CVOT 的单元为问题，LOPO 的单元为被试。"""

    model_config = ConfigDict(frozen=True)

    scheme: Scheme
    """划分方式。"""
    folds: tuple[Fold, ...]
    """各折。"""
    seed: int | None = None
    """CVOT 洗牌种子。"""

    @model_validator(mode='after')
    def _check_partition(self) -> SplitPlan:
        """验证各折验证集互不相交，且训练集与验证集不重叠。

        Returns:
            验证通过后的 SplitPlan 实例。

        Raises:
            ValueError: 划分不合法时抛出。
        """
        seen: set[str] = set()
        for i, fold in enumerate(self.folds):
            overlap = set(fold.train) & set(fold.validation)
            if overlap:
                raise ValueError(f'fold {i} has ids in both train and validation: {sorted(overlap)[:5]}')
            if seen & set(fold.validation):
                raise ValueError(f'fold {i} validates ids already validated by an earlier fold')
            seen |= set(fold.validation)
        return self

    @property
    def unit(self) -> str:
        """划分单元名称。

        Returns:
            'question_id' 或 'participant_id'。
        """
        return 'question_id' if self.scheme is Scheme.CVOT else 'participant_id'

    def save(self, path: str | Path) -> Path:
        """保存为 JSON。

        Args:
            path: 目标文件。

        Returns:
            路径。
        """
        out = Path(path)
        out.write_text(self.model_dump_json(indent=2), encoding='utf-8')
        return out

    @classmethod
    def load(cls, path: str | Path) -> SplitPlan:
        """从 JSON 读取。

        Args:
            path: 文件路径。

        Returns:
            SplitPlan。
        """
        return cls.model_validate(json.loads(Path(path).read_text(encoding='utf-8')))


def _unique_sorted(ids: Iterable[object]) -> list[str]:
    # 数字标识按数值排序
    return sorted({str(i) for i in ids}, key=lambda s: (0, int(s), '') if s.isdigit() else (1, 0, s))


def split_cvot(question_ids: Iterable[object], k: int = 10, seed: int = 0) -> SplitPlan:
    """问题打乱后分成 k 个近似等大的折；同一问题的句子与词随问题一起移动。

    Args:
        question_ids: 问题标识（可重复）。
        k: 折数。
        seed: 洗牌种子。

    Returns:
        SplitPlan。

    Raises:
        ParameterError: 问题数少于折数或 k < 2 时抛出。
    """
    ids = _unique_sorted(question_ids)
    if k < 2:
        raise ParameterError(f'CVOT needs at least 2 folds, got {k}')
    if len(ids) < k:
        raise ParameterError(f'{len(ids)} questions cannot fill {k} folds')
    order = np.random.default_rng(seed).permutation(len(ids))
    parts = np.array_split(np.asarray(ids, dtype=object)[order], k)
    folds = []
    for i, part in enumerate(parts):
        validation = tuple(_unique_sorted(part))
        train = tuple(_unique_sorted(x for j, p in enumerate(parts) if j != i for x in p))
        folds.append(Fold(train=train, validation=validation))
    return SplitPlan(scheme=Scheme.CVOT, folds=tuple(folds), seed=seed)


def split_lopo(participant_ids: Iterable[object]) -> SplitPlan:
    """每个被试一折：验证该被试，其余被试训练。

    Args:
        participant_ids: 被试标识（可重复）。

    Returns:
        SplitPlan。

    Raises:
        ParameterError: 少于 2 个被试时抛出。
    """
    ids = _unique_sorted(participant_ids)
    if len(ids) < 2:
        raise ParameterError(f'LOPO needs at least 2 participants, got {len(ids)}')
    folds = tuple(Fold(train=tuple(i for i in ids if i != pid), validation=(pid,)) for pid in ids)
    return SplitPlan(scheme=Scheme.LOPO, folds=folds)


def check_disjoint(train_ids: Sequence[object], validation_ids: Sequence[object], unit: str = 'id') -> None:
    """确认训练与验证单元不相交。

    Args:
        train_ids: 训练单元。
        validation_ids: 验证单元。
        unit: 单元名称（用于错误信息）。

    Raises:
        LeakageError: 存在交叉时抛出。
    """
    overlap = {str(i) for i in train_ids} & {str(i) for i in validation_ids}
    if overlap:
        raise LeakageError(f'{unit} {sorted(overlap)[:5]} appear in both train and validation')


def unit_of(item: object, unit: str) -> str:
    """样本在某划分单元下的标识。

    Args:
        item: 带 participant_id / question_id 属性的样本（句子样本或词标签）。
        unit: 'question_id' 或 'participant_id'。

    Returns:
        标识字符串。
    """
    return str(getattr(item, unit))


def select_units[T](items: Sequence[T], ids: Iterable[object], unit: str) -> list[T]:
    """挑出属于给定单元的样本，保持原顺序。

    Args:
        items: 样本。
        ids: 单元标识。
        unit: 单元名称。

    Returns:
        子集。
    """
    wanted = {str(i) for i in ids}
    return [it for it in items if unit_of(it, unit) in wanted]


def holdout_questions(
    question_ids: Iterable[object], fraction: float, seed: int = 0
) -> tuple[list[str], list[str]]:
    """按问题随机留出一部分作为内部验证集（用于早停）。

    Args:
        question_ids: 训练折中的问题标识。
        fraction: 留出比例。
        seed: 随机种子。

    Returns:
        (保留训练的问题, 留出的问题)；至少留出一个，且至少保留一个。

    Raises:
        ParameterError: 问题少于 2 个时抛出。
    """
    ids = _unique_sorted(question_ids)
    if len(ids) < 2:
        raise ParameterError(f'need at least 2 questions for an inner hold-out, got {len(ids)}')
    n_hold = min(len(ids) - 1, max(1, round(fraction * len(ids))))
    order = np.random.default_rng(seed).permutation(len(ids))
    held = {ids[i] for i in order[:n_hold]}
    return [i for i in ids if i not in held], [i for i in ids if i in held]
