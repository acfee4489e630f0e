"""词分数 → 句子分数的聚合，以及分数表的读写。"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from eegrc.signal.io import write_csv
from eegrc.utils.errors import ParameterError
from eegrc.utils.types import ParticipantId, TrialId, WordIndex


if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence
    from pathlib import Path


class WordScoreRow(BaseModel):
    """一个词的预测分数。"""

    model_config = ConfigDict(frozen=True)

    participant_id: ParticipantId
    trial_id: TrialId
    word_index: WordIndex
    score: float = Field(ge=0.0, le=1.0, allow_inf_nan=False)
    """预测概率。"""


def aggregate_sentence_score(word_scores: Sequence[float] | np.ndarray) -> float:
    """句子分数 = (max + mean + median) / 3；偶数个时中位数取中间两数的平均。

    Args:
        word_scores: 句内词分数。

    Returns:
        句子分数。

    Raises:
        ParameterError: 输入为空时抛出。
    """
    w = np.asarray(word_scores, dtype=np.float64)
    if w.size == 0:
        raise ParameterError('cannot aggregate an empty sentence')
    return float((w.max() + w.mean() + np.median(w)) / 3.0)


def sentence_scores(rows: Iterable[WordScoreRow]) -> pd.DataFrame:
    """按 (被试, 句子) 聚合词分数。

    Args:
        rows: 词分数。

    Returns:
        列为 participant_id, trial_id, score 的表。
    """
    frame = word_score_frame(rows)
    grouped = frame.groupby(['participant_id', 'trial_id'], sort=True)['score']
    out = grouped.apply(lambda s: aggregate_sentence_score(s.to_numpy())).reset_index()
    return out[['participant_id', 'trial_id', 'score']]


def word_score_frame(rows: Iterable[WordScoreRow]) -> pd.DataFrame:
    """词分数表。

    Args:
        rows: 词分数。

    Returns:
        列为 participant_id, trial_id, word_index, score 的表。
    """
    return pd.DataFrame(
        [r.model_dump() for r in rows], columns=['participant_id', 'trial_id', 'word_index', 'score']
    )


def write_score_tables(rows: Sequence[WordScoreRow], directory: Path) -> tuple[Path, Path]:
    """写词分数表与句子分数表。

    Args:
        rows: 词分数。
        directory: 输出目录。

    Returns:
        (word_scores.csv, sentence_scores.csv)。
    """
    directory.mkdir(parents=True, exist_ok=True)
    words = directory / 'word_scores.csv'
    sentences = directory / 'sentence_scores.csv'
    write_csv(words, word_score_frame(rows))
    write_csv(sentences, sentence_scores(rows))
    return words, sentences
