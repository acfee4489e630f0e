"""把多次评估合并成 Δ 指标汇总表（每行一个打分器，每列一个任务 × 指标 × 划分）。"""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING

import pandas as pd
from loguru import logger

from eegrc.eval.evaluate import EvalReport
from eegrc.signal.io import write_csv
from eegrc.utils.errors import DataError
from eegrc.utils.types import Scheme, Task


if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence


_SHORT = {Task.ANSWER_EXTRACTION: 'extraction', Task.SENTENCE_CLASSIFICATION: 'classification'}


def delta_rows(reports: Iterable[EvalReport]) -> pd.DataFrame:
    """展开为长表：每个 (打分器, 任务, 划分, 指标) 一行。

    Args:
        reports: 评估报告。

    Returns:
        列为 scorer, task, scheme, metric, value, untrained, delta 的表。
    """
    rows = []
    for r in reports:
        rows.append(
            {'scorer': r.scorer, 'task': str(r.task), 'scheme': str(r.scheme), 'metric': 'auc',
             'value': r.auc, 'untrained': r.untrained_auc, 'delta': r.delta_auc}
        )
        if r.map is not None:
            rows.append(
                {'scorer': r.scorer, 'task': str(r.task), 'scheme': str(r.scheme), 'metric': 'map',
                 'value': r.map, 'untrained': r.untrained_map, 'delta': r.delta_map}
            )
    return pd.DataFrame(rows, columns=['scorer', 'task', 'scheme', 'metric', 'value', 'untrained', 'delta'])


def delta_table(reports: Sequence[EvalReport]) -> pd.DataFrame:
    """Δ 汇总宽表。

    列名形如 ``extraction.auc.lopo``；缺失的组合为空。

    Args:
        reports: 评估报告。

    Returns:
        以打分器为索引的宽表。

    Raises:
        DataError: 没有报告或同一组合出现多次时抛出。
    """
    if not reports:
        raise DataError('no evaluation reports to combine')
    long = delta_rows(reports)
    dup = long.duplicated(['scorer', 'task', 'scheme', 'metric'])
    if dup.any():
        first = long[dup].iloc[0]
        raise DataError(f'duplicate report for {first.scorer} {first.task} {first.scheme} {first.metric}')
    long['column'] = [
        f'{_SHORT[Task(t)]}.{m}.{s}' for t, m, s in zip(long['task'], long['metric'], long['scheme'], strict=True)
    ]
    wide = long.pivot(index='scorer', columns='column', values='delta')
    order = [
        f'{_SHORT[t]}.{m}.{s}'
        for t in Task
        for m in ('auc', 'map')
        for s in Scheme
        if f'{_SHORT[t]}.{m}.{s}' in wide.columns
    ]
    return wide[order].sort_index()


def format_delta_table(table: pd.DataFrame) -> str:
    """渲染为等宽文本，Δ 带符号保留三位小数。

    Args:
        table: delta_table 的输出。

    Returns:
        文本表。
    """
    return table.to_string(float_format=lambda v: f'{v:+.3f}', na_rep='-') + '\n'


def write_delta_table(reports: Sequence[EvalReport], directory: str | Path) -> tuple[Path, Path]:
    """写 delta.csv（长表）与 delta.txt（宽表）。

    Args:
        reports: 评估报告。
        directory: 输出目录。

    Returns:
        (delta.csv, delta.txt)。
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    table = delta_table(reports)
    csv_path = out / 'delta.csv'
    txt_path = out / 'delta.txt'
    write_csv(csv_path, delta_rows(reports))
    txt_path.write_text(format_delta_table(table), encoding='utf-8')
    logger.info('combined {} reports into {}', len(reports), txt_path)
    return csv_path, txt_path
