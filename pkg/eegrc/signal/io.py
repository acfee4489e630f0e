"""会话目录与 epoch 归档的读写。

会话目录::

    manifest.yaml   participant_id / rate_hz / 通道顺序 / 文件名
    signals.f32le   通道优先、小端 32 位浮点（µV）
    triggers.csv    sample_index,code,trial_id,word_index
    labels.csv      trial_id,word_index,word_type,sentence_relevance
    questions.csv   trial_id,question_id（可选）

epoch 归档使用相同的浮点布局（epoch → 通道 → 采样点），并在 epochs.csv 中为每个 epoch 写一条头记录。
"""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
import pandas as pd
import yaml
from pydantic import ValidationError

from eegrc.signal.recording import EpochMatrix, SessionRecording, TriggerEvent, WordLabel
from eegrc.utils.errors import DataError, StructuralError


if TYPE_CHECKING:
    from collections.abc import Sequence


FORMAT_VERSION = 1
MANIFEST = 'manifest.yaml'
SIGNALS = 'signals.f32le'
TRIGGERS = 'triggers.csv'
LABELS = 'labels.csv'
QUESTIONS = 'questions.csv'
EPOCH_DATA = 'epochs.f32le'
EPOCH_HEADERS = 'epochs.csv'
FLOAT_LE = np.dtype('<f4')

TRIGGER_COLUMNS = ['sample_index', 'code', 'trial_id', 'word_index']
LABEL_COLUMNS = ['trial_id', 'word_index', 'word_type', 'sentence_relevance']
EPOCH_COLUMNS = [
    'participant_id',
    'trial_id',
    'question_id',
    'word_index',
    'word_type',
    'sentence_relevance',
]


def write_yaml(path: Path, payload: dict[str, Any]) -> None:
    """以确定性格式写 YAML。

    Args:
        path: 目标文件。
        payload: 内容。
    """
    path.write_text(yaml.safe_dump(payload, sort_keys=False, allow_unicode=True), encoding='utf-8')


def write_csv(path: Path, frame: pd.DataFrame) -> None:
    """以确定性格式写 CSV（无索引、LF 换行）。

    Args:
        path: 目标文件。
        frame: 表格。
    """
    frame.to_csv(path, index=False, lineterminator='\n')


def _read_manifest(directory: Path) -> dict[str, Any]:
    path = directory / MANIFEST
    if not path.is_file():
        raise DataError(f'missing {MANIFEST} in {directory}')
    return yaml.safe_load(path.read_text(encoding='utf-8'))


def _read_floats(path: Path, shape: tuple[int, ...]) -> np.ndarray:
    """读取小端 float32 文件并检查长度与有限性。

    Raises:
        DataError: 文件缺失或含非有限值。
        StructuralError: 元素个数与 shape 不符。
    """
    if not path.is_file():
        raise DataError(f'missing signal file {path}')
    raw = np.fromfile(path, dtype=FLOAT_LE)
    expected = int(np.prod(shape))
    if raw.size != expected:
        raise StructuralError(f'{path.name} holds {raw.size} values, expected {expected} for {shape}')
    if not np.isfinite(raw).all():
        raise DataError(f'{path.name} contains non-finite samples')
    return raw.astype(np.float64).reshape(shape)


def write_session(rec: SessionRecording, directory: str | Path) -> Path:
    """把会话写成会话目录。

    Args:
        rec: 会话记录。
        directory: 目标目录（自动创建）。

    Returns:
        目录路径。
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    write_yaml(
        out / MANIFEST,
        {
            'format_version': FORMAT_VERSION,
            'participant_id': rec.participant_id,
            'rate_hz': float(rec.rate_hz),
            'n_samples': rec.n_samples,
            'channels': list(rec.channel_names),
            'files': {'signals': SIGNALS, 'triggers': TRIGGERS, 'labels': LABELS, 'questions': QUESTIONS},
        },
    )
    rec.data.astype(FLOAT_LE).tofile(out / SIGNALS)
    triggers = pd.DataFrame(
        [
            {
                'sample_index': t.sample_index,
                'code': t.code.value,
                'trial_id': t.trial_id,
                'word_index': t.word_index,
            }
            for t in rec.triggers
        ],
        columns=TRIGGER_COLUMNS,
    )
    triggers['word_index'] = triggers['word_index'].astype('Int64')
    write_csv(out / TRIGGERS, triggers)
    labels = pd.DataFrame(
        [
            {
                'trial_id': lab.trial_id,
                'word_index': lab.word_index,
                'word_type': lab.word_type.value,
                'sentence_relevance': lab.sentence_relevance.value,
            }
            for lab in rec.labels
        ],
        columns=LABEL_COLUMNS,
    )
    write_csv(out / LABELS, labels)
    questions = sorted({(lab.trial_id, lab.question_id) for lab in rec.labels})
    write_csv(out / QUESTIONS, pd.DataFrame(questions, columns=['trial_id', 'question_id']))
    return out


def read_session(directory: str | Path) -> SessionRecording:
    """读取会话目录。

    Args:
        directory: 会话目录。

    Returns:
        SessionRecording。

    Raises:
        DataError: 文件缺失、含非有限值或内容不合法。
        StructuralError: 信号长度与清单不符。
    """
    src = Path(directory)
    manifest = _read_manifest(src)
    files = manifest.get('files', {})
    channels = tuple(manifest['channels'])
    n_samples = int(manifest['n_samples'])
    data = _read_floats(src / files.get('signals', SIGNALS), (len(channels), n_samples))
    triggers_frame = pd.read_csv(src / files.get('triggers', TRIGGERS), dtype={'code': str})
    labels_frame = pd.read_csv(src / files.get('labels', LABELS), dtype={'word_type': str})
    question_path = src / files.get('questions', QUESTIONS)
    question_of: dict[int, int] = {}
    if question_path.is_file():
        qf = pd.read_csv(question_path)
        question_of = dict(zip(qf['trial_id'].astype(int), qf['question_id'].astype(int), strict=True))
    participant = str(manifest['participant_id'])
    try:
        triggers = tuple(
            TriggerEvent(
                sample_index=int(row.sample_index),
                code=row.code,
                trial_id=int(row.trial_id),
                word_index=None if pd.isna(row.word_index) else int(row.word_index),
            )
            for row in triggers_frame.itertuples(index=False)
        )
        labels = tuple(
            WordLabel(
                word_type=row.word_type,
                sentence_relevance=row.sentence_relevance,
                trial_id=int(row.trial_id),
                word_index=int(row.word_index),
                participant_id=participant,
                question_id=question_of.get(int(row.trial_id)),
            )
            for row in labels_frame.itertuples(index=False)
        )
        return SessionRecording(
            data=data,
            rate_hz=float(manifest['rate_hz']),
            channel_names=channels,
            triggers=triggers,
            labels=labels,
            participant_id=participant,
        )
    except ValidationError as exc:
        raise DataError(f'invalid session {src}: {exc.errors()[0]["msg"]}') from exc


def write_epochs(epochs: Sequence[EpochMatrix], directory: str | Path) -> Path:
    """把一组 epoch 写成归档目录。

    Args:
        epochs: 采样率、起点与导联一致的 epoch。
        directory: 目标目录。

    Returns:
        目录路径。

    Raises:
        StructuralError: epoch 形状或元数据不一致。
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    first = epochs[0] if epochs else None
    for e in epochs:
        if (e.data.shape, e.rate_hz, e.t0_ms, e.channel_names) != (
            first.data.shape,
            first.rate_hz,
            first.t0_ms,
            first.channel_names,
        ):
            raise StructuralError('epochs in one archive must share shape, rate, origin and montage')
    write_yaml(
        out / MANIFEST,
        {
            'format_version': FORMAT_VERSION,
            'kind': 'epochs',
            'n_epochs': len(epochs),
            'rate_hz': float(first.rate_hz) if first else None,
            't0_ms': float(first.t0_ms) if first else None,
            'n_samples': first.n_samples if first else 0,
            'channels': list(first.channel_names) if first else [],
        },
    )
    stacked = np.stack([e.data for e in epochs]) if epochs else np.zeros((0,), dtype=np.float64)
    stacked.astype(FLOAT_LE).tofile(out / EPOCH_DATA)
    headers = pd.DataFrame(
        [
            {
                'participant_id': e.label.participant_id,
                'trial_id': e.label.trial_id,
                'question_id': e.label.question_id,
                'word_index': e.label.word_index,
                'word_type': e.label.word_type.value,
                'sentence_relevance': e.label.sentence_relevance.value,
            }
            for e in epochs
        ],
        columns=EPOCH_COLUMNS,
    )
    write_csv(out / EPOCH_HEADERS, headers)
    return out


def read_epochs(directory: str | Path) -> list[EpochMatrix]:
    """读取 epoch 归档。

    Args:
        directory: 归档目录。

    Returns:
        epoch 列表（顺序与写入一致）。

    Raises:
        DataError: 文件缺失或含非有限值。
        StructuralError: 数据长度与头记录不符。
    """
    src = Path(directory)
    manifest = _read_manifest(src)
    n_epochs = int(manifest['n_epochs'])
    if n_epochs == 0:
        return []
    channels = tuple(manifest['channels'])
    shape = (n_epochs, len(channels), int(manifest['n_samples']))
    data = _read_floats(src / EPOCH_DATA, shape)
    headers = pd.read_csv(src / EPOCH_HEADERS, dtype={'participant_id': str})
    if len(headers) != n_epochs:
        raise StructuralError(f'{len(headers)} header records for {n_epochs} epochs')
    epochs = []
    for i, row in enumerate(headers.itertuples(index=False)):
        label = WordLabel(
            word_type=row.word_type,
            sentence_relevance=row.sentence_relevance,
            trial_id=int(row.trial_id),
            word_index=int(row.word_index),
            participant_id=str(row.participant_id),
            question_id=int(row.question_id),
        )
        epochs.append(
            EpochMatrix(
                data=data[i],
                rate_hz=float(manifest['rate_hz']),
                t0_ms=float(manifest['t0_ms']),
                channel_names=channels,
                label=label,
            )
        )
    return epochs
