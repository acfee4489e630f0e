"""测试会话目录与 epoch 归档的读写。"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import pytest

from eegrc.config.schema import SynthConfig
from eegrc.signal.io import MANIFEST, read_epochs, read_session, write_epochs, write_session
from eegrc.signal.preprocess import extract_epochs
from eegrc.synth.generator import generate_session
from eegrc.utils.errors import DataError, StructuralError


if TYPE_CHECKING:
    from pathlib import Path


class TestSessionDirectory:
    """会话目录测试。"""

    def test_written_files(self, tmp_path: Path) -> None:
        """测试会话目录包含清单、信号、触发、标签与问题表。"""
        rec, _ = generate_session(3, SynthConfig(), seed=1)
        out = write_session(rec, tmp_path / 's')
        names = {p.name for p in out.iterdir()}
        assert {MANIFEST, 'signals.f32le', 'triggers.csv', 'labels.csv', 'questions.csv'} <= names
        assert (out / 'signals.f32le').stat().st_size == 4 * rec.data.size

    def test_read_back(self, tmp_path: Path) -> None:
        """测试读回的记录与写入一致（信号为 float32 精度）。"""
        rec, _ = generate_session(4, SynthConfig(), seed=2)
        back = read_session(write_session(rec, tmp_path / 's'))
        assert back.participant_id == rec.participant_id
        assert back.channel_names == rec.channel_names
        assert back.triggers == rec.triggers
        assert back.labels == rec.labels
        np.testing.assert_allclose(back.data, rec.data, rtol=1e-6, atol=1e-4)

    def test_missing_manifest(self, tmp_path: Path) -> None:
        """测试缺少清单时抛出数据错误。"""
        with pytest.raises(DataError, match=MANIFEST):
            read_session(tmp_path)

    def test_truncated_signal(self, tmp_path: Path) -> None:
        """测试信号文件被截断时抛出结构错误。"""
        rec, _ = generate_session(2, SynthConfig(), seed=3)
        out = write_session(rec, tmp_path / 's')
        raw = (out / 'signals.f32le').read_bytes()
        (out / 'signals.f32le').write_bytes(raw[:-8])
        with pytest.raises(StructuralError, match='expected'):
            read_session(out)

    def test_non_finite_signal(self, tmp_path: Path) -> None:
        """测试信号含 NaN 时抛出数据错误。"""
        rec, _ = generate_session(2, SynthConfig(), seed=3)
        out = write_session(rec, tmp_path / 's')
        data = np.fromfile(out / 'signals.f32le', dtype='<f4')
        data[10] = np.nan
        data.tofile(out / 'signals.f32le')
        with pytest.raises(DataError, match='non-finite'):
            read_session(out)

    def test_questions_default_to_trial(self, tmp_path: Path) -> None:
        """测试缺少 questions.csv 时 question_id 取 trial_id。"""
        rec, _ = generate_session(3, SynthConfig(), seed=4)
        out = write_session(rec, tmp_path / 's')
        (out / 'questions.csv').unlink()
        back = read_session(out)
        assert all(lab.question_id == lab.trial_id for lab in back.labels)


class TestEpochArchive:
    """epoch 归档测试。"""

    def test_read_back(self, tmp_path: Path) -> None:
        """测试 epoch 归档读回后标签、顺序与数据一致。"""
        rec, _ = generate_session(3, SynthConfig(), seed=5)
        epochs, _ = extract_epochs(rec)
        back = read_epochs(write_epochs(epochs, tmp_path / 'e'))
        assert [e.label for e in back] == [e.label for e in epochs]
        assert back[0].t0_ms == epochs[0].t0_ms
        np.testing.assert_allclose(back[-1].data, epochs[-1].data, rtol=1e-6, atol=1e-4)

    def test_empty_archive(self, tmp_path: Path) -> None:
        """测试空归档读回为空列表。"""
        assert read_epochs(write_epochs([], tmp_path / 'e')) == []

    def test_header_count_mismatch(self, tmp_path: Path) -> None:
        """测试头记录数与数据不符时抛出结构错误。"""
        rec, _ = generate_session(2, SynthConfig(), seed=6)
        epochs, _ = extract_epochs(rec)
        out = write_epochs(epochs, tmp_path / 'e')
        lines = (out / 'epochs.csv').read_text(encoding='utf-8').splitlines()
        (out / 'epochs.csv').write_text('\n'.join(lines[:-1]) + '\n', encoding='utf-8')
        with pytest.raises(StructuralError, match='header records'):
            read_epochs(out)
