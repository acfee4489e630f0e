"""测试命令行入口。"""

from __future__ import annotations

from typing import TYPE_CHECKING

import pandas as pd
import pytest
import yaml

from eegrc import __version__
from eegrc.cli import RUN_LOCK, WORKERS_ENV, main
from eegrc.signal.io import LABELS, SIGNALS
from eegrc.synth.generator import TRUTH


if TYPE_CHECKING:
    from pathlib import Path


def _synth(out: Path, *extra: str) -> int:
    return main(['synth', '--participants', '2', '--trials', '3', '--seed', '5', '--out', str(out), *extra])


class TestSynthCommand:
    """synth 子命令测试。"""

    def test_writes_sessions_and_lock(self, tmp_path: Path) -> None:
        """测试每名被试一个会话目录，并写出 run.lock。"""
        assert _synth(tmp_path / 'data') == 0
        for pid in ('p01', 'p02'):
            assert (tmp_path / 'data' / pid / SIGNALS).is_file()
            assert (tmp_path / 'data' / pid / TRUTH).is_file()
        lock = yaml.safe_load((tmp_path / 'data' / RUN_LOCK).read_text(encoding='utf-8'))
        assert lock['version'] == __version__
        assert lock['arguments']['trials'] == 3
        assert lock['config']['synth']['gain_jitter'] == pytest.approx(0.1)

    def test_same_seed_same_bytes(self, tmp_path: Path) -> None:
        """测试相同种子两次生成的信号与标注逐字节相同。"""
        assert _synth(tmp_path / 'a') == 0
        assert _synth(tmp_path / 'b') == 0
        for name in (SIGNALS, LABELS, TRUTH):
            assert (tmp_path / 'a' / 'p02' / name).read_bytes() == (tmp_path / 'b' / 'p02' / name).read_bytes()

    def test_effect_overrides(self, tmp_path: Path) -> None:
        """测试命令行覆盖的效应参数记录在 run.lock 中。"""
        assert _synth(tmp_path / 'data', '--artifact-rate', '0.5', '--noise-uv', '2', '--jitter', '0') == 0
        lock = yaml.safe_load((tmp_path / 'data' / RUN_LOCK).read_text(encoding='utf-8'))
        effects = lock['config']['synth']['effects']
        assert effects['artifact_rate'] == pytest.approx(0.5)
        assert effects['noise_uv'] == pytest.approx(2.0)
        assert lock['config']['synth']['gain_jitter'] == 0.0


class TestExitCodes:
    """错误退出码测试。"""

    def test_missing_config(self, tmp_path: Path) -> None:
        """测试配置文件不存在时退出码为 2。"""
        code = main(['--config', str(tmp_path / 'nope.yaml'), 'synth', '--out', str(tmp_path / 'o')])
        assert code == 2

    def test_invalid_config(self, tmp_path: Path) -> None:
        """测试配置取值非法时退出码为 2。"""
        path = tmp_path / 'bad.yaml'
        path.write_text('model:\n  lr: -1.0\n', encoding='utf-8')
        assert main(['--config', str(path), 'synth', '--out', str(tmp_path / 'o')]) == 2

    def test_missing_sessions(self, tmp_path: Path) -> None:
        """测试会话目录不存在时退出码为 3。"""
        code = main(['preprocess', '--sessions', str(tmp_path / 'none'), '--out', str(tmp_path / 'o')])
        assert code == 3

    def test_missing_feature_table(self, tmp_path: Path) -> None:
        """测试特征表不存在时退出码为 3。"""
        code = main(['evaluate', '--features', str(tmp_path / 'f.csv'), '--out', str(tmp_path / 'o')])
        assert code == 3

    def test_bad_worker_count(self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
        """测试并行数环境变量非法时退出码为 2。"""
        assert _synth(tmp_path / 'data') == 0
        monkeypatch.setenv(WORKERS_ENV, 'many')
        code = main(['preprocess', '--sessions', str(tmp_path / 'data'), '--out', str(tmp_path / 'o')])
        assert code == 2

    def test_version(self, capsys: pytest.CaptureFixture[str]) -> None:
        """测试 --version 输出版本号。"""
        with pytest.raises(SystemExit) as info:
            main(['--version'])
        assert info.value.code == 0
        assert __version__ in capsys.readouterr().out


class TestPipeline:
    """端到端流水线测试。"""

    @pytest.mark.slow
    @pytest.mark.timeout(120)
    def test_synth_to_report(self, tmp_path: Path) -> None:
        """测试 synth → preprocess → erp → features → train → evaluate → report 全部成功。"""
        data, epochs, erp, feats, ev, rep = (tmp_path / n for n in ('data', 'epochs', 'erp', 'feats', 'ev', 'rep'))
        assert main(['synth', '--participants', '2', '--trials', '9', '--seed', '3', '--out', str(data)]) == 0
        assert main(['preprocess', '--sessions', str(data), '--out', str(epochs)]) == 0
        rejections = pd.read_csv(epochs / 'rejections.csv')
        assert list(rejections.columns) == ['participant_id', 'trial_id', 'word_index', 'reason']

        assert main(['erp', '--epochs', str(epochs), '--segment', '--out', str(erp)]) == 0
        assert (erp / 'windows.yaml').is_file()
        assert (erp / 'anova.csv').is_file()
        assert (erp / 'plots' / 'central.svg').is_file()

        windows = erp / 'windows.yaml'
        assert main(['features', '--epochs', str(epochs), '--windows', str(windows), '--out', str(feats)]) == 0
        table = pd.read_csv(feats / 'features.csv')
        assert len(table) > 0

        trained = tmp_path / 'train'
        code = main(['train', '--features', str(feats / 'features.csv'), '--max-epochs', '2', '--out', str(trained)])
        assert code == 0
        for name in ('checkpoint.bin', 'scaler.yaml', 'history.yaml', 'word_scores.csv', 'sentence_scores.csv'):
            assert (trained / name).is_file()

        code = main([
            'evaluate', '--features', str(feats / 'features.csv'), '--scorer', 'untrained',
            '--scheme', 'lopo', '--out', str(ev),
        ])
        assert code == 0
        assert (ev / 'report.yaml').is_file()
        assert (ev / 'split.json').is_file()

        assert main(['report', str(ev), '--out', str(rep)]) == 0
        assert (rep / 'delta.txt').is_file()
