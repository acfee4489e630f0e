"""命令行入口：synth | preprocess | erp | features | train | evaluate | report。

每个子命令把结果写入 --out 目录，并附带记录已解析配置与代码版本的 run.lock。
出错时向 stderr 输出一行 ``error[<类别>]: <信息>``，退出码见 eegrc.utils.errors。
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
import yaml
from loguru import logger
from pydantic import ValidationError

from eegrc import __version__
from eegrc.baselines.scoring import WordScoreRow, write_score_tables
from eegrc.config.schema import ConfigSchema, TimeWindows
from eegrc.erp.plot import plot_roi_waveforms
from eegrc.erp.stats import component_frame, component_table
from eegrc.erp.waveform import (
    GfpSeries,
    electrode_window_means,
    global_field_power,
    grand_average,
    segment_time_windows,
    waveform_frame,
)
from eegrc.eval.evaluate import (
    EvalReport,
    LogisticScorer,
    UercmScorer,
    UntrainedScorer,
    evaluate,
    fold_permutation_test,
)
from eegrc.eval.report import delta_table, format_delta_table, write_delta_table
from eegrc.eval.splits import holdout_questions, select_units, split_cvot, split_lopo
from eegrc.features.extract import word_feature_vector
from eegrc.features.table import read_feature_table, write_feature_table
from eegrc.model.checkpoint import save_checkpoint
from eegrc.model.data import build_sentence_samples, rescale
from eegrc.model.train import grid_search, predict_samples, train
from eegrc.signal.io import MANIFEST, read_epochs, read_session, write_csv, write_epochs, write_yaml
from eegrc.signal.preprocess import preprocess_session
from eegrc.synth.generator import generate_cohort, generate_session, write_cohort
from eegrc.utils.errors import ConfigError, DataError, EegrcError, ParameterError
from eegrc.utils.types import Region, Scheme, Task


if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from eegrc.eval.evaluate import Scorer
    from eegrc.signal.recording import EpochMatrix


WORKERS_ENV = 'EEGRC_WORKERS'
LOG_LEVEL_ENV = 'EEGRC_LOG_LEVEL'
RUN_LOCK = 'run.lock'


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV, '1')
    try:
        n = int(raw)
    except ValueError:
        raise ParameterError(f'{WORKERS_ENV} must be an integer, got {raw!r}') from None
    if n < 1:
        raise ParameterError(f'{WORKERS_ENV} must be positive, got {n}')
    return n


def _load_config(path: str | None) -> ConfigSchema:
    if path is None:
        return ConfigSchema()
    if not Path(path).is_file():
        raise ConfigError(f'config file {path} does not exist')
    try:
        return ConfigSchema.from_yaml(path)
    except ValidationError as exc:
        raise ConfigError(f'invalid config {path}: {exc.errors()[0]["msg"]}') from exc


def _apply_overrides(config: ConfigSchema, args: argparse.Namespace) -> ConfigSchema:
    updates = {
        'h': getattr(args, 'hidden', None),
        'heads': getattr(args, 'heads', None),
        'lr': getattr(args, 'lr', None),
        'batch_size': getattr(args, 'batch_size', None),
        'patience': getattr(args, 'patience', None),
        'max_epochs': getattr(args, 'max_epochs', None),
        'seed': args.seed,
    }
    model = config.model.model_validate(
        config.model.model_dump() | {k: v for k, v in updates.items() if v is not None}
    )
    evaluation = config.evaluation
    if getattr(args, 'folds', None) is not None:
        evaluation = evaluation.model_validate(evaluation.model_dump() | {'cvot_folds': args.folds})
    return config.model_copy(update={'model': model, 'evaluation': evaluation})


def _write_lock(out: Path, args: argparse.Namespace, config: ConfigSchema) -> None:
    out.mkdir(parents=True, exist_ok=True)
    arguments = {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items()) if k != 'handler'}
    write_yaml(
        out / RUN_LOCK,
        {'version': __version__, 'arguments': arguments, 'config': config.model_dump(mode='json')},
    )


def _directories(root: str | Path) -> list[Path]:
    """root 本身是会话/归档目录时返回它，否则返回其下所有含清单的子目录。

    Args:
        root: 目录。

    Returns:
        目录列表（排序）。

    Raises:
        DataError: 找不到任何目录时抛出。
    """
    base = Path(root)
    if (base / MANIFEST).is_file():
        return [base]
    found = sorted(p for p in base.glob('*') if (p / MANIFEST).is_file()) if base.is_dir() else []
    if not found:
        raise DataError(f'no session or epoch directories under {base}')
    return found


def _read_all_epochs(root: str | Path) -> list[EpochMatrix]:
    epochs: list[EpochMatrix] = []
    for path in _directories(root):
        epochs.extend(read_epochs(path))
    if not epochs:
        raise DataError(f'no epochs under {root}')
    return epochs


def _fan_out[T, R](fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    workers = _workers()
    if workers == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def cmd_synth(args: argparse.Namespace, config: ConfigSchema) -> Path:
    """生成合成会话。

    Args:
        args: 命令行参数。
        config: 配置。

    Returns:
        输出目录。
    """
    synth = config.synth
    effects = synth.effects.scaled(args.effect_scale)
    updates = {'artifact_rate': args.artifact_rate, 'noise_uv': args.noise_uv}
    effects = effects.model_copy(update={k: v for k, v in updates.items() if v is not None})
    synth = synth.model_copy(update={'effects': effects})
    if args.jitter is not None:
        synth = synth.model_copy(update={'gain_jitter': args.jitter})
    if args.participants == 1:
        sessions = [generate_session(args.trials, synth, args.seed, roi_map=config.erp.roi_map, channels=config.channels)]
    else:
        sessions = generate_cohort(
            args.participants, args.trials, synth, args.seed, roi_map=config.erp.roi_map, channels=config.channels
        )
    out = Path(args.out)
    write_cohort(sessions, out)
    _write_lock(out, args, config.model_copy(update={'synth': synth}))
    return out


def cmd_preprocess(args: argparse.Namespace, config: ConfigSchema) -> Path:
    """预处理会话目录并写 epoch 归档与剔除报告。

    Args:
        args: 命令行参数。
        config: 配置。

    Returns:
        输出目录。
    """
    out = Path(args.out)
    sessions = _directories(args.sessions)

    def _one(path: Path) -> tuple[str, list[dict]]:
        rec = read_session(path)
        result = preprocess_session(rec, config.preprocess)
        write_epochs(result.kept, out / rec.participant_id)
        rows = [
            {'participant_id': rec.participant_id, 'trial_id': e.label.trial_id,
             'word_index': e.label.word_index, 'reason': 'artifact'}
            for e in result.rejected
        ]
        rows += [
            {'participant_id': rec.participant_id, 'trial_id': t.trial_id,
             'word_index': t.word_index, 'reason': 'boundary'}
            for t in result.skipped
        ]
        logger.info(
            '{}: kept {}, rejected {}, skipped {}',
            rec.participant_id, len(result.kept), len(result.rejected), len(result.skipped),
        )
        return rec.participant_id, rows

    out.mkdir(parents=True, exist_ok=True)
    results = _fan_out(_one, sessions)
    rows = [r for _, part in results for r in part]
    write_csv(out / 'rejections.csv', pd.DataFrame(rows, columns=['participant_id', 'trial_id', 'word_index', 'reason']))
    _write_lock(out, args, config)
    return out


def _pooled_gfp(waveforms: Sequence) -> GfpSeries:
    series = [global_field_power(w) for w in waveforms]
    return GfpSeries(times_ms=series[0].times_ms, values=np.mean([s.values for s in series], axis=0))


def cmd_erp(args: argparse.Namespace, config: ConfigSchema) -> Path:
    """总平均波形、GFP、时间窗、方差分析表与 SVG 图。

    Args:
        args: 命令行参数。
        config: 配置。

    Returns:
        输出目录。
    """
    erp = config.erp
    out = Path(args.out)
    (out / 'waveforms').mkdir(parents=True, exist_ok=True)
    epochs = _read_all_epochs(args.epochs)
    waveforms = grand_average(epochs)
    for w in waveforms:
        write_csv(out / 'waveforms' / f'{w.condition}.csv', waveform_frame(w))
    gfp = pd.DataFrame({'time_ms': global_field_power(waveforms[0]).times_ms})
    for w in waveforms:
        gfp[str(w.condition)] = global_field_power(w).values
    write_csv(out / 'gfp.csv', gfp)
    windows = erp.windows
    if args.segment:
        windows = segment_time_windows(_pooled_gfp(waveforms), erp.windows, erp.smoothing_ms, erp.snap_radius_ms)
    write_yaml(out / 'windows.yaml', {k: list(v) for k, v in windows.as_dict().items()})
    write_csv(out / 'topography.csv', electrode_window_means(waveforms, windows))
    try:
        tests = component_table(epochs, erp.roi_map, windows, gg_threshold=erp.gg_threshold)
    except ParameterError as exc:
        logger.warning('no component statistics: {}', exc)
    else:
        write_csv(out / 'anova.csv', component_frame(tests))
        write_yaml(out / 'anova.yaml', {'tests': [t.model_dump(mode='json') for t in tests]})
    for region in Region:
        plot_roi_waveforms(waveforms, region, out / 'plots' / f'{region}.svg', erp.roi_map, windows)
    _write_lock(out, args, config)
    return out


def cmd_features(args: argparse.Namespace, config: ConfigSchema) -> Path:
    """每个词 69 维特征。

    Args:
        args: 命令行参数。
        config: 配置。

    Returns:
        输出目录。
    """
    windows = config.erp.windows
    if args.windows is not None:
        windows = TimeWindows.model_validate(yaml.safe_load(Path(args.windows).read_text(encoding='utf-8')))
    epochs = _read_all_epochs(args.epochs)
    vectors = _fan_out(lambda e: word_feature_vector(e, config.features, config.erp.roi_map, windows), epochs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_feature_table(vectors, out / 'features.csv', config.features)
    _write_lock(out, args, config)
    return out


def cmd_train(args: argparse.Namespace, config: ConfigSchema) -> Path:
    """训练一个 UERCM 并写检查点、标准化统计量与训练记录。

    Args:
        args: 命令行参数。
        config: 配置。

    Returns:
        输出目录。
    """
    task = Task(args.task)
    samples = build_sentence_samples(read_feature_table(args.features))
    kept, held = holdout_questions([s.question_id for s in samples], config.evaluation.inner_val_fraction, args.seed)
    train_raw = select_units(samples, kept, 'question_id')
    train_set, val_set, scaler = rescale(train_raw, select_units(samples, held, 'question_id'))
    model = config.model
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.grid:
        result = grid_search(train_raw, config.grid, model, task, args.seed, config.evaluation.cvot_folds)
        model = result.best
        write_yaml(out / 'grid.yaml', result.model_dump(mode='json'))
    params, history = train(train_set, val_set, model, task, progress=args.progress)
    save_checkpoint(params, out / 'checkpoint.bin')
    write_yaml(out / 'scaler.yaml', scaler.model_dump(mode='json'))
    write_yaml(out / 'history.yaml', history.model_dump(mode='json'))
    predictions = predict_samples(params, val_set)
    write_score_tables(
        [
            WordScoreRow(participant_id=s.participant_id, trial_id=s.trial_id, word_index=i, score=float(p))
            for s, (_, words) in zip(val_set, predictions, strict=True)
            for i, p in zip(s.word_indices, words, strict=True)
        ],
        out,
    )
    _write_lock(out, args, config.model_copy(update={'model': model}))
    return out


def _scorer(name: str, config: ConfigSchema) -> Scorer:
    if name == 'uercm':
        return UercmScorer(config.model, config.evaluation.inner_val_fraction)
    if name == 'logistic':
        return LogisticScorer()
    return UntrainedScorer()


def cmd_evaluate(args: argparse.Namespace, config: ConfigSchema) -> Path:
    """按 CVOT 或 LOPO 评估一个打分器。

    Args:
        args: 命令行参数。
        config: 配置。

    Returns:
        输出目录。
    """
    task = Task(args.task)
    samples = build_sentence_samples(read_feature_table(args.features))
    if Scheme(args.scheme) is Scheme.CVOT:
        plan = split_cvot([s.question_id for s in samples], config.evaluation.cvot_folds, args.seed)
    else:
        plan = split_lopo([s.participant_id for s in samples])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    plan.save(out / 'split.json')
    report = evaluate(
        _scorer(args.scorer, config),
        samples,
        plan,
        task,
        seed=args.seed,
        draws=config.evaluation.untrained_draws,
        workers=_workers(),
        progress=args.progress,
    )
    report.save(out)
    significance = {}
    for metric in ('auc', 'map'):
        try:
            significance[metric] = fold_permutation_test(report, metric, config.evaluation.n_permutations, args.seed)
        except ParameterError as exc:
            logger.warning('no permutation test for {}: {}', metric, exc)
    write_yaml(out / 'significance.yaml', significance)
    _write_lock(out, args, config)
    return out


def cmd_report(args: argparse.Namespace, config: ConfigSchema) -> Path:
    """合并多次评估为 Δ 汇总表。

    Args:
        args: 命令行参数。
        config: 配置。

    Returns:
        输出目录。
    """
    reports = [EvalReport.load(p) for p in args.reports]
    out = Path(args.out)
    write_delta_table(reports, out)
    print(format_delta_table(delta_table(reports)), end='')
    _write_lock(out, args, config)
    return out


def _model_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--hidden', type=int, help='隐藏维度 h')
    parser.add_argument('--heads', type=int, help='注意力头数')
    parser.add_argument('--lr', type=float, help='学习率')
    parser.add_argument('--batch-size', type=int, help='批大小（默认 8）')
    parser.add_argument('--patience', type=int, help='早停耐心（默认 5）')
    parser.add_argument('--max-epochs', type=int, help='最大 epoch 数')
    parser.add_argument('--progress', action='store_true', help='显示进度条')


def build_parser() -> argparse.ArgumentParser:
    """构造参数解析器。

    Returns:
        ArgumentParser。
    """
    parser = argparse.ArgumentParser(prog='eegrc', description='EEG 阅读理解流水线')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('--config', help='YAML 配置文件')
    parser.add_argument('--log-level', default=None, help=f'日志级别（默认取 {LOG_LEVEL_ENV} 或 INFO）')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('synth', help='生成合成会话')
    p.add_argument('--participants', type=int, default=2)
    p.add_argument('--trials', type=int, default=150)
    p.add_argument('--artifact-rate', type=float)
    p.add_argument('--noise-uv', type=float)
    p.add_argument('--effect-scale', type=float, default=1.0)
    p.add_argument('--jitter', type=float)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser('preprocess', help='预处理会话为 epoch 归档')
    p.add_argument('--sessions', required=True, help='会话目录或其父目录')
    p.set_defaults(handler=cmd_preprocess)

    p = sub.add_parser('erp', help='ERP 波形、时间窗与方差分析')
    p.add_argument('--epochs', required=True, help='epoch 归档或其父目录')
    p.add_argument('--segment', action='store_true', help='按 GFP 极小值重新划分时间窗')
    p.set_defaults(handler=cmd_erp)

    p = sub.add_parser('features', help='提取词级特征')
    p.add_argument('--epochs', required=True, help='epoch 归档或其父目录')
    p.add_argument('--windows', help='erp 子命令输出的 windows.yaml')
    p.set_defaults(handler=cmd_features)

    p = sub.add_parser('train', help='训练 UERCM')
    p.add_argument('--features', required=True, help='特征表 CSV')
    p.add_argument('--task', choices=[t.value for t in Task], default=Task.ANSWER_EXTRACTION.value)
    p.add_argument('--grid', action='store_true', help='先做超参数网格搜索')
    _model_flags(p)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser('evaluate', help='CVOT / LOPO 评估')
    p.add_argument('--features', required=True, help='特征表 CSV')
    p.add_argument('--task', choices=[t.value for t in Task], default=Task.ANSWER_EXTRACTION.value)
    p.add_argument('--scheme', choices=[s.value for s in Scheme], default=Scheme.CVOT.value)
    p.add_argument('--scorer', choices=['uercm', 'logistic', 'untrained'], default='uercm')
    p.add_argument('--folds', type=int, help='CVOT 折数（默认 10）')
    _model_flags(p)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser('report', help='合并评估报告为 Δ 表')
    p.add_argument('reports', nargs='+', help='report.yaml 或其所在目录')
    p.set_defaults(handler=cmd_report)

    for action in sub.choices.values():
        action.add_argument('--seed', type=int, default=0)
        action.add_argument('--out', required=True, help='输出目录')
    return parser


def _configure_logging(level: str | None) -> None:
    logger.remove()
    logger.add(
        sys.stderr,
        level=(level or os.environ.get(LOG_LEVEL_ENV) or 'INFO').upper(),
        format='<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {message}',
    )


def main(argv: Sequence[str] | None = None) -> int:
    """CLI 入口。

    Args:
        argv: 参数列表，None 表示取 sys.argv。

    Returns:
        退出码：0 成功，2 配置错误，3 数据错误，4 数据泄露。
    """
    args = build_parser().parse_args(argv)
    try:
        _configure_logging(args.log_level)
        config = _apply_overrides(_load_config(args.config), args)
        out = args.handler(args, config)
    except EegrcError as exc:
        print(f'error[{exc.kind}]: {exc}', file=sys.stderr)
        return exc.exit_code
    except ValidationError as exc:
        print(f'error[{DataError.kind}]: {exc.errors()[0]["msg"]}', file=sys.stderr)
        return DataError.exit_code
    except ValueError as exc:
        print(f'error[{ConfigError.kind}]: {exc}', file=sys.stderr)
        return ConfigError.exit_code
    logger.info('{} finished: {}', args.command, out)
    return 0


if __name__ == '__main__':
    sys.exit(main())
