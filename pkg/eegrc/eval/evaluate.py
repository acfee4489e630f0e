"""按划分方案评估打分器，并与未训练基线比较（Δ 指标）。"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import TYPE_CHECKING, Protocol

import numpy as np
import pandas as pd
import yaml
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field
from tqdm import tqdm

from eegrc.baselines.logistic import LogisticWordScorer, fit_logistic_scorer
from eegrc.baselines.scoring import aggregate_sentence_score
from eegrc.baselines.untrained import untrained_draws
from eegrc.erp.stats import permutation_paired_test
from eegrc.eval.metrics import auc, auc_draws, map_draws, mean_average_precision
from eegrc.eval.splits import check_disjoint, holdout_questions, select_units, unit_of
from eegrc.model.data import rescale
from eegrc.model.train import predict_samples, score_items, train
from eegrc.signal.io import write_csv, write_yaml
from eegrc.utils.errors import DataError, MetricError, ParameterError
from eegrc.utils.types import Scheme, Task


if TYPE_CHECKING:
    from collections.abc import Sequence

    from eegrc.config.schema import ModelConfig
    from eegrc.eval.splits import Fold, SplitPlan
    from eegrc.model.data import SentenceSample
    from eegrc.model.params import ModelParams


Prediction = tuple[float, np.ndarray]  # (句子分数, 每词分数)


class Predictor(Protocol):
    """已拟合的打分器。"""

    def predict(self, samples: Sequence[SentenceSample]) -> list[Prediction]:
        """为每个句子给出分数。"""
        ...


class Scorer(Protocol):
    """可在训练折上拟合的打分器。"""

    name: str

    def fit(self, train_samples: Sequence[SentenceSample], task: Task, seed: int) -> Predictor:
        """在训练句子上拟合。"""
        ...


class UercmPredictor:
    """持有训练好的 UERCM 参数。"""

    def __init__(self, params: ModelParams) -> None:
        """包装参数。

        Args:
            params: 模型参数。
        """
        self.params = params

    def predict(self, samples: Sequence[SentenceSample]) -> list[Prediction]:
        """eval 模式推理。

        Args:
            samples: 已标准化的句子。

        Returns:
            每句 (句子概率, 每词概率)。
        """
        return predict_samples(self.params, samples)


class UercmScorer:
    """UERCM；训练折内按问题留出一部分用于早停。"""

    name = 'uercm'

    def __init__(self, config: ModelConfig, inner_val_fraction: float = 0.1) -> None:
        """设置模型配置。

        Args:
            config: 模型配置（seed 会被每折的种子覆盖）。
            inner_val_fraction: 早停留出比例。
        """
        self.config = config
        self.inner_val_fraction = inner_val_fraction

    def fit(self, train_samples: Sequence[SentenceSample], task: Task, seed: int) -> UercmPredictor:
        """训练一个模型。

        Args:
            train_samples: 训练折句子。
            task: 任务。
            seed: 本折种子。

        Returns:
            UercmPredictor。
        """
        kept, held = holdout_questions([s.question_id for s in train_samples], self.inner_val_fraction, seed)
        config = self.config.model_copy(update={'seed': seed})
        params, history = train(
            select_units(train_samples, kept, 'question_id'),
            select_units(train_samples, held, 'question_id'),
            config,
            task,
        )
        logger.debug('fold model best epoch {} (inner auc {})', history.best_epoch, history.best_val_auc)
        return UercmPredictor(params)


class LogisticPredictor:
    """逻辑回归词分数 + 句子分数聚合。"""

    def __init__(self, scorer: LogisticWordScorer) -> None:
        """包装词打分器。

        Args:
            scorer: 已拟合的逻辑回归。
        """
        self.scorer = scorer

    def predict(self, samples: Sequence[SentenceSample]) -> list[Prediction]:
        """词概率，句子分数由词分数聚合。

        Args:
            samples: 已标准化的句子。

        Returns:
            每句 (聚合分数, 每词概率)。
        """
        out = []
        for s in samples:
            words = self.scorer.predict(s.features)
            out.append((aggregate_sentence_score(words), words))
        return out


class LogisticScorer:
    """L2 逻辑回归词打分器。

    答案抽取以答案词为正例；句子分类以完全相关句中的词为正例，再聚合成句子分数。
    """

    name = 'logistic'

    def __init__(self, l2: float = 1e-3, lr: float = 1.0, steps: int = 500) -> None:
        """设置超参数。

        Args:
            l2: L2 系数。
            lr: 步长。
            steps: 迭代次数。
        """
        self.l2 = l2
        self.lr = lr
        self.steps = steps

    def fit(self, train_samples: Sequence[SentenceSample], task: Task, _seed: int) -> LogisticPredictor:
        """全批量拟合（与种子无关）。

        Args:
            train_samples: 训练折句子。
            task: 任务。
            _seed: 未使用。

        Returns:
            LogisticPredictor。
        """
        x = np.concatenate([s.features for s in train_samples])
        if task is Task.SENTENCE_CLASSIFICATION:
            y = np.concatenate([np.full(s.length, s.sentence_label, dtype=float) for s in train_samples])
        else:
            y = np.concatenate([s.token_labels for s in train_samples])
        return LogisticPredictor(fit_logistic_scorer(x, y, self.l2, self.lr, self.steps))


class RandomPredictor:
    """均匀随机分数。"""

    def __init__(self, seed: int) -> None:
        """设置种子。

        Args:
            seed: 随机种子。
        """
        self.seed = seed

    def predict(self, samples: Sequence[SentenceSample]) -> list[Prediction]:
        """每句、每词各一个 uniform(0, 1) 分数。

        Args:
            samples: 句子。

        Returns:
            随机分数。
        """
        rng = np.random.default_rng(self.seed)
        return [(float(rng.uniform()), rng.uniform(size=s.length)) for s in samples]


class UntrainedScorer:
    """未训练模型：预测完全随机。"""

    name = 'untrained'

    def fit(self, _train_samples: Sequence[SentenceSample], _task: Task, seed: int) -> RandomPredictor:
        """不做任何拟合。

        Args:
            _train_samples: 未使用。
            _task: 未使用。
            seed: 随机种子。

        Returns:
            RandomPredictor。
        """
        return RandomPredictor(seed)


class FoldMetrics(BaseModel):
    """一折的指标。"""

    model_config = ConfigDict(frozen=True)

    index: int
    """折序号。"""
    validation: tuple[str, ...]
    """验证单元。"""
    n_items: int
    """验证条目数（词或句子）。"""
    auc: float | None = None
    """模型 AUC；单一类别时为空。"""
    map: float | None = None
    """模型 MAP（仅句子分类）。"""
    untrained_auc: float | None = None
    """未训练基线 AUC（多次抽样的均值）。"""
    untrained_map: float | None = None
    """未训练基线 MAP。"""


class EvalReport(BaseModel):
    """一次评估的汇总。"""

    model_config = ConfigDict(frozen=True)

    scorer: str
    """打分器名称。"""
    task: Task
    """任务。"""
    scheme: Scheme
    """划分方式。"""
    seed: int
    """随机种子。"""
    auc: float = Field(ge=0, le=1)
    """合并所有验证预测后的 AUC。"""
    map: float | None = None
    """合并后的 MAP（仅句子分类）。"""
    untrained_auc: float = Field(ge=0, le=1)
    """未训练基线 AUC。"""
    untrained_map: float | None = None
    """未训练基线 MAP。"""
    delta_auc: float
    """auc − untrained_auc。"""
    delta_map: float | None = None
    """map − untrained_map。"""
    macro_auc: float | None = None
    """各折 AUC 的平均。"""
    draws: int
    """未训练基线的抽样次数。"""
    folds: list[FoldMetrics] = Field(default_factory=list)
    """各折指标。"""

    def save(self, directory: str | Path) -> Path:
        """写 report.yaml 与 folds.csv。

        Args:
            directory: 输出目录。

        Returns:
            report.yaml 路径。
        """
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        write_yaml(out / 'report.yaml', self.model_dump(mode='json'))
        frame = pd.DataFrame([f.model_dump(exclude={'validation'}) for f in self.folds])
        frame.insert(1, 'validation', [' '.join(f.validation) for f in self.folds])
        write_csv(out / 'folds.csv', frame)
        return out / 'report.yaml'

    @classmethod
    def load(cls, path: str | Path) -> EvalReport:
        """读取 report.yaml。

        Args:
            path: 文件或其所在目录。

        Returns:
            EvalReport。

        Raises:
            DataError: 文件不存在时抛出。
        """
        src = Path(path)
        if src.is_dir():
            src = src / 'report.yaml'
        if not src.is_file():
            raise DataError(f'missing evaluation report {src}')
        return cls.model_validate(yaml.safe_load(src.read_text(encoding='utf-8')))


class _FoldOutcome(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    metrics: FoldMetrics
    scores: np.ndarray
    labels: np.ndarray
    sentence_scores: np.ndarray
    sentence_labels: np.ndarray
    queries: list[str]


def _query_key(s: SentenceSample) -> str:
    return f'{s.participant_id}/{s.question_id}'


def _safe(fn: object, *args: object) -> float | None:
    try:
        return float(np.mean(fn(*args)))  # type: ignore[operator]
    except MetricError as exc:
        logger.warning('metric skipped: {}', exc)
        return None


def _evaluate_fold(
    index: int,
    fold: Fold,
    plan: SplitPlan,
    samples: Sequence[SentenceSample],
    scorer: Scorer,
    task: Task,
    seed: int,
    draws: int,
) -> _FoldOutcome:
    train_raw = select_units(samples, fold.train, plan.unit)
    val_raw = select_units(samples, fold.validation, plan.unit)
    if not train_raw or not val_raw:
        raise DataError(f'fold {index} has an empty train or validation split')
    check_disjoint([unit_of(s, plan.unit) for s in train_raw], [unit_of(s, plan.unit) for s in val_raw], plan.unit)
    check_disjoint([s.key for s in train_raw], [s.key for s in val_raw], 'sentence')
    train_set, val_set, _ = rescale(train_raw, val_raw)
    predictor = scorer.fit(train_set, task, seed + index)
    predictions = predictor.predict(val_set)
    scores, labels = score_items(predictions, val_set, task)
    sentence_scores = np.array([p for p, _ in predictions])
    sentence_labels = np.array([s.sentence_label for s in val_set])
    queries = [_query_key(s) for s in val_set]
    random = untrained_draws(scores.size, draws, seed + index)
    metrics = FoldMetrics(
        index=index,
        validation=fold.validation,
        n_items=int(scores.size),
        auc=_safe(auc, scores, labels),
        untrained_auc=_safe(auc_draws, random, labels),
    )
    if task is Task.SENTENCE_CLASSIFICATION:
        metrics = metrics.model_copy(
            update={
                'map': _safe(_map_single, sentence_scores, sentence_labels, queries),
                'untrained_map': _safe(map_draws, random, sentence_labels, queries),
            }
        )
    return _FoldOutcome(
        metrics=metrics,
        scores=scores,
        labels=labels,
        sentence_scores=sentence_scores,
        sentence_labels=sentence_labels,
        queries=queries,
    )


def _map_single(scores: np.ndarray, labels: np.ndarray, queries: Sequence[str]) -> float:
    groups: dict[str, list[int]] = {}
    for i, q in enumerate(queries):
        groups.setdefault(q, []).append(i)
    return mean_average_precision([(scores[idx], labels[idx]) for idx in groups.values()])


def evaluate(
    scorer: Scorer,
    samples: Sequence[SentenceSample],
    plan: SplitPlan,
    task: Task | str,
    seed: int = 0,
    draws: int = 1000,
    workers: int = 1,
    progress: bool = False,
) -> EvalReport:
    """逐折拟合与预测，合并所有验证预测计算指标，并与未训练基线比较。

    每折的标准化器只在该折训练句子上拟合。折之间相互独立，workers > 1 时并行执行。

    Args:
        scorer: 打分器。
        samples: 全部句子样本（未标准化）。
        plan: 划分方案。
        task: 任务。
        seed: 随机种子。
        draws: 未训练基线的抽样次数。
        workers: 并行线程数。
        progress: 是否显示进度条。

    Returns:
        EvalReport。

    Raises:
        LeakageError: 某折训练与验证单元重叠时抛出。
        DataError: 某折为空时抛出。
        ParameterError: draws 非正时抛出。
    """
    task = Task(task)
    if draws < 1:
        raise ParameterError(f'draws must be positive, got {draws}')
    if any(s.standardized for s in samples):
        raise DataError('evaluate expects raw features; scaling is fitted per fold')

    def _run(item: tuple[int, Fold]) -> _FoldOutcome:
        return _evaluate_fold(item[0], item[1], plan, samples, scorer, task, seed, draws)

    jobs = list(enumerate(plan.folds))
    desc = f'{scorer.name} {task} {plan.scheme}'
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(tqdm(pool.map(_run, jobs), total=len(jobs), desc=desc, disable=not progress))
    else:
        outcomes = [_run(job) for job in tqdm(jobs, desc=desc, disable=not progress)]

    scores = np.concatenate([o.scores for o in outcomes])
    labels = np.concatenate([o.labels for o in outcomes])
    random = untrained_draws(scores.size, draws, seed)
    model_auc = auc(scores, labels)
    untrained_auc = float(auc_draws(random, labels).mean())
    fold_aucs = [o.metrics.auc for o in outcomes if o.metrics.auc is not None]
    report = {
        'scorer': scorer.name,
        'task': task,
        'scheme': plan.scheme,
        'seed': seed,
        'auc': model_auc,
        'untrained_auc': untrained_auc,
        'delta_auc': model_auc - untrained_auc,
        'macro_auc': float(np.mean(fold_aucs)) if fold_aucs else None,
        'draws': draws,
        'folds': [o.metrics for o in outcomes],
    }
    if task is Task.SENTENCE_CLASSIFICATION:
        sentence_scores = np.concatenate([o.sentence_scores for o in outcomes])
        sentence_labels = np.concatenate([o.sentence_labels for o in outcomes])
        queries = [q for o in outcomes for q in o.queries]
        model_map = _safe(_map_single, sentence_scores, sentence_labels, queries)
        untrained_map = _safe(map_draws, random, sentence_labels, queries)
        report |= {
            'map': model_map,
            'untrained_map': untrained_map,
            'delta_map': None if model_map is None or untrained_map is None else model_map - untrained_map,
        }
    result = EvalReport.model_validate(report)
    logger.info(
        '{} {} {}: auc {:.4f} (Δ {:+.4f}){}',
        result.scorer,
        result.task,
        result.scheme,
        result.auc,
        result.delta_auc,
        '' if result.map is None or result.delta_map is None else f', map {result.map:.4f} (Δ {result.delta_map:+.4f})',
    )
    return result


def fold_permutation_test(
    report: EvalReport, metric: str = 'auc', n_permutations: int = 10_000, seed: int = 0
) -> float:
    """各折模型指标与未训练指标的配对符号翻转置换检验。

    Args:
        report: 评估报告。
        metric: 'auc' 或 'map'。
        n_permutations: 置换次数。
        seed: 随机种子。

    Returns:
        双侧 p 值。

    Raises:
        ParameterError: 指标名非法或可用的折少于 2 个时抛出。
    """
    if metric not in ('auc', 'map'):
        raise ParameterError(f'unknown metric {metric!r}')
    pairs = [
        (getattr(f, metric), getattr(f, f'untrained_{metric}'))
        for f in report.folds
        if getattr(f, metric) is not None and getattr(f, f'untrained_{metric}') is not None
    ]
    if len(pairs) < 2:
        raise ParameterError(f'need at least 2 folds with {metric} values, got {len(pairs)}')
    model, baseline = zip(*pairs, strict=True)
    return permutation_paired_test(model, baseline, n_permutations, seed)
