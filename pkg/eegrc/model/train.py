"""训练循环、早停、网格搜索与推理。"""

from __future__ import annotations

from typing import TYPE_CHECKING, Protocol

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field
from tqdm import tqdm

from eegrc.config.schema import ModelConfig
from eegrc.eval.metrics import auc
from eegrc.eval.splits import select_units, split_cvot, split_lopo
from eegrc.model.data import TrainingBatch, collate, rescale
from eegrc.model.optim import Adam
from eegrc.model.params import ModelParams
from eegrc.model.uercm import Mode, backward, forward, loss, update_running_stats
from eegrc.utils.errors import DataError, ParameterError
from eegrc.utils.types import Scheme, Task


if TYPE_CHECKING:
    from collections.abc import Sequence

    from eegrc.config.schema import ModelGrid
    from eegrc.model.data import SentenceSample


class EarlyStopping:
    """验证 AUC 连续 patience 个 epoch 没有严格提升时停止。"""

    def __init__(self, patience: int) -> None:
        """初始化。

        Args:
            patience: 容忍的无提升 epoch 数。
        """
        self.patience = patience
        self.best_score = -np.inf
        self.best_epoch = -1
        self.epoch = -1
        self.stale = 0

    def update(self, score: float) -> bool:
        """记录一个 epoch 的分数。

        Args:
            score: 验证分数。

        Returns:
            是否为新的最佳分数。
        """
        self.epoch += 1
        if score > self.best_score:
            self.best_score = score
            self.best_epoch = self.epoch
            self.stale = 0
            return True
        self.stale += 1
        return False

    @property
    def should_stop(self) -> bool:
        """是否应停止。

        Returns:
            连续无提升次数是否已达到 patience。
        """
        return self.stale >= self.patience


class TrainingHistory(BaseModel):
    """训练过程记录。"""

    model_config = ConfigDict(frozen=True)

    task: Task
    """任务。"""
    train_loss: list[float] = Field(default_factory=list)
    """每个 epoch 的平均训练损失。"""
    val_auc: list[float] = Field(default_factory=list)
    """每个 epoch 的验证 AUC。"""
    best_epoch: int = -1
    """最佳 epoch（-1 表示未训练）。"""
    best_val_auc: float | None = None
    """最佳验证 AUC。"""
    stopped_early: bool = False
    """是否由早停结束。"""


def predict_samples(
    params: ModelParams, samples: Sequence[SentenceSample], batch_size: int = 64
) -> list[tuple[float, np.ndarray]]:
    """eval 模式下批量推理。

    Args:
        params: 模型参数。
        samples: 句子样本（已标准化）。
        batch_size: 推理批大小。

    Returns:
        每句 (完全相关概率, 每词答案概率)。

    Raises:
        ParameterError: 句长超过 t_max 时抛出。
    """
    out: list[tuple[float, np.ndarray]] = []
    cfg = params.config
    for start in range(0, len(samples), batch_size):
        chunk = samples[start : start + batch_size]
        trace = forward(collate(chunk, cfg.t_max, cfg.d), params, Mode.EVAL)
        out.extend(
            (float(trace.sentence_prob[i]), trace.token_prob[i, : s.length].copy())
            for i, s in enumerate(chunk)
        )
    return out


def predict(params: ModelParams, features: np.ndarray) -> tuple[float, np.ndarray]:
    """单个句子的推理。

    Args:
        params: 模型参数。
        features: (词数, d) 标准化特征。

    Returns:
        (句子概率, 每词概率)。

    Raises:
        ParameterError: 句长超过 t_max 时抛出。
    """
    x = np.asarray(features, dtype=np.float64)
    cfg = params.config
    if x.ndim != 2 or x.shape[0] == 0:
        raise ParameterError(f'expected a (words, {cfg.d}) matrix, got {x.shape}')
    if x.shape[0] > cfg.t_max:
        raise ParameterError(f'sentence has {x.shape[0]} words, exceeds t_max={cfg.t_max}')
    batch_x = np.zeros((1, cfg.t_max, cfg.d))
    batch_x[0, : x.shape[0]] = x
    mask = np.zeros((1, cfg.t_max))
    mask[0, : x.shape[0]] = 1.0
    batch = TrainingBatch(x=batch_x, mask=mask, y_s=np.zeros(1), y_o=np.zeros((1, cfg.t_max)))
    trace = forward(batch, params, Mode.EVAL)
    return float(trace.sentence_prob[0]), trace.token_prob[0, : x.shape[0]].copy()


def score_items(
    predictions: Sequence[tuple[float, np.ndarray]], samples: Sequence[SentenceSample], task: Task | str
) -> tuple[np.ndarray, np.ndarray]:
    """把句子级预测展开为任务对应的 (分数, 标签)。

    Args:
        predictions: predict_samples 的输出。
        samples: 对应的句子样本。
        task: 任务。

    Returns:
        (分数, 标签)；答案抽取按词展开。
    """
    if Task(task) is Task.SENTENCE_CLASSIFICATION:
        scores = np.array([p for p, _ in predictions])
        labels = np.array([s.sentence_label for s in samples])
    else:
        scores = np.concatenate([w for _, w in predictions])
        labels = np.concatenate([s.token_labels for s in samples])
    return scores, labels


def validation_auc(params: ModelParams, samples: Sequence[SentenceSample], task: Task | str) -> float:
    """验证集 AUC。

    Args:
        params: 模型参数。
        samples: 验证句子。
        task: 任务。

    Returns:
        AUC。
    """
    scores, labels = score_items(predict_samples(params, samples), samples, task)
    return auc(scores, labels)


def train(
    train_samples: Sequence[SentenceSample],
    val_samples: Sequence[SentenceSample],
    config: ModelConfig,
    task: Task | str,
    progress: bool = False,
) -> tuple[ModelParams, TrainingHistory]:
    """Adam + mini-batch 训练，按验证 AUC 早停，返回最佳参数。

    给定 seed 时完全确定：初始化与每个 epoch 的洗牌共用一个随机数发生器。

    Args:
        train_samples: 训练句子（已标准化）。
        val_samples: 验证句子（已用训练统计量标准化）。
        config: 模型配置。
        task: 任务。
        progress: 是否显示进度条。

    Returns:
        (最佳参数, 训练记录)。

    Raises:
        DataError: 训练集或验证集为空时抛出。
        TrainingError: 梯度出现非有限值时抛出。
    """
    task = Task(task)
    if not train_samples or not val_samples:
        raise DataError('training and validation splits must both be non-empty')
    rng = np.random.default_rng(config.seed)
    params = ModelParams.initialize(config, rng)
    if config.max_epochs == 0:
        return params, TrainingHistory(task=task)
    optimizer = Adam(params, config.lr)
    stopper = EarlyStopping(config.patience)
    best = params.copy()
    losses: list[float] = []
    scores: list[float] = []
    epochs = tqdm(range(config.max_epochs), desc=f'train {task}', disable=not progress, leave=False)
    for epoch in epochs:
        order = rng.permutation(len(train_samples))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            chunk = [train_samples[i] for i in order[start : start + config.batch_size]]
            batch = collate(chunk, config.t_max, config.d)
            trace = forward(batch, params, Mode.TRAIN)
            epoch_loss += loss(trace, batch, task) * len(chunk)
            optimizer.step(params, backward(trace, batch, params, task))
            update_running_stats(params, trace)
        losses.append(epoch_loss / len(order))
        scores.append(validation_auc(params, val_samples, task))
        if stopper.update(scores[-1]):
            best = params.copy()
        logger.debug('epoch {}: loss {:.4f}, val auc {:.4f}', epoch, losses[-1], scores[-1])
        if stopper.should_stop:
            logger.debug('early stop at epoch {} (best epoch {})', epoch, stopper.best_epoch)
            break
    history = TrainingHistory(
        task=task,
        train_loss=losses,
        val_auc=scores,
        best_epoch=stopper.best_epoch,
        best_val_auc=stopper.best_score,
        stopped_early=stopper.should_stop,
    )
    return best, history


class TrainFn(Protocol):
    """train 的调用签名（便于在网格搜索中替换）。"""

    def __call__(
        self,
        train_samples: Sequence[SentenceSample],
        val_samples: Sequence[SentenceSample],
        config: ModelConfig,
        task: Task | str,
    ) -> tuple[ModelParams, TrainingHistory]: ...


class GridResult(BaseModel):
    """网格搜索结果。"""

    model_config = ConfigDict(frozen=True)

    best: ModelConfig
    """选中的配置。"""
    scores: list[tuple[int, int, float, float]]
    """每个配置的 (h, heads, lr, 平均验证 AUC)，按选择顺序排列。"""
    schemes: tuple[Scheme, ...]
    """参与平均的划分方式。"""


def grid_search(
    samples: Sequence[SentenceSample],
    grid: ModelGrid,
    base: ModelConfig,
    task: Task | str,
    seed: int = 0,
    cvot_folds: int = 10,
    max_folds: int = 1,
    train_fn: TrainFn = train,
) -> GridResult:
    """穷举网格，按 CVOT 与 LOPO 上的平均验证 AUC 选择配置。

    每种划分取前 max_folds 折，标准化器在每折的训练部分上重新拟合；平局依次取较小的 h、较少的 heads、较小的 lr。
    只有一个被试时跳过 LOPO。

    Args:
        samples: 全部句子样本（未标准化）。
        grid: 超参数网格。
        base: 其余字段取自该配置。
        task: 任务。
        seed: CVOT 划分种子。
        cvot_folds: CVOT 折数。
        max_folds: 每种划分参与搜索的折数。
        train_fn: 训练函数。

    Returns:
        GridResult。

    Raises:
        DataError: 没有任何可用的划分或样本已标准化时抛出。
    """
    configs = grid.configs(base)
    plans = []
    try:
        plans.append(split_cvot([s.question_id for s in samples], cvot_folds, seed))
    except ParameterError as exc:
        logger.warning('grid search skips CVOT: {}', exc)
    try:
        plans.append(split_lopo([s.participant_id for s in samples]))
    except ParameterError as exc:
        logger.warning('grid search skips LOPO: {}', exc)
    if not plans:
        raise DataError('grid search needs at least one usable split scheme')
    totals = {i: [] for i in range(len(configs))}
    for plan in plans:
        for fold in plan.folds[:max_folds]:
            train_part, val_part, _ = rescale(
                select_units(samples, fold.train, plan.unit), select_units(samples, fold.validation, plan.unit)
            )
            for i, cfg in enumerate(configs):
                _, history = train_fn(train_part, val_part, cfg, task)
                totals[i].append(history.best_val_auc if history.best_val_auc is not None else 0.5)
    ranked = sorted(
        ((float(np.mean(totals[i])), cfg) for i, cfg in enumerate(configs)),
        key=lambda item: (-item[0], item[1].h, item[1].heads, item[1].lr),
    )
    best = ranked[0][1]
    logger.info('grid search picked h={}, heads={}, lr={} (mean auc {:.4f})', best.h, best.heads, best.lr, ranked[0][0])
    return GridResult(
        best=best,
        scores=[(cfg.h, cfg.heads, cfg.lr, score) for score, cfg in ranked],
        schemes=tuple(p.scheme for p in plans),
    )
