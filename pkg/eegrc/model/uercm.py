"""UERCM 前向、损失与手工推导的反向传播（numpy float64）。

结构：线性投影 → 可学习位置表 → 单层多头自注意力 → BatchNorm → 句子头 / 词头。
补齐位置不参与注意力的键、损失与 BatchNorm 统计，并在进入两个头之前置零。
"""

from __future__ import annotations

from enum import StrEnum
from typing import TYPE_CHECKING

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.special import softmax

from eegrc.model.params import TRAINABLE
from eegrc.utils.errors import StructuralError, TrainingError
from eegrc.utils.types import Task


if TYPE_CHECKING:
    from eegrc.model.data import TrainingBatch
    from eegrc.model.params import ModelParams


PROB_CLAMP = 1e-7


class Mode(StrEnum):
    """前向模式。"""

    TRAIN = 'train'
    """BatchNorm 使用批统计量。"""
    EVAL = 'eval'
    """BatchNorm 使用滑动统计量。"""


class ForwardTrace(BaseModel):
    """一次前向计算的全部中间量。"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    mode: Mode
    x: np.ndarray
    mask: np.ndarray
    u: np.ndarray
    """投影 U = X W_h + b_h。"""
    u_pos: np.ndarray
    """U' = U + P。"""
    q: np.ndarray
    """(B, heads, T, dk)。"""
    k: np.ndarray
    v: np.ndarray
    attention: np.ndarray
    """(B, heads, T, T) 注意力权重。"""
    heads_out: np.ndarray
    """拼接后的多头输出 (B, T, h)。"""
    z: np.ndarray
    """注意力层输出 Z。"""
    bn_mean: np.ndarray
    bn_var: np.ndarray
    """BatchNorm 使用的均值与（有偏）方差。"""
    x_hat: np.ndarray
    """标准化后、仿射前的 Z。"""
    z_norm: np.ndarray
    """Z'（补齐位置为 0）。"""
    sentence_logits: np.ndarray
    """(B, 2)。"""
    token_logits: np.ndarray
    """(B, T, 2)。"""
    sentence_prob: np.ndarray
    """(B,) 完全相关概率。"""
    token_prob: np.ndarray
    """(B, T) 答案词概率。"""


def _split_heads(a: np.ndarray, heads: int) -> np.ndarray:
    b, t, h = a.shape
    return a.reshape(b, t, heads, h // heads).transpose(0, 2, 1, 3)


def _merge_heads(a: np.ndarray) -> np.ndarray:
    b, n, t, dk = a.shape
    return a.transpose(0, 2, 1, 3).reshape(b, t, n * dk)


def masked_softmax(scores: np.ndarray, key_mask: np.ndarray) -> np.ndarray:
    """对最后一维做 softmax，被屏蔽的键权重严格为 0。

    Args:
        scores: (..., T) 分数。
        key_mask: 可广播到 scores 的 0/1 掩码。

    Returns:
        权重；每行至少需要一个有效键。
    """
    valid = np.broadcast_to(key_mask > 0, scores.shape)
    shifted = np.where(valid, scores, -np.inf)
    shifted = shifted - shifted.max(axis=-1, keepdims=True)
    e = np.where(valid, np.exp(np.where(valid, shifted, 0.0)), 0.0)
    return e / e.sum(axis=-1, keepdims=True)


def forward(batch: TrainingBatch, params: ModelParams, mode: Mode | str = Mode.TRAIN) -> ForwardTrace:
    """前向计算（纯函数，不更新滑动统计）。

    Args:
        batch: 补齐到 t_max 的批次。
        params: 模型参数。
        mode: train 使用批统计量，eval 使用滑动统计量。

    Returns:
        ForwardTrace。

    Raises:
        StructuralError: 批次形状与配置不符或某句没有有效词时抛出。
    """
    cfg = params.config
    mode = Mode(mode)
    x = np.asarray(batch.x, dtype=np.float64)
    mask = np.asarray(batch.mask, dtype=np.float64)
    if x.ndim != 3 or x.shape[1:] != (cfg.t_max, cfg.d) or mask.shape != x.shape[:2]:
        raise StructuralError(f'batch shape {x.shape} does not match (B, {cfg.t_max}, {cfg.d})')
    if not (mask.sum(axis=1) > 0).all():
        raise StructuralError('every sentence in a batch needs at least one valid word')
    p = params.tensors
    m3 = mask[:, :, None]

    u = x @ p['W_h'] + p['b_h']
    u_pos = u + p['P']
    q = _split_heads(u_pos @ p['W_q'] + p['b_q'], cfg.heads)
    k = _split_heads(u_pos @ p['W_k'] + p['b_k'], cfg.heads)
    v = _split_heads(u_pos @ p['W_v'] + p['b_v'], cfg.heads)
    scale = 1.0 / np.sqrt(cfg.h // cfg.heads)
    scores = (q @ k.transpose(0, 1, 3, 2)) * scale
    attention = masked_softmax(scores, mask[:, None, None, :])
    heads_out = _merge_heads(attention @ v)
    z = heads_out @ p['W_out'] + p['b_out']

    if mode is Mode.TRAIN:
        count = mask.sum()
        mean = (z * m3).sum(axis=(0, 1)) / count
        var = (((z - mean) ** 2) * m3).sum(axis=(0, 1)) / count
    else:
        mean, var = p['running_mean'].copy(), p['running_var'].copy()
    x_hat = (z - mean) / np.sqrt(var + cfg.bn_eps)
    z_norm = (p['gamma'] * x_hat + p['beta']) * m3

    relu = np.maximum(z_norm, 0.0)
    sentence_logits = relu.reshape(relu.shape[0], -1) @ p['W_s'] + p['b_s']
    token_logits = relu @ p['W_o'] + p['b_o']
    return ForwardTrace(
        mode=mode,
        x=x,
        mask=mask,
        u=u,
        u_pos=u_pos,
        q=q,
        k=k,
        v=v,
        attention=attention,
        heads_out=heads_out,
        z=z,
        bn_mean=mean,
        bn_var=var,
        x_hat=x_hat,
        z_norm=z_norm,
        sentence_logits=sentence_logits,
        token_logits=token_logits,
        sentence_prob=softmax(sentence_logits, axis=-1)[:, 1],
        token_prob=softmax(token_logits, axis=-1)[..., 1],
    )


def _bce(prob: np.ndarray, label: np.ndarray) -> np.ndarray:
    pc = np.clip(prob, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return -(label * np.log(pc) + (1.0 - label) * np.log(1.0 - pc))


def _bce_logit_grad(prob: np.ndarray, label: np.ndarray) -> np.ndarray:
    """BCE 对 (logit₁ − logit₀) 的导数；被截断的概率梯度为 0。"""
    clamped = (prob < PROB_CLAMP) | (prob > 1.0 - PROB_CLAMP)
    return np.where(clamped, 0.0, prob - label)


def loss(trace: ForwardTrace, batch: TrainingBatch, task: Task | str) -> float:
    """批平均交叉熵。

    句子任务为每句一个 BCE；答案抽取任务为每句有效词 BCE 之和。两者再对批求平均。

    Args:
        trace: 前向结果。
        batch: 批次。
        task: 任务。

    Returns:
        标量损失。
    """
    if Task(task) is Task.SENTENCE_CLASSIFICATION:
        return float(_bce(trace.sentence_prob, batch.y_s).mean())
    per_token = _bce(trace.token_prob, batch.y_o) * trace.mask
    return float(per_token.sum(axis=1).mean())


def backward(
    trace: ForwardTrace, batch: TrainingBatch, params: ModelParams, task: Task | str
) -> dict[str, np.ndarray]:
    """对 loss 求所有可训练参数的梯度。

    Args:
        trace: 前向结果（通常为 train 模式）。
        batch: 批次。
        params: 前向时使用的参数。
        task: 任务。

    Returns:
        名称 → 梯度，键与 TRAINABLE 一致。

    Raises:
        TrainingError: 任一梯度含非有限值时抛出（信息中包含参数名）。
    """
    cfg = params.config
    p = params.tensors
    grads = {name: np.zeros_like(p[name]) for name in TRAINABLE}
    n_batch = trace.x.shape[0]
    mask = trace.mask
    m3 = mask[:, :, None]
    relu = np.maximum(trace.z_norm, 0.0)

    if Task(task) is Task.SENTENCE_CLASSIFICATION:
        g = _bce_logit_grad(trace.sentence_prob, batch.y_s) / n_batch
        d_logits = np.stack([-g, g], axis=-1)
        flat = relu.reshape(n_batch, -1)
        grads['W_s'] = flat.T @ d_logits
        grads['b_s'] = d_logits.sum(axis=0)
        d_relu = (d_logits @ p['W_s'].T).reshape(relu.shape)
    else:
        g = _bce_logit_grad(trace.token_prob, batch.y_o) * mask / n_batch
        d_logits = np.stack([-g, g], axis=-1)
        grads['W_o'] = np.einsum('bti,btj->ij', relu, d_logits)
        grads['b_o'] = d_logits.sum(axis=(0, 1))
        d_relu = d_logits @ p['W_o'].T

    d_norm = d_relu * (trace.z_norm > 0) * m3
    grads['gamma'] = (d_norm * trace.x_hat).sum(axis=(0, 1))
    grads['beta'] = d_norm.sum(axis=(0, 1))
    d_xhat = d_norm * p['gamma']
    inv_std = 1.0 / np.sqrt(trace.bn_var + cfg.bn_eps)
    if trace.mode is Mode.TRAIN:
        count = mask.sum()
        mean_d = d_xhat.sum(axis=(0, 1)) / count
        mean_dx = (d_xhat * trace.x_hat).sum(axis=(0, 1)) / count
        d_z = inv_std * (d_xhat - mean_d - trace.x_hat * mean_dx) * m3
    else:
        d_z = d_xhat * inv_std

    grads['W_out'] = np.einsum('bti,btj->ij', trace.heads_out, d_z)
    grads['b_out'] = d_z.sum(axis=(0, 1))
    d_heads = _split_heads(d_z @ p['W_out'].T, cfg.heads)

    a = trace.attention
    d_a = d_heads @ trace.v.transpose(0, 1, 3, 2)
    d_v = a.transpose(0, 1, 3, 2) @ d_heads
    d_scores = a * (d_a - (d_a * a).sum(axis=-1, keepdims=True))
    scale = 1.0 / np.sqrt(cfg.h // cfg.heads)
    d_q = (d_scores @ trace.k) * scale
    d_k = (d_scores.transpose(0, 1, 3, 2) @ trace.q) * scale

    d_u_pos = np.zeros_like(trace.u_pos)
    for name, d_proj in (('q', d_q), ('k', d_k), ('v', d_v)):
        merged = _merge_heads(d_proj)
        grads[f'W_{name}'] = np.einsum('bti,btj->ij', trace.u_pos, merged)
        grads[f'b_{name}'] = merged.sum(axis=(0, 1))
        d_u_pos += merged @ p[f'W_{name}'].T

    grads['P'] = d_u_pos.sum(axis=0)
    grads['W_h'] = np.einsum('bti,btj->ij', trace.x, d_u_pos)
    grads['b_h'] = d_u_pos.sum(axis=(0, 1))

    for name, grad in grads.items():
        if not np.isfinite(grad).all():
            raise TrainingError(f'non-finite gradient for {name}')
    return grads


def update_running_stats(params: ModelParams, trace: ForwardTrace) -> None:
    """用 train 模式的批统计量原地更新 BatchNorm 滑动均值与方差。

    Args:
        params: 模型参数（原地修改）。
        trace: train 模式前向结果。
    """
    if trace.mode is not Mode.TRAIN:
        return
    m = params.config.bn_momentum
    params.tensors['running_mean'] *= 1.0 - m
    params.tensors['running_mean'] += m * trace.bn_mean
    params.tensors['running_var'] *= 1.0 - m
    params.tensors['running_var'] += m * trace.bn_var
