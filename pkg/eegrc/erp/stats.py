"""重复测量方差分析、Bonferroni 事后检验与配对置换检验。"""

from __future__ import annotations

import itertools
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field
from scipy import stats

from eegrc.config.schema import RoiMap, TimeWindows
from eegrc.erp.waveform import subject_condition_matrix
from eegrc.utils.errors import DataError, ParameterError
from eegrc.utils.types import WORD_TYPE_ORDER, Region


if TYPE_CHECKING:
    from collections.abc import Sequence

    from eegrc.signal.recording import EpochMatrix


MEASURES = ('n100_p200', 'n400', 'p600')  # 每个脑区检验的成分测量
_TINY = 1e-12


class AnovaResult(BaseModel):
    """单因素重复测量方差分析结果。"""

    model_config = ConfigDict(frozen=True)

    f_value: float = Field(ge=0)
    """F 统计量（可能为 inf）。"""
    df: tuple[float, float]
    """(条件, 误差) 自由度；校正时已乘以 epsilon。"""
    p_value: float = Field(ge=0, le=1)
    """使用 df 查表得到的 p 值。"""
    df_uncorrected: tuple[int, int]
    """未校正自由度 (k−1, (k−1)(n−1))。"""
    p_uncorrected: float = Field(ge=0, le=1)
    """未校正 p 值。"""
    gg_epsilon: float = Field(gt=0, le=1)
    """Greenhouse-Geisser epsilon。"""
    corrected: bool
    """是否应用了 GG 校正。"""
    conditions: tuple[str, ...]
    """条件名称（列顺序）。"""
    condition_means: tuple[float, ...]
    """每个条件的被试均值。"""
    pairwise: dict[str, float]
    """'a vs b' → Bonferroni 校正 p 值。"""


def _check_matrix(values: np.ndarray) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ParameterError(f'expected a subject × condition matrix, got shape {arr.shape}')
    n, k = arr.shape
    if n < 2 or k < 2:
        raise ParameterError(f'need at least 2 subjects and 2 conditions, got {n} × {k}')
    if not np.isfinite(arr).all():
        raise DataError('subject × condition matrix has missing or non-finite cells')
    return arr


def _condition_names(k: int, conditions: Sequence[str] | None) -> tuple[str, ...]:
    if conditions is None:
        return tuple(f'c{j}' for j in range(k))
    if len(conditions) != k:
        raise ParameterError(f'{len(conditions)} condition names for {k} columns')
    return tuple(str(c) for c in conditions)


def greenhouse_geisser_epsilon(values: np.ndarray) -> float:
    """由条件协方差矩阵估计 Greenhouse-Geisser epsilon。

    Args:
        values: n × k 矩阵。

    Returns:
        epsilon，截断到 [1/(k−1), 1]；协方差退化时为 1。
    """
    arr = _check_matrix(values)
    k = arr.shape[1]
    cov = np.cov(arr, rowvar=False)
    centered = cov - cov.mean(axis=0, keepdims=True) - cov.mean(axis=1, keepdims=True) + cov.mean()
    denom = (k - 1) * float(np.sum(centered**2))
    if denom <= _TINY:
        return 1.0
    eps = float(np.trace(centered)) ** 2 / denom
    return float(np.clip(eps, 1.0 / (k - 1), 1.0))


def rm_anova(
    values: np.ndarray,
    conditions: Sequence[str] | None = None,
    gg_threshold: float = 0.95,
) -> AnovaResult:
    """单因素重复测量方差分析。

    epsilon 低于 gg_threshold 时两个自由度都乘以 epsilon 后再查 F 分布；结果同时保留未校正的自由度与 p 值。

    Args:
        values: n（被试）× k（条件）矩阵，不允许缺失。
        conditions: 列名。
        gg_threshold: 触发 GG 校正的 epsilon 阈值。

    Returns:
        AnovaResult（含 Bonferroni 两两比较）。

    Raises:
        ParameterError: 少于 2 个被试或 2 个条件时抛出。
        DataError: 存在缺失或非有限值时抛出。
    """
    arr = _check_matrix(values)
    n, k = arr.shape
    names = _condition_names(k, conditions)
    grand = arr.mean()
    ss_total = float(np.sum((arr - grand) ** 2))
    ss_cond = n * float(np.sum((arr.mean(axis=0) - grand) ** 2))
    ss_subj = k * float(np.sum((arr.mean(axis=1) - grand) ** 2))
    ss_err = max(ss_total - ss_cond - ss_subj, 0.0)
    df1, df2 = k - 1, (k - 1) * (n - 1)
    scale = _TINY * max(ss_total, 1.0)
    if ss_cond <= scale:
        f_value = 0.0
    elif ss_err <= scale:
        f_value = float('inf')
    else:
        f_value = (ss_cond / df1) / (ss_err / df2)

    def _sf(d1: float, d2: float) -> float:
        if f_value == 0.0:
            return 1.0
        if np.isinf(f_value):
            return 0.0
        return float(stats.f.sf(f_value, d1, d2))

    eps = greenhouse_geisser_epsilon(arr)
    corrected = eps < gg_threshold
    df = (df1 * eps, df2 * eps) if corrected else (float(df1), float(df2))
    return AnovaResult(
        f_value=f_value,
        df=df,
        p_value=_sf(*df),
        df_uncorrected=(df1, df2),
        p_uncorrected=_sf(df1, df2),
        gg_epsilon=eps,
        corrected=corrected,
        conditions=names,
        condition_means=tuple(float(m) for m in arr.mean(axis=0)),
        pairwise=bonferroni_pairwise(arr, names),
    )


def bonferroni_pairwise(values: np.ndarray, conditions: Sequence[str] | None = None) -> dict[str, float]:
    """每对条件做配对 t 检验，p 值乘以比较次数并截断到 1。

    Args:
        values: n × k 矩阵。
        conditions: 列名。

    Returns:
        'a vs b' → 校正 p 值；差值全为零的一对记为 1。
    """
    arr = _check_matrix(values)
    names = _condition_names(arr.shape[1], conditions)
    pairs = list(itertools.combinations(range(arr.shape[1]), 2))
    adjusted = {}
    for i, j in pairs:
        diff = arr[:, i] - arr[:, j]
        if np.allclose(diff, diff[0], rtol=0.0, atol=_TINY) and abs(diff[0]) <= _TINY:
            p = 1.0
        else:
            p = float(stats.ttest_rel(arr[:, i], arr[:, j]).pvalue)
            if not np.isfinite(p):
                p = 0.0 if diff.mean() != 0 else 1.0
        adjusted[f'{names[i]} vs {names[j]}'] = min(1.0, len(pairs) * p)
    return adjusted


def _paired_t(diff: np.ndarray) -> np.ndarray:
    """逐行配对 t 统计量；标准差为 0 的行记 0。"""
    n = diff.shape[-1]
    mean = diff.mean(axis=-1)
    sd = diff.std(axis=-1, ddof=1)
    with np.errstate(divide='ignore', invalid='ignore'):
        t = mean / (sd / np.sqrt(n))
    return np.where(sd > 0, t, 0.0)


def permutation_paired_test(
    a: Sequence[float] | np.ndarray,
    b: Sequence[float] | np.ndarray,
    n_permutations: int = 10_000,
    seed: int = 0,
) -> float:
    """符号翻转配对置换 t 检验（双侧）。

    Args:
        a: 每个被试的条件 A 值。
        b: 每个被试的条件 B 值。
        n_permutations: 置换次数（≥ 100）。
        seed: 随机种子；相同种子给出相同 p 值。

    Returns:
        p = (1 + #{|t*| ≥ |t_obs|}) / (1 + n_permutations)；a 与 b 完全相同时为 1。

    Raises:
        ParameterError: 置换次数不足 100 或样本长度不符时抛出。
    """
    if n_permutations < 100:
        raise ParameterError(f'n_permutations must be >= 100, got {n_permutations}')
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ParameterError('paired samples must be 1-d with equal length >= 2')
    diff = x - y
    if not diff.any():
        return 1.0
    t_obs = abs(float(_paired_t(diff)))
    rng = np.random.default_rng(seed)
    signs = rng.choice(np.array([-1.0, 1.0]), size=(n_permutations, diff.size))
    t_perm = np.abs(_paired_t(signs * diff))
    count = int(np.sum(t_perm >= t_obs - 1e-12 * max(t_obs, 1.0)))
    return (1 + count) / (1 + n_permutations)


class ComponentTest(BaseModel):
    """某脑区某成分的条件比较。"""

    model_config = ConfigDict(frozen=True)

    region: Region
    """脑区。"""
    measure: str
    """成分测量名。"""
    anova: AnovaResult
    """方差分析结果。"""


def component_table(
    epochs: Sequence[EpochMatrix],
    roi_map: RoiMap | None = None,
    windows: TimeWindows | None = None,
    regions: Sequence[Region] | None = None,
    measures: Sequence[str] = MEASURES,
    gg_threshold: float = 0.95,
) -> list[ComponentTest]:
    """对每个 (脑区, 成分) 组合做三种词类型的重复测量方差分析。

    Args:
        epochs: 所有被试的 epoch。
        roi_map: 脑区划分。
        windows: 成分时间窗。
        regions: 参与检验的脑区，None 为全部。
        measures: 成分测量名。
        gg_threshold: GG 校正阈值。

    Returns:
        ComponentTest 列表。
    """
    roi = roi_map or RoiMap.default()
    names = [c.value for c in WORD_TYPE_ORDER]
    results = []
    for region in regions or tuple(roi.regions):
        for measure in measures:
            _, matrix = subject_condition_matrix(epochs, region, measure, roi, windows)
            anova = rm_anova(matrix, names, gg_threshold)
            logger.debug(
                '{} {}: F({:.2f}, {:.2f}) = {:.3f}, p = {:.4g}',
                region,
                measure,
                anova.df[0],
                anova.df[1],
                anova.f_value,
                anova.p_value,
            )
            results.append(ComponentTest(region=Region(region), measure=measure, anova=anova))
    return results


def component_frame(tests: Sequence[ComponentTest]) -> pd.DataFrame:
    """把检验结果展平成表格。

    Args:
        tests: component_table 的输出。

    Returns:
        每行一个 (脑区, 成分)。
    """
    rows = []
    for t in tests:
        a = t.anova
        row = {
            'region': t.region.value,
            'measure': t.measure,
            'f_value': a.f_value,
            'df_effect': a.df[0],
            'df_error': a.df[1],
            'p_value': a.p_value,
            'p_uncorrected': a.p_uncorrected,
            'gg_epsilon': a.gg_epsilon,
            'corrected': a.corrected,
        }
        row.update({f'mean.{c}': m for c, m in zip(a.conditions, a.condition_means, strict=True)})
        row.update({f'bonferroni.{pair}': p for pair, p in a.pairwise.items()})
        rows.append(row)
    return pd.DataFrame(rows)
