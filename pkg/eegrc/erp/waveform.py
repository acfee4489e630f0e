"""总平均波形、全局场强（GFP）、成分时间窗与脑区测量。"""

from __future__ import annotations

from collections import defaultdict
from typing import TYPE_CHECKING

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.ndimage import uniform_filter1d
from scipy.signal import find_peaks

from eegrc.config.schema import RoiMap, TimeWindows
from eegrc.signal.preprocess import window_mask
from eegrc.signal.recording import frozen_array
from eegrc.utils.errors import DataError, ParameterError, StructuralError
from eegrc.utils.types import WORD_TYPE_ORDER, ParticipantId, Region, WordType


if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    from eegrc.signal.recording import EpochMatrix


class ConditionWaveform(BaseModel):
    """某一类词的平均波形。"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    condition: WordType
    """词类型。"""
    data: np.ndarray
    """通道 × 采样点平均电压（µV）。"""
    n_epochs: int = Field(ge=1)
    """参与平均的 epoch 数。"""
    rate_hz: float = Field(gt=0)
    """采样率。"""
    t0_ms: float
    """首个采样点时间。"""
    channel_names: tuple[str, ...]
    """通道名称。"""

    @field_validator('data', mode='before')
    @classmethod
    def _check_data(cls, value: object) -> np.ndarray:
        """转换为只读二维数组。

        Args:
            value: 原始数据。

        Returns:
            只读数组。
        """
        return frozen_array(value, ndim=2)

    @property
    def n_samples(self) -> int:
        """采样点数。

        Returns:
            每通道长度。
        """
        return int(self.data.shape[1])

    @property
    def times_ms(self) -> np.ndarray:
        """每个采样点的时间（ms）。

        Returns:
            时间数组。
        """
        return self.t0_ms + np.arange(self.n_samples) * 1000.0 / self.rate_hz

    @property
    def end_ms(self) -> float:
        """覆盖范围右端点（不含）。

        Returns:
            右端点时间。
        """
        return self.t0_ms + self.n_samples * 1000.0 / self.rate_hz


class GfpSeries(BaseModel):
    """GFP 时间序列。"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    times_ms: np.ndarray
    """时间点（ms）。"""
    values: np.ndarray
    """每个时间点的 GFP（µV）。"""


def _check_compatible(epochs: Sequence[EpochMatrix]) -> None:
    first = epochs[0]
    for e in epochs[1:]:
        if (e.rate_hz, e.t0_ms, e.n_samples, e.channel_names) != (
            first.rate_hz,
            first.t0_ms,
            first.n_samples,
            first.channel_names,
        ):
            raise StructuralError('epochs must share rate, span and montage to be averaged')


def grand_average(
    epochs: Sequence[EpochMatrix], conditions: Iterable[WordType] = WORD_TYPE_ORDER
) -> list[ConditionWaveform]:
    """按词类型逐元素平均。

    Args:
        epochs: 采样率、范围、导联一致的 epoch。
        conditions: 需要输出的词类型及顺序。

    Returns:
        每个非空条件一个 ConditionWaveform；空条件被省略并记录警告。

    Raises:
        StructuralError: epoch 不兼容时抛出。
    """
    if epochs:
        _check_compatible(epochs)
    groups: dict[WordType, list[np.ndarray]] = defaultdict(list)
    for e in epochs:
        groups[e.label.word_type].append(e.data)
    waveforms = []
    for condition in conditions:
        members = groups.get(condition)
        if not members:
            logger.warning('condition {} has no epochs; omitted from the grand average', condition)
            continue
        first = next(e for e in epochs if e.label.word_type is condition)
        waveforms.append(
            ConditionWaveform(
                condition=condition,
                data=np.mean(members, axis=0),
                n_epochs=len(members),
                rate_hz=first.rate_hz,
                t0_ms=first.t0_ms,
                channel_names=first.channel_names,
            )
        )
    return waveforms


def global_field_power(
    w: ConditionWaveform, span_ms: tuple[float, float] = (0.0, 750.0)
) -> GfpSeries:
    """每个采样点上跨通道的总体标准差，限定在 span_ms 内。

    Args:
        w: 条件平均波形。
        span_ms: 计算区间，默认 0–750 ms。

    Returns:
        GfpSeries。

    Raises:
        ParameterError: 少于两个通道时抛出。
    """
    if w.data.shape[0] < 2:
        raise ParameterError('global field power needs at least two channels')
    start = max(span_ms[0], w.t0_ms)
    end = min(span_ms[1], w.end_ms)
    mask = window_mask(w, (start, end))
    return GfpSeries(times_ms=w.times_ms[mask], values=w.data[:, mask].std(axis=0))


def segment_time_windows(
    gfp: GfpSeries,
    canonical: TimeWindows | None = None,
    smoothing_ms: float = 20.0,
    snap_radius_ms: float = 40.0,
) -> TimeWindows:
    """依据 GFP 的局部极小值确定成分时间窗。

    GFP 先做 smoothing_ms 宽的滑动平均；每个标准边界（120/320/520 ms）吸附到半径内最近的局部极小值，
    半径内没有极小值时保留标准值。N100 起点与 P600 终点固定。

    Args:
        gfp: 0–750 ms 的 GFP。
        canonical: 标准时间窗。
        smoothing_ms: 平滑窗宽。
        snap_radius_ms: 吸附半径。

    Returns:
        四段 TimeWindows。
    """
    windows = canonical or TimeWindows()
    times = np.asarray(gfp.times_ms, dtype=np.float64)
    values = np.asarray(gfp.values, dtype=np.float64)
    boundaries = [windows.n100[1], windows.p200[1], windows.n400[1]]
    if times.size >= 3:
        step = float(np.median(np.diff(times)))
        half = int(round(smoothing_ms / step)) // 2
        smoothed = uniform_filter1d(values, size=2 * half + 1, mode='nearest')
        minima = times[find_peaks(-smoothed)[0]]
        snapped = []
        for b in boundaries:
            near = minima[np.abs(minima - b) <= snap_radius_ms]
            snapped.append(float(near[np.argmin(np.abs(near - b))]) if near.size else b)
        boundaries = snapped
    b1, b2, b3 = boundaries
    return TimeWindows(
        n100=(windows.n100[0], b1), p200=(b1, b2), n400=(b2, b3), p600=(b3, windows.p600[1])
    )


def region_rows(w: ConditionWaveform, region: Region | str, roi_map: RoiMap) -> np.ndarray:
    """脑区电极在波形中的行号。

    Raises:
        ParameterError: 脑区未知或电极不在导联中时抛出。
    """
    try:
        electrodes = roi_map.electrodes(region)
    except (KeyError, ValueError):
        raise ParameterError(f'unknown region {region!r}') from None
    index = {name: i for i, name in enumerate(w.channel_names)}
    missing = [e for e in electrodes if e not in index]
    if missing:
        raise ParameterError(f'region {region} electrodes {missing} not in montage')
    return np.array([index[e] for e in electrodes], dtype=int)


def roi_mean(
    w: ConditionWaveform,
    region: Region | str,
    window_ms: tuple[float, float],
    roi_map: RoiMap | None = None,
) -> float:
    """脑区电极与时间窗内所有采样点的平均电压。

    Args:
        w: 条件平均波形。
        region: 脑区。
        window_ms: 时间窗 [start, end)。
        roi_map: 脑区划分，None 使用默认。

    Returns:
        平均电压（µV）。

    Raises:
        ParameterError: 未知脑区或时间窗越界时抛出。
    """
    rows = region_rows(w, region, roi_map or RoiMap.default())
    mask = window_mask(w, window_ms)
    return float(w.data[np.ix_(rows, mask)].mean())


def n100_p200_amplitude(
    w: ConditionWaveform,
    region: Region | str,
    roi_map: RoiMap | None = None,
    windows: TimeWindows | None = None,
) -> float:
    """N100 到 P200 的平均波形变化：P200 窗均值减 N100 窗均值。

    Args:
        w: 条件平均波形。
        region: 脑区。
        roi_map: 脑区划分。
        windows: 成分时间窗。

    Returns:
        幅度（µV）。
    """
    win = windows or TimeWindows()
    return roi_mean(w, region, win.p200, roi_map) - roi_mean(w, region, win.n100, roi_map)


def mean_component(
    w: ConditionWaveform,
    region: Region | str,
    component: str,
    roi_map: RoiMap | None = None,
    windows: TimeWindows | None = None,
) -> float:
    """某成分时间窗内的脑区均值（N400、P600 等均值测量）。

    Args:
        w: 条件平均波形。
        region: 脑区。
        component: 成分名（n100 / p200 / n400 / p600）。
        roi_map: 脑区划分。
        windows: 成分时间窗。

    Returns:
        平均电压（µV）。

    Raises:
        ParameterError: 未知成分名时抛出。
    """
    win = windows or TimeWindows()
    if component not in win.as_dict():
        raise ParameterError(f'unknown component {component!r}')
    return roi_mean(w, region, win.get(component), roi_map)


def component_measure(
    w: ConditionWaveform,
    region: Region | str,
    measure: str,
    roi_map: RoiMap | None = None,
    windows: TimeWindows | None = None,
) -> float:
    """按名称计算成分测量值。

    Args:
        w: 条件平均波形。
        region: 脑区。
        measure: 'n100_p200' 表示峰间幅度，其余成分名表示该窗的脑区均值。
        roi_map: 脑区划分。
        windows: 成分时间窗。

    Returns:
        测量值（µV）。

    Raises:
        ParameterError: 未知测量名时抛出。
    """
    if measure == 'n100_p200':
        return n100_p200_amplitude(w, region, roi_map, windows)
    return mean_component(w, region, measure, roi_map, windows)


def subject_condition_matrix(
    epochs: Sequence[EpochMatrix],
    region: Region | str,
    measure: str,
    roi_map: RoiMap | None = None,
    windows: TimeWindows | None = None,
    conditions: Sequence[WordType] = WORD_TYPE_ORDER,
) -> tuple[list[ParticipantId], np.ndarray]:
    """被试 × 条件的成分测量矩阵（重复测量方差分析的输入）。

    Args:
        epochs: 所有被试的 epoch。
        region: 脑区。
        measure: 测量名（见 component_measure）。
        roi_map: 脑区划分。
        windows: 成分时间窗。
        conditions: 条件顺序。

    Returns:
        (被试列表, n × k 矩阵)。

    Raises:
        DataError: 某被试缺少某条件时抛出（不做插补）。
    """
    by_participant: dict[ParticipantId, list[EpochMatrix]] = defaultdict(list)
    for e in epochs:
        by_participant[e.label.participant_id].append(e)
    participants = sorted(by_participant)
    matrix = np.empty((len(participants), len(conditions)))
    for i, pid in enumerate(participants):
        waves = {w.condition: w for w in grand_average(by_participant[pid], conditions)}
        for j, condition in enumerate(conditions):
            if condition not in waves:
                raise DataError(f'participant {pid} has no {condition} epochs')
            matrix[i, j] = component_measure(waves[condition], region, measure, roi_map, windows)
    return participants, matrix


def electrode_window_means(
    waveforms: Iterable[ConditionWaveform], windows: TimeWindows | None = None
) -> pd.DataFrame:
    """每个条件、每个时间窗、每个电极的平均电压（地形图数值）。

    Args:
        waveforms: 条件平均波形。
        windows: 成分时间窗。

    Returns:
        列为 condition, window, electrode, mean_uv 的表。
    """
    win = windows or TimeWindows()
    rows = []
    for w in waveforms:
        for name, span in win.as_dict().items():
            means = w.data[:, window_mask(w, span)].mean(axis=1)
            rows.extend(
                {'condition': w.condition.value, 'window': name, 'electrode': ch, 'mean_uv': float(m)}
                for ch, m in zip(w.channel_names, means, strict=True)
            )
    return pd.DataFrame(rows, columns=['condition', 'window', 'electrode', 'mean_uv'])


def waveform_frame(w: ConditionWaveform) -> pd.DataFrame:
    """波形 → 表（time_ms + 每通道一列）。

    Args:
        w: 条件平均波形。

    Returns:
        DataFrame。
    """
    frame = pd.DataFrame(w.data.T, columns=list(w.channel_names))
    frame.insert(0, 'time_ms', w.times_ms)
    return frame
