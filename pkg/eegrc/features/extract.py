"""单个词 epoch → 频带特征（FBF）+ ERP 时间点特征（ERPF）。

向量顺序对每个脑区（central、r-temporal、parietal）依次为：
4 个频带功率、4 个微分熵、3 个成分窗 × 5 个时间点的电压。
"""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

import numpy as np
from pydantic import field_validator

from eegrc.config.schema import BandSpec, FeatureConfig, RoiMap, TimeWindows
from eegrc.signal.preprocess import check_band, window_mask, zero_phase_bandpass
from eegrc.signal.recording import ArrayModel, WordLabel, frozen_array
from eegrc.utils.errors import DataError, ParameterError
from eegrc.utils.types import Region


if TYPE_CHECKING:
    from eegrc.signal.recording import EpochMatrix


class WordFeatureVector(ArrayModel):
    """一个词的特征向量。"""

    values: np.ndarray
    """特征值（顺序见 feature_names）。"""
    label: WordLabel
    """词标签。"""
    standardized: bool = False
    """是否已标准化。"""

    @field_validator('values', mode='before')
    @classmethod
    def _check_values(cls, value: object) -> np.ndarray:
        """转换为只读一维数组并检查有限性。

        Args:
            value: 原始值。

        Returns:
            只读数组。
        """
        return frozen_array(value, ndim=1)

    @property
    def dimension(self) -> int:
        """向量长度。

        Returns:
            维度。
        """
        return int(self.values.size)


def region_signal(e: EpochMatrix, region: Region | str, roi_map: RoiMap | None = None) -> np.ndarray:
    """脑区内电极的平均信号。

    Args:
        e: epoch。
        region: 脑区。
        roi_map: 脑区划分。

    Returns:
        长度为 n_samples 的数组。

    Raises:
        ParameterError: 未知脑区或电极不在导联中时抛出。
    """
    roi = roi_map or RoiMap.default()
    try:
        rows = e.channel_rows(roi.electrodes(region))
    except (KeyError, ValueError) as exc:
        raise ParameterError(f'cannot resolve region {region!r}: {exc}') from None
    return e.data[rows].mean(axis=0)


def band_limited_region_signal(
    e: EpochMatrix,
    band: BandSpec,
    region: Region | str,
    roi_map: RoiMap | None = None,
    window_ms: tuple[float, float] = (0.0, 750.0),
) -> np.ndarray:
    """脑区平均信号在整个 epoch 上做零相位带通，再截取 window_ms 段。

    Args:
        e: epoch。
        band: 频带。
        region: 脑区。
        roi_map: 脑区划分。
        window_ms: 截取时段。

    Returns:
        带限信号片段。

    Raises:
        ParameterError: 频带超过 Nyquist 或时段越界时抛出。
    """
    low, high = band.range_hz
    check_band(low, high, e.rate_hz)
    filtered = zero_phase_bandpass(region_signal(e, region, roi_map), low, high, e.rate_hz)
    return filtered[window_mask(e, window_ms)]


def band_power(
    e: EpochMatrix,
    band: BandSpec,
    region: Region | str,
    roi_map: RoiMap | None = None,
    window_ms: tuple[float, float] = (0.0, 750.0),
) -> float:
    """频带功率：带限信号的时域均方值（µV²）。

    Args:
        e: epoch。
        band: 频带。
        region: 脑区。
        roi_map: 脑区划分。
        window_ms: 计算时段。

    Returns:
        功率。
    """
    x = band_limited_region_signal(e, band, region, roi_map, window_ms)
    return float(np.mean(x * x))


def gaussian_differential_entropy(variance: float) -> float:
    """高斯假设下的微分熵 ½·ln(2πe·σ²)。

    Args:
        variance: 方差。

    Returns:
        微分熵。

    Raises:
        DataError: 方差不为正时抛出。
    """
    if not variance > 0:
        raise DataError(f'differential entropy undefined for variance {variance}')
    return 0.5 * math.log(2 * math.pi * math.e * variance)


def differential_entropy(
    e: EpochMatrix,
    band: BandSpec,
    region: Region | str,
    roi_map: RoiMap | None = None,
    window_ms: tuple[float, float] = (0.0, 750.0),
) -> float:
    """带限信号方差的高斯微分熵。

    Args:
        e: epoch。
        band: 频带。
        region: 脑区。
        roi_map: 脑区划分。
        window_ms: 计算时段。

    Returns:
        微分熵。

    Raises:
        DataError: 带限信号方差为 0（退化 epoch）时抛出。
    """
    x = band_limited_region_signal(e, band, region, roi_map, window_ms)
    return gaussian_differential_entropy(float(np.var(x)))


def erp_time_points(
    e: EpochMatrix,
    window_ms: tuple[float, float],
    region: Region | str,
    k: int = 5,
    roi_map: RoiMap | None = None,
) -> np.ndarray:
    """在时间窗内均匀取 k 个点（含两端），读取脑区平均电压（最近采样点）。

    Args:
        e: epoch。
        window_ms: 时间窗。
        region: 脑区。
        k: 点数。
        roi_map: 脑区划分。

    Returns:
        长度为 k 的数组。

    Raises:
        ParameterError: 时间窗超出 epoch 范围时抛出。
    """
    start, end = window_ms
    if start > end or start < e.t0_ms - 1e-9 or end > e.end_ms + 1e-9:
        raise ParameterError(f'window {window_ms} ms outside epoch span [{e.t0_ms}, {e.end_ms})')
    times = np.linspace(start, end, k)
    index = np.rint((times - e.t0_ms) * e.rate_hz / 1000.0).astype(int)
    index = np.clip(index, 0, e.n_samples - 1)
    return region_signal(e, region, roi_map)[index]


def feature_names(config: FeatureConfig | None = None) -> list[str]:
    """特征维度名称，顺序与 word_feature_vector 一致。

    Args:
        config: 特征配置。

    Returns:
        形如 'central.bp.delta'、'parietal.erp.p600.t4' 的名称列表。
    """
    cfg = config or FeatureConfig()
    names = []
    for region in cfg.regions:
        names.extend(f'{region}.bp.{b.name}' for b in cfg.bands)
        names.extend(f'{region}.de.{b.name}' for b in cfg.bands)
        for window in cfg.erp_windows:
            names.extend(f'{region}.erp.{window}.t{i}' for i in range(cfg.points_per_window))
    return names


def word_feature_vector(
    e: EpochMatrix,
    config: FeatureConfig | None = None,
    roi_map: RoiMap | None = None,
    windows: TimeWindows | None = None,
) -> WordFeatureVector:
    """计算一个词 epoch 的完整特征向量。

    Args:
        e: 干净的 epoch。
        config: 特征配置。
        roi_map: 脑区划分。
        windows: ERPF 使用的成分时间窗（可为 GFP 分段结果）。

    Returns:
        WordFeatureVector。

    Raises:
        DataError: 某频带方差为 0 时抛出。
        ParameterError: 频带或时间窗非法时抛出。
    """
    cfg = config or FeatureConfig()
    roi = roi_map or RoiMap.default()
    win = windows or TimeWindows()
    values: list[float] = []
    for region in cfg.regions:
        limited = [band_limited_region_signal(e, b, region, roi, cfg.fbf_window_ms) for b in cfg.bands]
        values.extend(float(np.mean(x * x)) for x in limited)
        values.extend(gaussian_differential_entropy(float(np.var(x))) for x in limited)
        for window in cfg.erp_windows:
            values.extend(erp_time_points(e, win.get(window), region, cfg.points_per_window, roi))
    return WordFeatureVector(values=np.asarray(values), label=e.label)
