"""连续记录与 epoch 的预处理：重参考、去偏置、零相位带通、分段、基线校正、伪迹剔除、降采样。

所有函数都是纯函数：输入不被修改，返回新的记录或 epoch。
"""

from __future__ import annotations

import math
from typing import TYPE_CHECKING, overload

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict
from scipy import signal

from eegrc.config.schema import PreprocessConfig
from eegrc.signal.recording import EpochMatrix, SessionRecording, TriggerCode, TriggerEvent
from eegrc.utils.errors import ConfigError, DataError, ParameterError


if TYPE_CHECKING:
    from collections.abc import Iterable

    from eegrc.erp.waveform import ConditionWaveform


class PreprocessResult(BaseModel):
    """一次会话预处理的结果。"""

    model_config = ConfigDict(frozen=True)

    kept: list[EpochMatrix]
    """通过伪迹筛查的 epoch。"""
    rejected: list[EpochMatrix]
    """超过阈值被剔除的 epoch。"""
    skipped: list[TriggerEvent]
    """距记录边界过近而未能分段的词触发。"""


def rereference_to_mastoids(
    rec: SessionRecording, mastoids: tuple[str, str] = ('A1', 'A2')
) -> SessionRecording:
    """重参考到双侧乳突平均。

    每个通道减去 (A1 + A2) / 2；重参考后两乳突之和恒为 0，再次调用结果不变。

    Args:
        rec: 原始记录。
        mastoids: 两个乳突电极名。

    Returns:
        重参考后的记录。

    Raises:
        ConfigError: 缺少乳突电极时抛出。
    """
    rows = []
    for name in mastoids:
        if name not in rec.channel_names:
            raise ConfigError(f'mastoid channel {name} not present in recording')
        rows.append(rec.channel_index(name))
    reference = rec.data[rows].mean(axis=0)
    return rec.with_data(rec.data - reference[np.newaxis, :])


def remove_dc_offset(rec: SessionRecording) -> SessionRecording:
    """去除每个通道的直流偏置（减去通道均值）。

    Args:
        rec: 输入记录。

    Returns:
        各通道均值为 0 的记录。
    """
    return rec.with_data(rec.data - rec.data.mean(axis=1, keepdims=True))


def check_band(low_hz: float, high_hz: float, rate_hz: float) -> None:
    """检查带通边界。

    Raises:
        ParameterError: 下限非正、上下限颠倒或上限不低于 Nyquist 频率时抛出。
    """
    if low_hz <= 0:
        raise ParameterError(f'low band edge must be positive, got {low_hz} Hz')
    if low_hz >= high_hz:
        raise ParameterError(f'low band edge {low_hz} Hz must be below high edge {high_hz} Hz')
    if high_hz >= rate_hz / 2:
        raise ParameterError(
            f'high band edge {high_hz} Hz violates Nyquist for rate {rate_hz} Hz'
        )


def zero_phase_bandpass(
    x: np.ndarray, low_hz: float, high_hz: float, rate_hz: float, order: int = 4
) -> np.ndarray:
    """沿最后一维做零相位 Butterworth 带通（前向-后向两次滤波）。

    两端做点对称（odd）延拓，延拓长度约为最低截止频率的三个周期，并受信号长度限制。

    Args:
        x: 输入信号，最后一维为时间。
        low_hz: 下截止频率。
        high_hz: 上截止频率。
        rate_hz: 采样率。
        order: 单向 Butterworth 阶数。

    Returns:
        与 x 形状相同的滤波结果。

    Raises:
        ParameterError: 频带非法时抛出。
    """
    check_band(low_hz, high_hz, rate_hz)
    sos = signal.butter(order, [low_hz, high_hz], btype='bandpass', fs=rate_hz, output='sos')
    n = x.shape[-1]
    if n < 2:
        return np.zeros_like(x, dtype=np.float64)
    padlen = min(n - 1, math.ceil(3 * rate_hz / low_hz))
    return signal.sosfiltfilt(sos, x, axis=-1, padtype='odd', padlen=padlen)


def bandpass_filter(
    rec: SessionRecording, low_hz: float = 0.5, high_hz: float = 30.0, order: int = 4
) -> SessionRecording:
    """对每个通道做零相位带通，长度不变。

    Args:
        rec: 输入记录。
        low_hz: 下截止频率，默认 0.5 Hz。
        high_hz: 上截止频率，默认 30 Hz。
        order: 单向阶数，默认 4。

    Returns:
        滤波后的记录。

    Raises:
        ParameterError: 频带违反 Nyquist 或顺序非法时抛出。
    """
    return rec.with_data(zero_phase_bandpass(rec.data, low_hz, high_hz, rec.rate_hz, order))


def span_samples(span_ms: tuple[float, float], rate_hz: float) -> tuple[int, int]:
    """epoch 范围 → (刺激前采样数, 刺激后采样数)。

    Args:
        span_ms: 半开区间 [start, end)（ms）。
        rate_hz: 采样率。

    Returns:
        (pre, post)，epoch 长度为 pre + post。
    """
    pre = round(-span_ms[0] * rate_hz / 1000.0)
    post = round(span_ms[1] * rate_hz / 1000.0)
    return pre, post


def extract_epochs(
    rec: SessionRecording, span_ms: tuple[float, float] = (-200.0, 750.0)
) -> tuple[list[EpochMatrix], list[TriggerEvent]]:
    """按词呈现触发提取 epoch。

    每个词触发对应一个覆盖 [onset + start, onset + end) 的 epoch，标签取自会话的词标签表。

    Args:
        rec: 已滤波、已重参考的记录。
        span_ms: epoch 范围，默认 (-200, 750)。

    Returns:
        (epoch 列表, 因靠近边界而跳过的触发列表)。

    Raises:
        DataError: 词触发在标签表中找不到对应标签时抛出。
    """
    pre, post = span_samples(span_ms, rec.rate_hz)
    t0_ms = -pre * 1000.0 / rec.rate_hz
    labels = rec.label_table()
    epochs: list[EpochMatrix] = []
    skipped: list[TriggerEvent] = []
    for trig in rec.triggers:
        if trig.code is not TriggerCode.WORD_ONSET:
            continue
        start, stop = trig.sample_index - pre, trig.sample_index + post
        if start < 0 or stop > rec.n_samples:
            logger.warning(
                'skip epoch trial={} word={}: window [{}, {}) outside recording of {} samples',
                trig.trial_id,
                trig.word_index,
                start,
                stop,
                rec.n_samples,
            )
            skipped.append(trig)
            continue
        label = labels.get((trig.trial_id, trig.word_index))
        if label is None:
            raise DataError(f'no label for trial {trig.trial_id} word {trig.word_index}')
        epochs.append(
            EpochMatrix(
                data=rec.data[:, start:stop],
                rate_hz=rec.rate_hz,
                t0_ms=t0_ms,
                channel_names=rec.channel_names,
                label=label,
            )
        )
    return epochs, skipped


def window_mask(e: EpochMatrix | ConditionWaveform, window_ms: tuple[float, float]) -> np.ndarray:
    """epoch（或平均波形）中落在 [start, end) 时间窗内的采样点掩码。

    Args:
        e: epoch 或平均波形。
        window_ms: 时间窗。

    Returns:
        布尔掩码。

    Raises:
        ParameterError: 时间窗超出 epoch 范围或不含任何采样点时抛出。
    """
    start, end = window_ms
    if start >= end or start < e.t0_ms - 1e-9 or end > e.end_ms + 1e-9:
        raise ParameterError(f'window {window_ms} ms outside epoch span [{e.t0_ms}, {e.end_ms})')
    times = e.times_ms
    mask = (times >= start - 1e-9) & (times < end - 1e-9)
    if not mask.any():
        raise ParameterError(f'window {window_ms} ms contains no samples')
    return mask


def baseline_correct(e: EpochMatrix, window_ms: tuple[float, float] = (-200.0, 0.0)) -> EpochMatrix:
    """每个通道减去基线窗口内的均值。

    Args:
        e: 输入 epoch。
        window_ms: 基线窗口，默认刺激前 200 ms。

    Returns:
        基线均值为 0 的 epoch。

    Raises:
        ParameterError: 基线窗口超出 epoch 范围时抛出。
    """
    mask = window_mask(e, window_ms)
    return e.with_data(e.data - e.data[:, mask].mean(axis=1, keepdims=True))


def reject_artifacts(
    epochs: Iterable[EpochMatrix], threshold_uv: float = 100.0
) -> tuple[list[EpochMatrix], list[EpochMatrix]]:
    """按绝对幅值阈值筛查 epoch。

    任一通道任一采样点 |v| 严格大于阈值即剔除；恰好等于阈值保留。

    Args:
        epochs: 输入 epoch。
        threshold_uv: 阈值（µV），默认 100。

    Returns:
        (保留列表, 剔除列表)。
    """
    kept: list[EpochMatrix] = []
    rejected: list[EpochMatrix] = []
    for e in epochs:
        (rejected if np.abs(e.data).max() > threshold_uv else kept).append(e)
    return kept, rejected


def decimation_factor(rate_hz: float, target_hz: float) -> int:
    """整数降采样因子。

    Args:
        rate_hz: 原采样率。
        target_hz: 目标采样率。

    Returns:
        rate_hz / target_hz。

    Raises:
        ParameterError: 非整数因子或目标高于原采样率时抛出。
    """
    ratio = rate_hz / target_hz
    factor = round(ratio)
    if factor < 1 or abs(ratio - factor) > 1e-9:
        raise ParameterError(
            f'target rate {target_hz} Hz does not divide rate {rate_hz} Hz into an integer factor'
        )
    return factor


@overload
def downsample(
    x: SessionRecording, target_hz: float = ..., lowpass_hz: float | None = ...
) -> SessionRecording: ...
@overload
def downsample(
    x: EpochMatrix, target_hz: float = ..., lowpass_hz: float | None = ...
) -> EpochMatrix: ...
def downsample(
    x: SessionRecording | EpochMatrix, target_hz: float = 500.0, lowpass_hz: float | None = 30.0
) -> SessionRecording | EpochMatrix:
    """整数倍抽取降采样。

    数据需已低通到 lowpass_hz 以下，抽取不再额外抗混叠；采样点数为 floor(n * target / rate)。

    Args:
        x: 记录或 epoch。
        target_hz: 目标采样率，默认 500 Hz。
        lowpass_hz: 数据已有的低通上限，用于检查抗混叠条件；None 跳过检查。

    Returns:
        与输入同类型的降采样结果。

    Raises:
        ParameterError: 非整数因子或目标 Nyquist 不高于低通上限时抛出。
    """
    factor = decimation_factor(x.rate_hz, target_hz)
    if lowpass_hz is not None and target_hz / 2 <= lowpass_hz:
        raise ParameterError(
            f'target Nyquist {target_hz / 2} Hz must exceed the low-pass edge {lowpass_hz} Hz'
        )
    if factor == 1:
        return x
    n_out = x.n_samples // factor
    data = x.data[:, ::factor][:, :n_out]
    if isinstance(x, EpochMatrix):
        return x.with_data(data, rate_hz=target_hz)
    triggers = []
    for trig in x.triggers:
        index = trig.sample_index // factor
        if index >= n_out:
            logger.warning('drop trigger at sample {} beyond decimated length', trig.sample_index)
            continue
        triggers.append(trig.model_copy(update={'sample_index': index}))
    return SessionRecording(
        data=data,
        rate_hz=target_hz,
        channel_names=x.channel_names,
        triggers=tuple(triggers),
        labels=x.labels,
        participant_id=x.participant_id,
    )


def preprocess_session(
    rec: SessionRecording, config: PreprocessConfig | None = None
) -> PreprocessResult:
    """按固定顺序预处理一次会话。

    重参考 → 去直流偏置 → 带通 → 原采样率分段 → 基线校正 → 伪迹筛查 → 降采样 → 再次基线校正。
    伪迹筛查在降采样之前进行；降采样并再次基线校正后仍超过阈值的 epoch 也归入剔除。

    Args:
        rec: 原始会话记录。
        config: 预处理配置，None 使用默认值。

    Returns:
        PreprocessResult。

    Raises:
        ConfigError: 缺少乳突电极。
        ParameterError: 滤波或降采样参数非法。
        DataError: 标签缺失。
    """
    cfg = config or PreprocessConfig()
    decimation_factor(rec.rate_hz, cfg.target_hz)
    clean = rereference_to_mastoids(rec, cfg.mastoids)
    clean = remove_dc_offset(clean)
    clean = bandpass_filter(clean, cfg.low_hz, cfg.high_hz, cfg.filter_order)
    epochs, skipped = extract_epochs(clean, cfg.span_ms)
    epochs = [baseline_correct(e, cfg.baseline_ms) for e in epochs]
    kept, rejected = reject_artifacts(epochs, cfg.threshold_uv)

    def _finish(e: EpochMatrix) -> EpochMatrix:
        return baseline_correct(downsample(e, cfg.target_hz, cfg.high_hz), cfg.baseline_ms)

    # 再次基线校正会平移整段，最终输出需重新满足阈值
    kept, late = reject_artifacts([_finish(e) for e in kept], cfg.threshold_uv)
    if late:
        logger.debug('participant {}: {} epochs exceed the threshold after downsampling', rec.participant_id, len(late))
    result = PreprocessResult(
        kept=kept,
        rejected=[_finish(e) for e in rejected] + late,
        skipped=skipped,
    )
    logger.info(
        'participant {}: {} epochs kept, {} rejected, {} skipped',
        rec.participant_id,
        len(result.kept),
        len(result.rejected),
        len(result.skipped),
    )
    return result
