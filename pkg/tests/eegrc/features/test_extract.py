"""测试词级频带特征与 ERP 时间点特征。"""

from __future__ import annotations

import math

import numpy as np
import pytest

from eegrc.config.schema import BandSpec, FeatureConfig, default_channels
from eegrc.features.extract import (
    band_power,
    differential_entropy,
    erp_time_points,
    feature_names,
    gaussian_differential_entropy,
    region_signal,
    word_feature_vector,
)
from eegrc.signal.recording import EpochMatrix, WordLabel
from eegrc.utils.errors import DataError, ParameterError
from eegrc.utils.types import Band, Region, SentenceRelevance, WordType


CHANNELS = tuple(default_channels())
TIMES = -200.0 + np.arange(475) * 2.0


def _epoch(data: np.ndarray) -> EpochMatrix:
    return EpochMatrix(
        data=data,
        rate_hz=500.0,
        t0_ms=-200.0,
        channel_names=CHANNELS,
        label=WordLabel(
            word_type=WordType.SEMANTIC_RELATED,
            sentence_relevance=SentenceRelevance.RELEVANT,
            trial_id=3,
            word_index=1,
            participant_id='p02',
        ),
    )


def _sine(freq_hz: float, amplitude: float) -> EpochMatrix:
    wave = amplitude * np.sin(2 * np.pi * freq_hz * TIMES / 1000.0)
    return _epoch(np.tile(wave, (len(CHANNELS), 1)))


def _band(name: Band) -> BandSpec:
    return next(b for b in BandSpec.standard() if b.name is name)


class TestFeatureLayout:
    """特征向量布局测试。"""

    def test_default_dimension(self) -> None:
        """测试默认 3 个脑区 × (8 + 15) = 69 维，名称有序。"""
        names = feature_names()
        assert len(names) == 69 == FeatureConfig().dimension
        assert names[0] == 'central.bp.delta'
        assert names[4] == 'central.de.delta'
        assert names[8] == 'central.erp.p200.t0'
        assert names[23] == 'r-temporal.bp.delta'
        assert names[-1] == 'parietal.erp.p600.t4'

    def test_vector_matches_names(self) -> None:
        """测试随机 epoch 的特征向量维度正确且保留标签。"""
        rng = np.random.default_rng(0)
        e = _epoch(rng.normal(scale=5.0, size=(len(CHANNELS), 475)))
        v = word_feature_vector(e)
        assert v.dimension == 69
        assert v.label == e.label
        assert not v.standardized
        assert np.isfinite(v.values).all()

    def test_flat_epoch_rejected(self) -> None:
        """测试全零 epoch 的频带方差为 0 时抛出数据错误。"""
        with pytest.raises(DataError, match='differential entropy undefined'):
            word_feature_vector(_epoch(np.zeros((len(CHANNELS), 475))))


class TestBandFeatures:
    """频带功率与微分熵测试。"""

    def test_alpha_power_of_sine(self) -> None:
        """测试 10 Hz 正弦在 alpha 频带的功率约为 A²/2。"""
        e = _sine(10.0, 2.0)
        power = band_power(e, _band(Band.ALPHA), Region.CENTRAL)
        assert power == pytest.approx(2.0, rel=0.2)

    def test_out_of_band_power_small(self) -> None:
        """测试 10 Hz 正弦在 theta 与 beta 频带的功率远小于 alpha。"""
        e = _sine(10.0, 2.0)
        alpha = band_power(e, _band(Band.ALPHA), Region.CENTRAL)
        assert band_power(e, _band(Band.THETA), Region.CENTRAL) < 0.1 * alpha
        assert band_power(e, _band(Band.BETA), Region.CENTRAL) < 0.1 * alpha

    def test_gaussian_entropy(self) -> None:
        """测试高斯微分熵公式。"""
        assert gaussian_differential_entropy(1.0 / (2 * math.pi * math.e)) == pytest.approx(0.0, abs=1e-12)
        assert gaussian_differential_entropy(4.0) - gaussian_differential_entropy(1.0) == pytest.approx(math.log(2.0))
        with pytest.raises(DataError, match='undefined'):
            gaussian_differential_entropy(0.0)

    def test_entropy_grows_with_amplitude(self) -> None:
        """测试幅度加倍时微分熵增加 ln 2。"""
        band = _band(Band.ALPHA)
        small = differential_entropy(_sine(10.0, 1.0), band, Region.PARIETAL)
        large = differential_entropy(_sine(10.0, 2.0), band, Region.PARIETAL)
        assert large - small == pytest.approx(math.log(2.0), rel=1e-6)


class TestErpPoints:
    """ERP 时间点测试。"""

    def test_points_include_window_edges(self) -> None:
        """测试 N400 窗内 5 个点含两端：320、370、420、470、520 ms。"""
        e = _epoch(np.tile(TIMES, (len(CHANNELS), 1)))
        np.testing.assert_allclose(erp_time_points(e, (320.0, 520.0), Region.CENTRAL), [320, 370, 420, 470, 520])

    def test_region_average(self) -> None:
        """测试只对脑区电极取平均。"""
        data = np.zeros((len(CHANNELS), 475))
        data[CHANNELS.index('Pz')] = 6.0
        e = _epoch(data)
        assert region_signal(e, Region.CENTRAL).max() == 0.0
        np.testing.assert_allclose(region_signal(e, Region.PARIETAL), 1.0)

    def test_window_outside_epoch(self) -> None:
        """测试时间窗超出 epoch 时抛出参数错误。"""
        e = _epoch(np.zeros((len(CHANNELS), 475)))
        with pytest.raises(ParameterError, match='outside epoch span'):
            erp_time_points(e, (520.0, 800.0), Region.CENTRAL)

    def test_unknown_region(self) -> None:
        """测试未知脑区抛出参数错误。"""
        e = _epoch(np.zeros((len(CHANNELS), 475)))
        with pytest.raises(ParameterError, match='cannot resolve region'):
            region_signal(e, 'insula')
