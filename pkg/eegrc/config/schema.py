"""配置模型：YAML → Pydantic。"""

from __future__ import annotations

import itertools
from functools import cache
from pathlib import Path

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from eegrc.utils.types import Band, Region, WordType


MONTAGE_PATH = Path(__file__).with_name('montage.yaml')  # 随包发布的默认导联文件
CENTRAL_CORE = frozenset({'Cz', 'FCz', 'C3', 'C4', 'FC3', 'FC4'})  # central 必须包含的电极
CANONICAL_BANDS: dict[Band, tuple[float, float]] = {
    Band.DELTA: (0.5, 4.0),
    Band.THETA: (4.0, 8.0),
    Band.ALPHA: (8.0, 13.0),
    Band.BETA: (13.0, 30.0),
}


@cache
def _load_montage() -> dict:
    """读取默认导联文件（带缓存）。

    Returns:
        含 'channels' 与 'roi_map' 的字典。
    """
    return yaml.safe_load(MONTAGE_PATH.read_text(encoding='utf-8'))


def default_channels() -> list[str]:
    """默认 10-20 导联电极列表（含 A1、A2）。

    Returns:
        电极名称列表。
    """
    return list(_load_montage()['channels'])


class RoiMap(BaseModel):
    """脑区 → 电极集合映射。"""

    model_config = ConfigDict(frozen=True)

    regions: dict[Region, tuple[str, ...]]
    """每个脑区包含的电极名称。"""

    @classmethod
    def default(cls) -> RoiMap:
        """随包发布的默认脑区划分。

        Returns:
            默认 RoiMap。
        """
        return cls.model_validate({'regions': _load_montage()['roi_map']})

    @model_validator(mode='after')
    def _check_regions(self) -> RoiMap:
        """验证七个脑区齐全、非空，且 central 包含核心电极。

        Returns:
            验证通过后的 RoiMap 实例。

        Raises:
            ValueError: 缺少脑区、脑区为空或 central 不完整时抛出。
        """
        missing = [r.value for r in Region if r not in self.regions]
        if missing:
            raise ValueError(f'roi map is missing regions {missing}')
        for region, electrodes in self.regions.items():
            if not electrodes:
                raise ValueError(f'region {region} has no electrodes')
        absent = CENTRAL_CORE - set(self.regions[Region.CENTRAL])
        if absent:
            raise ValueError(f'central region must include {sorted(absent)}')
        return self

    def electrodes(self, region: Region | str) -> tuple[str, ...]:
        """返回某脑区的电极。

        Args:
            region: 脑区名称。

        Returns:
            电极名称元组。

        Raises:
            KeyError: 未知脑区。
        """
        return self.regions[Region(region)]


class TimeWindows(BaseModel):
    """ERP 成分时间窗（ms，相对刺激出现）。"""

    model_config = ConfigDict(frozen=True)

    n100: tuple[float, float] = (60.0, 120.0)
    """N100 时间窗。"""
    p200: tuple[float, float] = (120.0, 320.0)
    """P200 时间窗。"""
    n400: tuple[float, float] = (320.0, 520.0)
    """N400 时间窗。"""
    p600: tuple[float, float] = (520.0, 750.0)
    """P600 时间窗。"""

    @model_validator(mode='after')
    def _check_contiguous(self) -> TimeWindows:
        """验证四个时间窗首尾相接、互不重叠且位于 0–750 ms 内。

        Returns:
            验证通过后的 TimeWindows 实例。

        Raises:
            ValueError: 时间窗不连续或越界时抛出。
        """
        spans = list(self.as_dict().values())
        for start, end in spans:
            if not 0.0 <= start < end <= 750.0:
                raise ValueError(f'window ({start}, {end}) must lie within 0-750 ms')
        for (_, end), (start, _) in itertools.pairwise(spans):
            if end != start:
                raise ValueError(f'windows must be contiguous, got gap/overlap at {end} vs {start}')
        return self

    def as_dict(self) -> dict[str, tuple[float, float]]:
        """按时间顺序返回 {成分名: 时间窗}。

        Returns:
            成分名到时间窗的有序字典。
        """
        return {'n100': self.n100, 'p200': self.p200, 'n400': self.n400, 'p600': self.p600}

    def get(self, name: str) -> tuple[float, float]:
        """按成分名取时间窗。

        Args:
            name: 'n100' / 'p200' / 'n400' / 'p600'。

        Returns:
            (起点, 终点) ms。
        """
        return self.as_dict()[name]


class BandSpec(BaseModel):
    """频带定义。"""

    model_config = ConfigDict(frozen=True)

    name: Band
    """频带名称。"""
    range_hz: tuple[float, float]
    """频带范围（Hz）。"""

    @model_validator(mode='after')
    def _check_range(self) -> BandSpec:
        """验证频带范围与标准定义一致。

        Returns:
            验证通过后的 BandSpec 实例。

        Raises:
            ValueError: 范围与标准定义不符时抛出。
        """
        if tuple(self.range_hz) != CANONICAL_BANDS[self.name]:
            raise ValueError(f'band {self.name} must span {CANONICAL_BANDS[self.name]} Hz')
        return self

    @classmethod
    def standard(cls) -> tuple[BandSpec, ...]:
        """delta / theta / alpha / beta 四个标准频带。

        Returns:
            按频率升序的频带元组。
        """
        return tuple(cls(name=name, range_hz=rng) for name, rng in CANONICAL_BANDS.items())


class PreprocessConfig(BaseModel):
    """预处理配置。"""

    model_config = ConfigDict(frozen=True)

    mastoids: tuple[str, str] = ('A1', 'A2')
    """重参考所用乳突电极。"""
    low_hz: float = Field(default=0.5, gt=0)
    """带通下限（Hz）。"""
    high_hz: float = Field(default=30.0, gt=0)
    """带通上限（Hz）。"""
    filter_order: int = Field(default=4, gt=0)
    """Butterworth 阶数（单向）。"""
    span_ms: tuple[float, float] = (-200.0, 750.0)
    """epoch 时间范围，半开区间 [start, end)。"""
    baseline_ms: tuple[float, float] = (-200.0, 0.0)
    """基线窗口。"""
    threshold_uv: float = Field(default=100.0, gt=0)
    """伪迹阈值（µV），严格大于即剔除。"""
    target_hz: float = Field(default=500.0, gt=0)
    """降采样目标采样率。"""

    @model_validator(mode='after')
    def _check_edges(self) -> PreprocessConfig:
        """验证带通上下限、epoch 范围与基线窗口。

        Returns:
            验证通过后的 PreprocessConfig 实例。

        Raises:
            ValueError: 参数顺序不合法时抛出。
        """
        if self.low_hz >= self.high_hz:
            raise ValueError(f'low_hz ({self.low_hz}) must be below high_hz ({self.high_hz})')
        if not self.span_ms[0] < 0 < self.span_ms[1]:
            raise ValueError(f'span {self.span_ms} must straddle stimulus onset')
        if not self.span_ms[0] <= self.baseline_ms[0] < self.baseline_ms[1] <= self.span_ms[1]:
            raise ValueError(f'baseline {self.baseline_ms} must lie inside span {self.span_ms}')
        return self


class ErpConfig(BaseModel):
    """ERP 分析配置。"""

    model_config = ConfigDict(frozen=True)

    roi_map: RoiMap = Field(default_factory=RoiMap.default)
    """脑区划分。"""
    windows: TimeWindows = Field(default_factory=TimeWindows)
    """标准成分时间窗。"""
    smoothing_ms: float = Field(default=20.0, gt=0)
    """GFP 滑动平均窗宽。"""
    snap_radius_ms: float = Field(default=40.0, ge=0)
    """边界吸附到 GFP 局部极小值的半径。"""
    gg_threshold: float = Field(default=0.95, gt=0, le=1)
    """epsilon 低于该值时使用 Greenhouse-Geisser 校正。"""
    n_permutations: int = Field(default=10_000, ge=100)
    """置换检验次数。"""


class FeatureConfig(BaseModel):
    """特征提取配置。"""

    model_config = ConfigDict(frozen=True)

    regions: tuple[Region, ...] = (Region.CENTRAL, Region.R_TEMPORAL, Region.PARIETAL)
    """提取特征的脑区（顺序即向量顺序）。"""
    bands: tuple[BandSpec, ...] = Field(default_factory=BandSpec.standard)
    """频带。"""
    erp_windows: tuple[str, ...] = ('p200', 'n400', 'p600')
    """ERPF 采样的成分窗。"""
    points_per_window: int = Field(default=5, gt=1)
    """每个成分窗的均匀采样点数（含两端）。"""
    fbf_window_ms: tuple[float, float] = (0.0, 750.0)
    """计算频带特征的刺激后时段。"""

    @property
    def dimension(self) -> int:
        """特征向量维度。

        Returns:
            每脑区 (2 * 频带数 + 点数 * 窗数) 乘以脑区数。
        """
        per_region = 2 * len(self.bands) + self.points_per_window * len(self.erp_windows)
        return per_region * len(self.regions)


class ModelConfig(BaseModel):
    """UERCM 模型与训练超参数。"""

    model_config = ConfigDict(frozen=True)

    d: int = Field(default=69, gt=0)
    """输入特征维度。"""
    h: int = Field(default=16, gt=0)
    """隐藏维度。"""
    heads: int = Field(default=4, gt=0)
    """注意力头数。"""
    t_max: int = Field(default=16, gt=0)
    """最大句长（padding 目标）。"""
    lr: float = Field(default=1e-3, gt=0)
    """Adam 学习率。"""
    batch_size: int = Field(default=8, gt=0)
    """mini-batch 大小。"""
    patience: int = Field(default=5, gt=0)
    """早停耐心（epoch 数）。"""
    max_epochs: int = Field(default=50, ge=0)
    """最大训练 epoch 数。"""
    seed: int = 0
    """随机种子。"""
    bn_momentum: float = Field(default=0.1, gt=0, le=1)
    """BatchNorm 滑动统计动量。"""
    bn_eps: float = Field(default=1e-5, ge=0)
    """BatchNorm 数值稳定项。"""

    @model_validator(mode='after')
    def _check_heads(self) -> ModelConfig:
        """验证隐藏维度可被头数整除。

        Returns:
            验证通过后的 ModelConfig 实例。

        Raises:
            ValueError: h 不能被 heads 整除时抛出。
        """
        if self.h % self.heads:
            raise ValueError(f'h ({self.h}) must be divisible by heads ({self.heads})')
        return self


class ModelGrid(BaseModel):
    """超参数网格。"""

    model_config = ConfigDict(frozen=True)

    hidden: tuple[int, ...] = (16, 32)
    """隐藏维度候选。"""
    heads: tuple[int, ...] = (4, 8)
    """注意力头数候选。"""
    lr: tuple[float, ...] = (1e-4, 1e-3, 1e-2)
    """学习率候选。"""

    def configs(self, base: ModelConfig) -> list[ModelConfig]:
        """按 (h, heads, lr) 升序展开网格。

        Args:
            base: 其余字段取自该配置。

        Returns:
            ModelConfig 列表。
        """
        return [
            base.model_copy(update={'h': h, 'heads': heads, 'lr': lr})
            for h, heads, lr in itertools.product(sorted(self.hidden), sorted(self.heads), sorted(self.lr))
        ]


class EvalConfig(BaseModel):
    """评估配置。"""

    model_config = ConfigDict(frozen=True)

    cvot_folds: int = Field(default=10, gt=1)
    """CVOT 折数。"""
    untrained_draws: int = Field(default=1000, gt=0)
    """未训练基线的重复随机抽样次数。"""
    inner_val_fraction: float = Field(default=0.1, gt=0, lt=1)
    """训练折内用于早停的问题比例。"""
    n_permutations: int = Field(default=10_000, ge=100)
    """折间配对置换检验次数。"""


class ComponentAmplitudes(BaseModel):
    """单类词的 ERP 成分峰值幅度（µV）。"""

    model_config = ConfigDict(frozen=True)

    n100: float = 0.0
    """N100 高斯成分幅度（负向成分取负值）。"""
    p200: float = 0.0
    """P200 幅度。"""
    n400: float = 0.0
    """N400 幅度。"""
    p600: float = 0.0
    """P600 幅度。"""

    @property
    def n100_p200(self) -> float:
        """N100 到 P200 的峰间变化。

        Returns:
            p200 - n100。
        """
        return self.p200 - self.n100


def _default_components() -> dict[WordType, ComponentAmplitudes]:
    return {
        WordType.ANSWER: ComponentAmplitudes(n100=-3.0, p200=6.0, n400=-1.0, p600=4.0),
        WordType.SEMANTIC_RELATED: ComponentAmplitudes(n100=-2.0, p200=3.2, n400=-2.0, p600=0.5),
        WordType.ORDINARY: ComponentAmplitudes(n100=-2.0, p200=3.0, n400=-3.0, p600=1.5),
    }


def _default_gains() -> dict[Region, float]:
    return {
        Region.PREFRONTAL: 0.5,
        Region.FRONTAL: 0.7,
        Region.CENTRAL: 1.0,
        Region.PARIETAL: 1.0,
        Region.L_TEMPORAL: 0.9,
        Region.R_TEMPORAL: 0.9,
        Region.OCCIPITAL: 0.4,
    }


class EffectSpec(BaseModel):
    """合成数据中注入的 ERP 效应。"""

    model_config = ConfigDict(frozen=True)

    components: dict[WordType, ComponentAmplitudes] = Field(default_factory=_default_components)
    """每类词的成分幅度。"""
    roi_gains: dict[Region, float] = Field(default_factory=_default_gains)
    """各脑区的地形增益；不在任何脑区的电极增益为 0。"""
    noise_uv: float = Field(default=5.0, ge=0)
    """每通道粉红噪声标准差（µV）。"""
    artifact_rate: float = Field(default=0.0, ge=0, le=1)
    """每个词 epoch 注入 >100 µV 伪迹的概率。"""
    artifact_uv: float = Field(default=200.0, gt=0)
    """伪迹峰值幅度（µV）。"""
    common_mode_uv: float = Field(default=10.0, ge=0)
    """所有通道（含乳突）共享的参考漂移标准差（µV）。"""
    dc_offset_uv: float = Field(default=20.0, ge=0)
    """每通道直流偏置的最大幅度（µV）。"""

    @classmethod
    def silent(cls) -> EffectSpec:
        """无效应、无噪声、无伪迹的规格。

        Returns:
            全零 EffectSpec。
        """
        zero = ComponentAmplitudes()
        return cls(
            components=dict.fromkeys(WordType, zero),
            noise_uv=0.0,
            artifact_rate=0.0,
            common_mode_uv=0.0,
            dc_offset_uv=0.0,
        )

    def scaled(self, factor: float) -> EffectSpec:
        """返回所有成分幅度乘以 factor 的规格。

        Args:
            factor: 幅度缩放因子。

        Returns:
            新的 EffectSpec。
        """
        components = {
            wt: ComponentAmplitudes(
                n100=c.n100 * factor, p200=c.p200 * factor, n400=c.n400 * factor, p600=c.p600 * factor
            )
            for wt, c in self.components.items()
        }
        return self.model_copy(update={'components': components})

    @field_validator('components')
    @classmethod
    def _check_word_types(
        cls, value: dict[WordType, ComponentAmplitudes]
    ) -> dict[WordType, ComponentAmplitudes]:
        """验证三类词都给出了成分幅度。

        Args:
            value: 待验证的成分字典。

        Returns:
            原值。

        Raises:
            ValueError: 缺少某类词时抛出。
        """
        missing = [wt.value for wt in WordType if wt not in value]
        if missing:
            raise ValueError(f'components missing word types {missing}')
        return value


class SynthConfig(BaseModel):
    """合成会话的试次设计。"""

    model_config = ConfigDict(frozen=True)

    rate_hz: float = Field(default=1000.0, gt=0)
    """合成记录采样率。"""
    words_per_sentence: tuple[int, int] = (4, 8)
    """句长范围（闭区间）。"""
    sentences_per_question: int = Field(default=3, gt=0)
    """每个问题的候选句数（恰有一句完全相关）。"""
    soa_ms: float = Field(default=1000.0, gt=0)
    """相邻词的刺激起始间隔（750 ms 呈现 + 空屏）。"""
    question_ms: float = Field(default=1000.0, gt=0)
    """问题呈现时长。"""
    fixation_ms: float = Field(default=500.0, gt=0)
    """注视点时长。"""
    lead_ms: float = Field(default=1500.0, gt=0)
    """记录首尾的空白时长。"""
    gain_jitter: float = Field(default=0.1, ge=0)
    """被试间乘性增益的标准差。"""
    effects: EffectSpec = Field(default_factory=EffectSpec)
    """注入效应。"""

    @model_validator(mode='after')
    def _check_lengths(self) -> SynthConfig:
        """验证句长范围。

        Returns:
            验证通过后的 SynthConfig 实例。

        Raises:
            ValueError: 句长范围非法时抛出。
        """
        lo, hi = self.words_per_sentence
        if not 1 <= lo <= hi:
            raise ValueError(f'words_per_sentence {self.words_per_sentence} must satisfy 1 <= lo <= hi')
        return self


class ConfigSchema(BaseModel):
    """完整配置模型。"""

    model_config = ConfigDict(frozen=True)

    channels: tuple[str, ...] = Field(default_factory=lambda: tuple(default_channels()))
    """导联电极列表。"""
    preprocess: PreprocessConfig = Field(default_factory=PreprocessConfig)
    """预处理配置。"""
    erp: ErpConfig = Field(default_factory=ErpConfig)
    """ERP 分析配置。"""
    features: FeatureConfig = Field(default_factory=FeatureConfig)
    """特征配置。"""
    model: ModelConfig = Field(default_factory=ModelConfig)
    """模型配置。"""
    grid: ModelGrid = Field(default_factory=ModelGrid)
    """超参数网格。"""
    evaluation: EvalConfig = Field(default_factory=EvalConfig)
    """评估配置。"""
    synth: SynthConfig = Field(default_factory=SynthConfig)
    """合成数据配置。"""

    @model_validator(mode='after')
    def _check_montage(self) -> ConfigSchema:
        """验证乳突电极与所有脑区电极都存在于导联中，且特征维度与模型输入一致。

        Returns:
            验证通过后的 ConfigSchema 实例。

        Raises:
            ValueError: 电极缺失或维度不一致时抛出。
        """
        channels = set(self.channels)
        if len(channels) != len(self.channels):
            raise ValueError('channel names must be unique')
        for mastoid in self.preprocess.mastoids:
            if mastoid not in channels:
                raise ValueError(f'mastoid {mastoid} not in montage')
        for region, electrodes in self.erp.roi_map.regions.items():
            unknown = sorted(set(electrodes) - channels)
            if unknown:
                raise ValueError(f'region {region} references electrodes {unknown} not in montage')
        if self.features.dimension != self.model.d:
            raise ValueError(
                f'feature dimension ({self.features.dimension}) must equal model input d ({self.model.d})'
            )
        return self

    @classmethod
    def from_yaml(cls, path: str | Path) -> ConfigSchema:
        """从 YAML 文件加载配置。

        Args:
            path: YAML 文件路径。

        Returns:
            解析后的 ConfigSchema 实例。
        """
        data = yaml.safe_load(Path(path).read_text(encoding='utf-8')) or {}
        return cls.model_validate(data)
