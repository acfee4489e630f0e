"""类型别名与共享枚举，提升类型注释可读性。"""

from __future__ import annotations

from enum import StrEnum


ParticipantId = str  # 被试标识类型别名
TrialId = int  # 试次（句子）标识类型别名
QuestionId = int  # 问题标识类型别名
WordIndex = int  # 句内词序号类型别名
ChannelName = str  # 电极名称类型别名（10-20 系统）
WordKey = tuple[ParticipantId, TrialId, WordIndex]  # 词级样本主键


class WordType(StrEnum):
    """词类型（数据集构造时标注）。"""

    ANSWER = 'answer'
    """答案词。"""
    SEMANTIC_RELATED = 'semantic_related'
    """与问题语义相关的词。"""
    ORDINARY = 'ordinary'
    """普通词。"""


class SentenceRelevance(StrEnum):
    """句子与问题的相关性等级。"""

    PERFECTLY_RELEVANT = 'perfectly_relevant'
    """完全相关（包含答案）。"""
    RELEVANT = 'relevant'
    """相关。"""
    IRRELEVANT = 'irrelevant'
    """不相关。"""


class Region(StrEnum):
    """脑区（ROI）名称。"""

    PREFRONTAL = 'prefrontal'
    FRONTAL = 'frontal'
    CENTRAL = 'central'
    PARIETAL = 'parietal'
    L_TEMPORAL = 'l-temporal'
    R_TEMPORAL = 'r-temporal'
    OCCIPITAL = 'occipital'


class Band(StrEnum):
    """脑电频带名称。"""

    DELTA = 'delta'
    THETA = 'theta'
    ALPHA = 'alpha'
    BETA = 'beta'


class Task(StrEnum):
    """下游任务。"""

    ANSWER_EXTRACTION = 'answer_extraction'
    """词级二分类：该词是否为答案。"""
    SENTENCE_CLASSIFICATION = 'sentence_classification'
    """句级二分类：该句是否完全相关。"""


class Scheme(StrEnum):
    """数据划分策略。"""

    CVOT = 'cvot'
    """按问题做十折交叉验证。"""
    LOPO = 'lopo'
    """留一被试。"""


WORD_TYPE_ORDER = (WordType.ANSWER, WordType.SEMANTIC_RELATED, WordType.ORDINARY)  # 报告中的条件顺序
