"""eegrc - EEG 阅读理解：ERP 分析、词级脑电特征与答案抽取注意力模型"""

__version__ = '0.1.0'
