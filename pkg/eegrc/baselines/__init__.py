"""基线模块：未训练随机模型、句子得分聚合与逻辑回归词打分器。"""
