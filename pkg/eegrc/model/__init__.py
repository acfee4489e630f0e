"""模型模块：UERCM 注意力模型的前向、反向、训练与检查点。"""
