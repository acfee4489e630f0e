"""工具模块：类型别名与异常体系。"""
