"""配置模块：YAML 解析与 Pydantic 模型校验。"""
