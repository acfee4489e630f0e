"""合成模块：嵌入 ERP 效应的带标签合成 EEG 会话。"""
