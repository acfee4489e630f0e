"""信号模块：会话记录、预处理与文件读写。"""
