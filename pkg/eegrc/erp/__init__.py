"""ERP 分析模块：总平均、GFP 时间窗、脑区成分测量与统计检验。"""
