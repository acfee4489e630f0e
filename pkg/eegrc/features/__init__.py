"""特征模块：69 维词级 EEG 特征（频带特征 + ERP 时间点特征）与标准化。"""
