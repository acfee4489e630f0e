"""评估模块：AUC / MAP、CVOT / LOPO 划分与相对未训练基线的增量报告。"""
