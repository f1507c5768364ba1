"""
RSMA-DFRC能效优化器测试模块
"""
