"""
RSMA 双功能雷达通信能效优化器
Energy-efficiency maximization for RSMA-based dual-functional radar-communication
with low-resolution DACs and RF chain selection

Version: 1.0.1
"""

__version__ = "1.0.1"
__description__ = "RSMA 双功能雷达通信能效优化器"

__all__ = ['__version__']
