"""
穷举基线
"""

from rsma_dfrc.oracle.search import OracleResult, exhaustive_selection, grid_search

__all__ = ['OracleResult', 'exhaustive_selection', 'grid_search']
