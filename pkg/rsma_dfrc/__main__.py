"""
支持 python -m rsma_dfrc 调用
"""

if __name__ == '__main__':
    from rsma_dfrc.cli import main
    main()
