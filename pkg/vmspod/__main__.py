"""
Main entry point for python -m vmspod
"""

from .cli import main

if __name__ == '__main__':
    main()
