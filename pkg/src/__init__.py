"""
Honest Forest Lab - Root Package
"""

__version__ = "1.0.0"
__author__ = "Honest Forest Lab Team"
