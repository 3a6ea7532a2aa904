"""
Honest Forest Lab - Core Module
Settings, models, errors and seeding shared by every package.
"""

__version__ = "1.0.0"
__author__ = "Honest Forest Lab Team"
