"""
Test suite for Honest Forest Lab.
"""
