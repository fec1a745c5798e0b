"""
Tests package for LogLAB.
"""
