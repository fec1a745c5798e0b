"""
Core package for configuration, schemas and errors.
"""
