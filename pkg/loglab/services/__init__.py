"""
Services package for the labeling pipeline stages.
"""
