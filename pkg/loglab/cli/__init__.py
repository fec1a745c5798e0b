"""
Command-line stage commands.
"""
