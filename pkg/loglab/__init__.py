"""
LogLAB: weakly supervised labeling of log anomalies.
"""
