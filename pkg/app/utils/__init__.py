"""
Utility functions for MTLRRC.
"""
