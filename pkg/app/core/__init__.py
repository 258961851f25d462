"""
Core functionality (settings, logging, exceptions) for MTLRRC.
"""
