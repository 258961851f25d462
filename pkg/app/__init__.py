"""
MTLRRC - multi-task learning via robust regularized clustering
"""

__version__ = "0.1.0"
