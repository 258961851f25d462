"""
Numerical services for MTLRRC.
"""

from .admm import FusedCentroidEngine
from .solver import MTLRRCSolver
from .tuning import GridSearch
from .bench import Benchmark
