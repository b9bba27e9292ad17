"""
mwdml: multiway cluster-robust double/debiased machine learning
"""

__version__ = "0.1.0"
