"""
Multi-Cluster Reference Learning toolkit
Class-conditional kernel-MMD domain adaptation with multi-cluster pseudo-label references
"""
__version__ = "1.0.0"
