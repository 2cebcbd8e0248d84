"""
clarisim: mixed-initiative augmentation and reranking for ad-hoc IR collections.
"""

__version__ = "0.1.0"
