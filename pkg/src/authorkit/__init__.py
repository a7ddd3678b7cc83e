"""Authorship attribution toolkit.

Trains a small text encoder with a joint cross-entropy + supervised
contrastive objective and provides the surrounding analysis machinery:
stylometric author features, inter-author distance reports, confusion
matrix algebra, and 2-D embedding projections.
"""

__version__ = "0.1.0"
