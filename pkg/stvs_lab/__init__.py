"""
STVS Lab - short-term voltage stability assessment with topology-aware
voltage dynamic features and a transferable CNN classifier.
"""

__version__ = "0.1.0"
__author__ = "STVS Lab contributors"
