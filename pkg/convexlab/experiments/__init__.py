#!/usr/bin/env python3

"""
Package initialization for convexlab.experiments
Study bodies, plots and the experiment runner.
"""

from .studies import STUDIES, ExperimentConfig, StudyResult
from .runner import ExperimentRunner

__all__ = ['STUDIES', 'ExperimentConfig', 'StudyResult', 'ExperimentRunner']
