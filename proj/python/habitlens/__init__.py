"""Revealed-preference tests for habits over characteristics."""

from ._core import *  # noqa: F401,F403
from ._core import HabitlensError, Panel, Technology, TestOutcome, Certificate  # noqa: F401

__version__ = "0.1.0"
