"""
vgan Diagnostics

Self-test suites for the tensor engine, the conv kernel, NIfTI I/O and
rotations.
"""

from .selftest import SelfTest, SuiteResult

__all__ = ["SelfTest", "SuiteResult"]
