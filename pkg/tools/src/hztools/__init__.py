"""Fixture tooling for the hzreach model format.

Deliberately independent of the hzreach package: models are written and
evaluated by this package's own implementation of the file format and the
layer semantics, so probe files act as cross-implementation checks.
"""

__version__ = "0.1.0"
