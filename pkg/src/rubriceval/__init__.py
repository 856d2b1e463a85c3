"""Rubric-driven evaluation harness for AI-generated images of cultural artifacts.

The package covers the full loop: rubric modeling and validation, image
dataset generation manifests, multimodal judge prompting and verdict
parsing, human annotation storage, agreement and validation analytics,
report rendering, a CLI, and an HTTP service for annotation sessions.
"""

__version__ = "0.1.0"
