"""LLM-generated autograder test suites for CS1 C problems, with differential evaluation."""

__version__ = "0.1.0"
