"""Cross-language passage retrieval and evaluation harness for Quranic QA."""

__version__ = "0.1.0"
