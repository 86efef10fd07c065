"""Out-of-process cross-encoder: HTTP scoring service and fine-tuning job."""

__version__ = "0.1.0"
