"""Online soft-prompt personalization with neural bandits."""

__version__ = "0.1.0"
