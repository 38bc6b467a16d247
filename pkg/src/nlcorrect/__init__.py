"""Character-level neural grammatical error correction with n-gram LM fusion."""

__version__ = "0.1.0"
