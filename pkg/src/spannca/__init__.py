"""Instance-based span classification for NER and chunking."""

__version__ = "0.1.0"
