"""Metamorphic testing of black-box image captioning systems via image-level reduction."""

__version__ = "0.1.0"
