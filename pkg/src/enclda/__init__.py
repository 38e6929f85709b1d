"""Fisher-LDA classifier with encrypted-domain classification over Paillier."""

__version__ = "0.1.0"
