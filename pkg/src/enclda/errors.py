"""Exception hierarchy shared across the package.

Each class maps to one CLI exit code (see cli.EXIT_CODES), so new error
kinds should subclass one of these rather than raising bare exceptions.
"""


class EncldaError(Exception):
    """Base class for all errors raised by this package."""


class DataError(EncldaError):
    """Bad dataset, image file, or model file contents."""


class CryptoError(EncldaError):
    """Key generation failure, key mismatch, or plaintext out of range."""


class ProtocolError(EncldaError):
    """Two-party protocol violation: bad phase, parameters, or blinds."""


class TransportError(EncldaError):
    """Framing or connection failure on the wire."""
