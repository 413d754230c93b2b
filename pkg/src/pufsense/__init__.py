"""PUF-bound sensor attestation and secure camera node toolkit."""

__version__ = "0.1.0"
