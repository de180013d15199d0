"""Label-scoring and next-token distribution service speaking protocol v1."""

__version__ = "0.1.0"

PROTOCOL_VERSION = "v1"
