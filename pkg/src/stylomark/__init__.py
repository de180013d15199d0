"""Sentence-keyed stylometric watermarking for generated text.

Each completed sentence is classified into semantic labels; the winning
labels form a key (an acrostic letter plus a sensorimotor category) that
biases token sampling for the following sentence.  Detection re-derives
the keys from the text alone and combines two exact statistics: a normal
test on keyed sensorimotor ratings and a binomial test on acrostic hits.
"""

__version__ = "0.1.0"

PROTOCOL_VERSION = "v1"

from .errors import (  # noqa: F401
    AttackError,
    GenerationError,
    IngestError,
    InsufficientTextError,
    KeyDerivationError,
    MetricsError,
    ProtocolError,
    StatisticError,
    StylomarkError,
    TransportError,
)
