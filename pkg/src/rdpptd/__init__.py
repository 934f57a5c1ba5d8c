"""Reputation- and privacy-preserving truth discovery for mobile crowdsensing.

Library and simulator: ElGamal transport, matrix range commitments for
worker screening, reputation-weighted truth discovery over masked readings,
Beta-count reputations, and an experiment harness with adversary models.
"""

from rdpptd.errors import ConfigError, DomainError, ProtocolAbort

__version__ = "0.1.0"

__all__ = ["ConfigError", "DomainError", "ProtocolAbort", "__version__"]
