"""Two-party secure inference for small quantized CNNs.

The server holds a model, the client holds an input; the client learns the
predicted label. Nonlinear layers run on XOR/additive shares with Beaver bit
triples, linear layers on RLWE ciphertexts with NTT-preprocessed weights.
"""
from .rings import QuantTensor, RingParams, reconstruct, share_split, signed_view
from .session import Session, session_pair
from .transport import Tag, TcpChannel, loopback_pair

__version__ = "0.1.0"

__all__ = [
    "QuantTensor", "RingParams", "Session", "Tag", "TcpChannel",
    "loopback_pair", "reconstruct", "session_pair", "share_split", "signed_view",
]
