class SecInfError(Exception):
    """Base class for every error raised by this package."""


class DomainError(SecInfError, ValueError):
    pass


class TransportError(SecInfError, ConnectionError):
    pass


class ProtocolDesyncError(SecInfError):
    """Peer sent a frame with an unexpected protocol tag."""


class HandshakeError(SecInfError):
    pass


class OTStateError(SecInfError, RuntimeError):
    pass


class ConfigurationError(SecInfError):
    pass


class GenerationError(SecInfError):
    pass


class NTTDomainError(SecInfError):
    """Polynomial is in the wrong (coefficient vs. NTT) representation."""


class NoiseBudgetError(SecInfError):
    pass


class UnsupportedShapeError(SecInfError, ValueError):
    pass


class EncodingError(SecInfError, ValueError):
    pass


class FormatError(SecInfError, ValueError):
    """Malformed tensor/model/program file."""


class ValidationError(SecInfError, ValueError):
    def __init__(self, msg, layer=None):
        super().__init__(msg if layer is None else f"layer {layer}: {msg}")
        self.layer = layer
