"""Secret key rates of Gaussian continuous-variable QKD over noisy lossy channels."""

__version__ = "0.1.0"

from .errors import (CVQKDError, DomainError, EstimationError, NonConvergenceError,  # noqa: E402
                     NumericError, UnsupportedConfigError)
from .rates import (ChannelModel, Measurement, Preparation, ProtocolConfig,  # noqa: E402
                    RateReport, Reconciliation, keyrate)

__all__ = [
    "CVQKDError", "DomainError", "EstimationError", "NonConvergenceError", "NumericError",
    "UnsupportedConfigError", "ChannelModel", "Measurement", "Preparation", "ProtocolConfig",
    "RateReport", "Reconciliation", "keyrate", "__version__",
]
