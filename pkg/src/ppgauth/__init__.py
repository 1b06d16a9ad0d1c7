"""PPG biometric verification with CWT features and direct LDA."""

__version__ = "0.1.0"

from .config import RunConfig
from .errors import PPGAuthError

__all__ = ["RunConfig", "PPGAuthError", "__version__"]
