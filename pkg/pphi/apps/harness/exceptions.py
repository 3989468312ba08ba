from typing import Dict, List

from ...exceptions import ConfigurationError


class ConfigFileError(ConfigurationError):
    """A run configuration is unreadable, has unknown keys or fails validation."""

    def __init__(self, message: str, errors: Dict[str, List[str]] = None):
        self.errors = errors or {}
        details = "; ".join(f"{key}: {' '.join(msgs)}" for key, msgs in sorted(self.errors.items()))
        super().__init__(f"{message} ({details})" if details else message)
