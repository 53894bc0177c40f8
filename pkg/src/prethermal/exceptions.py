class ResourceLimitError(ValueError):
    """Requested problem exceeds a configured memory/size cap."""


class ConfigError(ValueError):
    """Invalid experiment configuration; ``errors`` lists (path, message) pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{path}: {msg}" for path, msg in self.errors))
