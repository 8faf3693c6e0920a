"""Exception types shared across the package."""


class FormatError(Exception):
    """A binary file violates the expected layout (magic, version, bounds)."""


class UnknownImageError(KeyError):
    """The requested image id is not present in the store."""

    def __str__(self) -> str:  # KeyError quotes its args; keep the message plain
        return self.args[0] if self.args else ""
