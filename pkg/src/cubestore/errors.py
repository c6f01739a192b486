"""Exception hierarchy shared by every cubestore module."""


class CubeStoreError(Exception):
    """Base class for all errors raised by cubestore."""


class DomainError(CubeStoreError, ValueError):
    """An argument lies outside the domain of an operation."""


class SchemaError(CubeStoreError, ValueError):
    """A relation does not fit its declared schema."""


class IntegrityError(CubeStoreError, ValueError):
    """Relation semantics were violated, e.g. a duplicate key."""

    def __init__(self, message: str, key=None):
        self.key = key
        super().__init__(message)


class CapacityError(CubeStoreError, ValueError):
    """A value does not fit the fixed width chosen for it."""


class FormatError(CubeStoreError, IOError):
    """A persisted file is malformed. Carries the file path and byte offset."""

    def __init__(self, path, offset: int, message: str):
        self.path = path
        self.offset = offset
        super().__init__(f"{path}: offset {offset}: {message}")


class RetrievalMismatch(CubeStoreError, AssertionError):
    """A benchmarked lookup returned something other than the stored measure."""

    def __init__(self, representation: str, key, expected, got):
        self.representation = representation
        self.key = key
        self.expected = expected
        self.got = got
        super().__init__(
            f"{representation}: key {tuple(key)} returned {got!r}, expected {expected!r}"
        )
