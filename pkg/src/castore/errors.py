class CasError(Exception):
    """Base class for store and naming errors."""


class ContentTooLarge(CasError, ValueError):
    pass


class ObjectNotFound(CasError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class IntegrityError(CasError):
    """No replica of an object matches its content address."""


class SchemeMismatch(CasError, ValueError):
    pass


class ReplicaWriteError(CasError, OSError):
    def __init__(self, ca, node: str, cause: OSError) -> None:
        super().__init__(f"failed writing replica of {ca} on {node}: {cause}")
        self.ca = ca
        self.node = node
        self.cause = cause
