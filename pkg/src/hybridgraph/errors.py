"""Exception types. Every error carries a short machine-readable ``code``."""


class HybridIndexError(Exception):
    code = "error"

    def __init__(self, code: str, message: str = ""):
        self.code = code
        super().__init__(f"{code}: {message}" if message else code)


class ValidationError(HybridIndexError, ValueError):
    """Malformed vectors, weights or queries."""


class CorpusError(HybridIndexError, ValueError):
    """Corpus-level problems: empty, duplicate ids, inconsistent dims."""


class BuildError(HybridIndexError):
    """Index construction parameters that cannot be satisfied."""


class IndexFormatError(HybridIndexError):
    """Unreadable or corrupted index files."""
