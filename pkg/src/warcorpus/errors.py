"""Exception hierarchy.

Everything raised because of bad *data* (malformed CDX lines, corrupt gzip
members, unparseable HTTP messages) derives from :class:`ArchiveError`, which
the command line maps to exit status 2.  Programming errors in plan or
enrichment definitions derive from :class:`ValueError` instead.
"""


class ArchiveError(Exception):
    """Base class for errors caused by archive, index or record content."""


class CdxFormatError(ArchiveError, ValueError):
    """A CDX line does not have the expected number of fields."""

    def __init__(self, count: int, message: str | None = None):
        self.count = count
        super().__init__(message or f"expected 11 CDX fields, got {count}")


class NineFieldCdxError(CdxFormatError):
    """A 9-field CDX line; only the 11-field layout carries a record length."""

    def __init__(self):
        super().__init__(
            9, "9-field CDX lines are not supported (no compressed length); "
            "regenerate the index in the 11-field format")


class CdxParseError(ArchiveError, ValueError):
    def __init__(self, field: str, value: str):
        self.field = field
        self.value = value
        super().__init__(f"invalid CDX {field}: {value!r}")


class SurtError(ArchiveError, ValueError):
    pass


class WarcFormatError(ArchiveError):
    pass


class NotMemberAlignedError(WarcFormatError):
    pass


class HttpFormatError(WarcFormatError):
    pass


class LocatorError(ArchiveError):
    pass


class CorruptRecordError(ArchiveError):
    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


class PathError(ValueError):
    """A field path violates the key grammar or targets a read-only root."""


class TypedAccessError(TypeError):
    pass


class EnrichmentError(ArchiveError):
    """An enrichment could not produce its result for one record."""


class RegistryError(ValueError):
    pass


class PlanError(ValueError):
    pass


class FilterSyntaxError(PlanError):
    pass
