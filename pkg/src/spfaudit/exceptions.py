"""Exception types shared across the package."""

from __future__ import annotations


class SpfAuditError(Exception):
    """Base class for errors raised by spfaudit."""


class NotSpfError(SpfAuditError, ValueError):
    """The text does not start with the ``v=spf1`` version tag."""

    def __init__(self, raw: str):
        super().__init__(f"not an SPF record: {raw[:60]!r}")
        self.raw = raw


class SpfSyntaxError(SpfAuditError, ValueError):
    """Strict parsing found syntax errors.

    The lenient parse result is kept on ``record`` so callers can still
    inspect the classified issues and the partial term list.
    """

    def __init__(self, record):
        self.record = record
        self.errors = list(record.errors)
        kinds = ", ".join(issue.subtype.value for issue in self.errors)
        super().__init__(f"invalid SPF record ({kinds})")


class MacroError(SpfAuditError, ValueError):
    """A macro-string cannot be expanded."""


class ParseError(SpfAuditError, ValueError):
    """Malformed line in an input file (zone fixture, domain list, audits)."""

    def __init__(self, message: str, lineno: int | None = None, source: str | None = None):
        self.lineno = lineno
        self.source = source
        where = ""
        if source:
            where += f"{source}:"
        if lineno is not None:
            where += f"{lineno}:"
        super().__init__(f"{where} {message}".strip() if where else message)


class NoFindings(SpfAuditError):
    """Raised by remediation_text for an audit without errors or flags."""


class ReportIOError(SpfAuditError, OSError):
    """Writing or reading a report file failed."""

    def __init__(self, path, cause: OSError):
        super().__init__(f"{path}: {cause.strerror or cause}")
        self.path = path
        self.cause = cause
