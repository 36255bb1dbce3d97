"""Error classes attached to evaluations and domain audits."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .parser import SyntaxIssue, SyntaxSubtype
from .resolver import Status


class ErrorKind(str, enum.Enum):
    RECORD_NOT_FOUND = "RecordNotFound"
    TOO_MANY_LOOKUPS = "TooManyLookups"
    TOO_MANY_VOID_LOOKUPS = "TooManyVoidLookups"
    SYNTAX_ERROR = "SyntaxError"
    INCLUDE_LOOP = "IncludeLoop"
    REDIRECT_LOOP = "RedirectLoop"
    INVALID_IP = "InvalidIp"


class NotFoundCause(str, enum.Enum):
    SPF_MISSING = "SpfMissing"
    NOT_EXISTING = "NotExisting"
    MULTIPLE_RECORDS = "MultipleRecords"
    EMPTY_ANSWER = "EmptyAnswer"
    DNS_ERROR = "DnsError"
    LABEL_TOO_LONG = "LabelTooLong"
    NAME_TOO_LONG = "NameTooLong"
    DECODE_ERROR = "DecodeError"


NOT_FOUND_BY_STATUS = {
    Status.NXDOMAIN: NotFoundCause.NOT_EXISTING,
    Status.EMPTY: NotFoundCause.EMPTY_ANSWER,
    Status.TIMEOUT: NotFoundCause.DNS_ERROR,
    Status.SERVFAIL: NotFoundCause.DNS_ERROR,
    Status.LABEL_TOO_LONG: NotFoundCause.LABEL_TOO_LONG,
    Status.NAME_TOO_LONG: NotFoundCause.NAME_TOO_LONG,
    Status.DECODE_ERROR: NotFoundCause.DECODE_ERROR,
}


@dataclass(frozen=True)
class ErrorClass:
    """One entry of the error taxonomy.

    ``subtype`` carries the record-not-found cause or the invalid-IP
    variant; ``depth`` is only set for include loops (0 = self inclusion);
    ``syntax`` lists the parser issues behind a SyntaxError.
    """

    kind: ErrorKind
    subtype: str | None = None
    domain: str | None = None
    depth: int | None = None
    detail: str = ""
    syntax: tuple[SyntaxIssue, ...] = ()

    @property
    def is_dns_error(self) -> bool:
        return self.kind is ErrorKind.RECORD_NOT_FOUND and self.subtype == NotFoundCause.DNS_ERROR.value

    def label(self) -> str:
        if self.kind is ErrorKind.INCLUDE_LOOP:
            return f"IncludeLoop({self.depth})"
        if self.subtype:
            return f"{self.kind.value}({self.subtype})"
        return self.kind.value

    def to_dict(self) -> dict:
        return {
            "class": self.kind.value,
            "subtype": self.subtype,
            "domain": self.domain,
            "depth": self.depth,
            "detail": self.detail,
            "syntax": [issue.to_dict() for issue in self.syntax],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ErrorClass":
        return cls(
            ErrorKind(data["class"]),
            data.get("subtype"),
            data.get("domain"),
            data.get("depth"),
            data.get("detail", ""),
            tuple(SyntaxIssue.from_dict(item) for item in data.get("syntax", ())),
        )


def not_found(cause: NotFoundCause, domain: str | None = None, detail: str = "") -> ErrorClass:
    return ErrorClass(ErrorKind.RECORD_NOT_FOUND, cause.value, domain, detail=detail)


def syntax_error_classes(issues, domain: str | None = None) -> list[ErrorClass]:
    """Group parser issues: one InvalidIp per variant, one SyntaxError for the rest."""
    classes = []
    seen_ip = set()
    other = []
    for issue in issues:
        if issue.subtype is SyntaxSubtype.TRAILING_AFTER_ALL:
            continue
        if issue.subtype.is_invalid_ip:
            if issue.subtype not in seen_ip:
                seen_ip.add(issue.subtype)
                classes.append(ErrorClass(ErrorKind.INVALID_IP, issue.subtype.value, domain, detail=issue.token))
        else:
            other.append(issue)
    if other:
        classes.insert(0, ErrorClass(ErrorKind.SYNTAX_ERROR, None, domain, syntax=tuple(other)))
    return classes


def first_syntax_error(issues, domain: str | None = None) -> ErrorClass | None:
    """The error an evaluator reports: whichever issue comes first in the text."""
    issues = [i for i in issues if i.subtype is not SyntaxSubtype.TRAILING_AFTER_ALL]
    if not issues:
        return None
    first = min(issues, key=lambda issue: issue.span)
    if first.subtype.is_invalid_ip:
        return ErrorClass(ErrorKind.INVALID_IP, first.subtype.value, domain, detail=first.token)
    rest = tuple(i for i in issues if not i.subtype.is_invalid_ip)
    return ErrorClass(ErrorKind.SYNTAX_ERROR, None, domain, syntax=rest)
