"""Tokenizing and parsing of SPF TXT payloads.

Strict mode accepts only well-formed records. Lenient mode never fails on
a record that carries the version tag: every problem is classified into a
:class:`SyntaxSubtype` with a span into the raw text, and the terms that
could be understood are kept for downstream analysis.
"""

from __future__ import annotations

import enum
import ipaddress
import re
from dataclasses import dataclass, field
from typing import Union

from .exceptions import NotSpfError, SpfSyntaxError
from .macros import validate_macro_string

VERSION_TAG = "v=spf1"

MECHANISMS = ("all", "include", "a", "mx", "ptr", "ip4", "ip6", "exists")
LOOKUP_MECHANISMS = frozenset({"include", "a", "mx", "ptr", "exists"})
KNOWN_MODIFIERS = frozenset({"redirect", "exp", "ra", "rp", "rr"})
ABUSE_REPORT_MODIFIERS = frozenset({"ra", "rp", "rr"})

_VERSION_AT_START = re.compile(r"v=spf1(?=\s|$)", re.IGNORECASE)
_VERSION_ANYWHERE = re.compile(r"v=spf1", re.IGNORECASE)
_TOKEN = re.compile(r"\S+")
_MODIFIER = re.compile(r"([A-Za-z][A-Za-z0-9_.\-]*)=(.*)", re.DOTALL)
_DIRECTIVE = re.compile(r"([+\-~?]?)([A-Za-z0-9]*)(.*)", re.DOTALL)
_CIDR_SUFFIX = re.compile(r"(?:/(?P<cidr4>\d+))?(?://(?P<cidr6>\d+))?$")
_SITE_VERIFICATION = re.compile(r"[A-Za-z0-9_.\-]*-site-verification=", re.IGNORECASE)
_MARKUP = re.compile(r"<\s*/?\s*[A-Za-z][A-Za-z0-9\-]*(?:\s[^<>]*)?/?\s*>")
_DOTTED_NUMERIC = re.compile(r"[0-9.]+")
_HEX_COLON = re.compile(r"[0-9A-Fa-f:.]+")
_HOSTNAME = re.compile(r"[A-Za-z0-9_\-]+(?:\.[A-Za-z0-9_\-]+)+\.?")


class Qualifier(str, enum.Enum):
    PASS = "+"
    FAIL = "-"
    SOFTFAIL = "~"
    NEUTRAL = "?"


class SyntaxSubtype(str, enum.Enum):
    MISSPELLED_IP4 = "MisspelledIp4"
    MISSPELLED_IP6 = "MisspelledIp6"
    BARE_IP_MECHANISM = "BareIpMechanism"
    SITE_VERIFICATION_CONCAT = "SiteVerificationConcat"
    MULTIPLE_VERSION_TAGS = "MultipleVersionTags"
    WHITESPACE_AFTER_COLON = "WhitespaceAfterColon"
    INVALID_IP_NO_ADDRESS = "InvalidIpNoAddress"
    INVALID_IP_WRONG_OCTETS = "InvalidIpWrongOctets"
    INVALID_IP_DOMAIN_ARG = "InvalidIpDomainArg"
    INVALID_IP_WRONG_VERSION = "InvalidIpWrongVersion"
    UNKNOWN_TERM = "UnknownTerm"
    TRAILING_AFTER_ALL = "TrailingGarbageAfterAll"
    OTHER = "Other"

    @property
    def is_invalid_ip(self) -> bool:
        return self in INVALID_IP_SUBTYPES


INVALID_IP_SUBTYPES = frozenset({
    SyntaxSubtype.INVALID_IP_NO_ADDRESS,
    SyntaxSubtype.INVALID_IP_WRONG_OCTETS,
    SyntaxSubtype.INVALID_IP_DOMAIN_ARG,
    SyntaxSubtype.INVALID_IP_WRONG_VERSION,
})


@dataclass(frozen=True)
class SyntaxIssue:
    """One classified problem; ``span`` indexes into the raw record text."""

    subtype: SyntaxSubtype
    span: tuple[int, int]
    token: str
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "subtype": self.subtype.value,
            "span": list(self.span),
            "token": self.token,
            "detail": self.detail,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SyntaxIssue":
        return cls(SyntaxSubtype(data["subtype"]), tuple(data["span"]), data["token"], data.get("detail", ""))


@dataclass(frozen=True)
class Mechanism:
    kind: str
    domain: str | None = None
    cidr4: int | None = None
    cidr6: int | None = None
    address: str | None = None
    prefix: int | None = None

    @property
    def network(self) -> ipaddress.IPv4Network | ipaddress.IPv6Network | None:
        if self.address is None:
            return None
        return ipaddress.ip_network(f"{self.address}/{self.prefix}", strict=False)

    @property
    def causes_lookup(self) -> bool:
        return self.kind in LOOKUP_MECHANISMS

    def __str__(self) -> str:
        text = self.kind
        if self.kind in ("ip4", "ip6"):
            text += f":{self.address}"
            full = 32 if self.kind == "ip4" else 128
            if self.prefix != full:
                text += f"/{self.prefix}"
            return text
        if self.domain is not None:
            text += f":{self.domain}"
        if self.cidr4 is not None:
            text += f"/{self.cidr4}"
        if self.cidr6 is not None:
            text += f"//{self.cidr6}"
        return text


@dataclass(frozen=True)
class Directive:
    qualifier: Qualifier
    mechanism: Mechanism
    span: tuple[int, int] = field(default=(0, 0), compare=False)
    explicit_qualifier: bool = field(default=False, compare=False)

    @property
    def causes_lookup(self) -> bool:
        return self.mechanism.causes_lookup

    def __str__(self) -> str:
        prefix = ""
        if self.explicit_qualifier or self.qualifier is not Qualifier.PASS:
            prefix = self.qualifier.value
        return prefix + str(self.mechanism)


@dataclass(frozen=True)
class Modifier:
    name: str
    value: str
    span: tuple[int, int] = field(default=(0, 0), compare=False)

    @property
    def causes_lookup(self) -> bool:
        return self.name == "redirect"

    def __str__(self) -> str:
        return f"{self.name}={self.value}"


Term = Union[Directive, Modifier]


@dataclass
class SpfRecord:
    raw: str
    terms: list[Term] = field(default_factory=list)
    errors: list[SyntaxIssue] = field(default_factory=list)
    warnings: list[SyntaxIssue] = field(default_factory=list)

    version = VERSION_TAG

    @property
    def valid(self) -> bool:
        return not self.errors

    @property
    def directives(self) -> list[Directive]:
        return [t for t in self.terms if isinstance(t, Directive)]

    def modifier(self, name: str) -> Modifier | None:
        for term in self.terms:
            if isinstance(term, Modifier) and term.name == name:
                return term
        return None

    def effective_terms(self) -> list[Term]:
        """Terms an evaluator can reach: nothing after ``all`` or ``redirect``."""
        reached = []
        for term in self.terms:
            reached.append(term)
            if isinstance(term, Directive) and term.mechanism.kind == "all":
                break
            if isinstance(term, Modifier) and term.name == "redirect":
                break
        return reached


def has_version_tag(text: str) -> bool:
    return bool(_VERSION_AT_START.match(text))


def detect_embedded_markup(raw: str) -> bool:
    """True when the payload carries HTML/script-like tags."""
    return bool(_MARKUP.search(raw))


class TxtStatus(str, enum.Enum):
    FOUND = "Found"
    MISSING = "Missing"
    MULTIPLE = "Multiple"


@dataclass(frozen=True)
class SpfLookupOutcome:
    status: TxtStatus
    raw: str | None = None
    count: int = 0


def classify_txt_set(txt_records) -> SpfLookupOutcome:
    spf = [txt for txt in txt_records if has_version_tag(txt)]
    if len(spf) == 1:
        return SpfLookupOutcome(TxtStatus.FOUND, spf[0], 1)
    if spf:
        return SpfLookupOutcome(TxtStatus.MULTIPLE, None, len(spf))
    return SpfLookupOutcome(TxtStatus.MISSING)


def _classify_address(text: str, version: int) -> SyntaxSubtype | None:
    try:
        ip = ipaddress.ip_address(text)
    except ValueError:
        ip = None
    if ip is not None:
        return None if ip.version == version else SyntaxSubtype.INVALID_IP_WRONG_VERSION
    if version == 4 and _DOTTED_NUMERIC.fullmatch(text):
        return SyntaxSubtype.INVALID_IP_WRONG_OCTETS
    if version == 6 and ":" in text and _HEX_COLON.fullmatch(text):
        return SyntaxSubtype.INVALID_IP_WRONG_OCTETS
    if _HOSTNAME.fullmatch(text) and re.search("[A-Za-z]", text):
        return SyntaxSubtype.INVALID_IP_DOMAIN_ARG
    return SyntaxSubtype.OTHER


class _Parser:
    def __init__(self, raw: str):
        self.raw = raw
        self.terms: list[Term] = []
        self.errors: list[SyntaxIssue] = []
        self.warnings: list[SyntaxIssue] = []
        self._seen_modifiers: set[str] = set()

    def error(self, subtype, span, detail=""):
        self.errors.append(SyntaxIssue(subtype, span, self.raw[span[0]:span[1]], detail))

    def run(self) -> SpfRecord:
        tokens = [(m.start(), m.end(), m.group()) for m in _TOKEN.finditer(self.raw)]
        versions = list(_VERSION_ANYWHERE.finditer(self.raw))
        if len(versions) > 1:
            self.error(
                SyntaxSubtype.MULTIPLE_VERSION_TAGS,
                versions[1].span(),
                f"{len(versions)} version tags",
            )

        after_all = None
        index = 1
        while index < len(tokens):
            start, end, text = tokens[index]
            following = tokens[index + 1] if index + 1 < len(tokens) else None
            index += 1
            if _VERSION_ANYWHERE.search(text):
                continue
            if _SITE_VERIFICATION.search(text):
                self.error(SyntaxSubtype.SITE_VERIFICATION_CONCAT, (start, end))
                continue

            if following is not None and self._split_argument(text, following[2]):
                span = (start, following[1])
                self.error(SyntaxSubtype.WHITESPACE_AFTER_COLON, span, "whitespace before argument")
                term, _ = self._parse_term(text + following[2], span)
                index += 1
            else:
                term, _ = self._parse_term(text, (start, end))

            if term is None:
                continue
            if after_all is not None:
                self.warnings.append(SyntaxIssue(
                    SyntaxSubtype.TRAILING_AFTER_ALL,
                    term.span,
                    self.raw[term.span[0]:term.span[1]],
                    f"ignored after {after_all}",
                ))
            self.terms.append(term)
            if after_all is None and isinstance(term, Directive) and term.mechanism.kind == "all":
                after_all = str(term)

        return SpfRecord(self.raw, self.terms, self.errors, self.warnings)

    def _split_argument(self, text: str, following: str) -> bool:
        """True for ``ip4: 192.0.2.1`` style tokens whose argument drifted away."""
        if not (text.endswith(":") or text.endswith("=")):
            return False
        if text.endswith("=") and not _MODIFIER.fullmatch(text):
            return False
        probe = _Parser(following)
        probe_term, issues = probe._parse_term(following, (0, len(following)), record_errors=False)
        # the next token is a complete term on its own, so it is not our argument
        return probe_term is None or bool(issues)

    def _parse_term(self, text: str, span: tuple[int, int], record_errors: bool = True):
        issues: list[tuple[SyntaxSubtype, str]] = []
        term = self._term(text, span, issues)
        if record_errors:
            for subtype, detail in issues:
                self.error(subtype, span, detail)
        return (None if issues else term), issues

    def _term(self, text, span, issues):
        modifier = _MODIFIER.fullmatch(text)
        if modifier:
            name, value = modifier.group(1).lower(), modifier.group(2)
            if name in ("redirect", "exp"):
                if name in self._seen_modifiers:
                    issues.append((SyntaxSubtype.OTHER, f"duplicate {name} modifier"))
                    return None
                self._seen_modifiers.add(name)
                if not value:
                    issues.append((SyntaxSubtype.OTHER, f"{name} needs a domain"))
                    return None
            problem = validate_macro_string(value, allow_exp_letters=(name == "exp"))
            if problem:
                issues.append((SyntaxSubtype.OTHER, problem))
                return None
            return Modifier(name, value, span)

        qualifier_text, name, rest = _DIRECTIVE.fullmatch(text).groups()
        kind = name.lower()
        if kind == "ipv4":
            issues.append((SyntaxSubtype.MISSPELLED_IP4, "use ip4"))
            return None
        if kind == "ipv6":
            issues.append((SyntaxSubtype.MISSPELLED_IP6, "use ip6"))
            return None
        if kind == "ip":
            issues.append((SyntaxSubtype.BARE_IP_MECHANISM, "use ip4 or ip6"))
            return None
        if kind not in MECHANISMS:
            issues.append((SyntaxSubtype.UNKNOWN_TERM, f"unknown term {text!r}"))
            return None

        mechanism = self._mechanism(kind, rest, text, issues)
        if mechanism is None:
            return None
        qualifier = Qualifier(qualifier_text) if qualifier_text else Qualifier.PASS
        return Directive(qualifier, mechanism, span, bool(qualifier_text))

    def _mechanism(self, kind, rest, text, issues):
        if kind == "all":
            if rest:
                issues.append((SyntaxSubtype.UNKNOWN_TERM, f"unknown term {text!r}"))
                return None
            return Mechanism("all")

        if kind in ("ip4", "ip6"):
            version = 4 if kind == "ip4" else 6
            value = rest[1:] if rest.startswith(":") else ""
            if not value:
                if rest and not rest.startswith(":"):
                    issues.append((SyntaxSubtype.OTHER, f"malformed {kind} term"))
                else:
                    issues.append((SyntaxSubtype.INVALID_IP_NO_ADDRESS, f"{kind} without an address"))
                return None
            address, slash, prefix_text = value.partition("/")
            subtype = _classify_address(address, version)
            if subtype is not None:
                issues.append((subtype, f"{address!r} is not an IPv{version} address"))
                return None
            full = 32 if version == 4 else 128
            prefix = full
            if slash:
                if not prefix_text.isdigit() or int(prefix_text) > full:
                    issues.append((SyntaxSubtype.OTHER, f"invalid prefix length {prefix_text!r}"))
                    return None
                prefix = int(prefix_text)
            return Mechanism(kind, address=address, prefix=prefix)

        if kind in ("a", "mx"):
            suffix = _CIDR_SUFFIX.search(rest)
            head = rest[:suffix.start()]
            cidr4 = suffix.group("cidr4")
            cidr6 = suffix.group("cidr6")
            if cidr4 is not None and int(cidr4) > 32 or cidr6 is not None and int(cidr6) > 128:
                issues.append((SyntaxSubtype.OTHER, "invalid prefix length"))
                return None
            domain = self._domain_arg(kind, head, optional=True, issues=issues)
            if domain is False:
                return None
            return Mechanism(
                kind,
                domain=domain,
                cidr4=int(cidr4) if cidr4 is not None else None,
                cidr6=int(cidr6) if cidr6 is not None else None,
            )

        domain = self._domain_arg(kind, rest, optional=(kind == "ptr"), issues=issues)
        if domain is False:
            return None
        return Mechanism(kind, domain=domain)

    @staticmethod
    def _domain_arg(kind, head, optional, issues):
        """Domain after ``:``; None when absent and optional, False on error."""
        if not head:
            if optional:
                return None
            issues.append((SyntaxSubtype.OTHER, f"{kind} needs a domain"))
            return False
        if not head.startswith(":"):
            issues.append((SyntaxSubtype.UNKNOWN_TERM, f"unexpected text after {kind}"))
            return False
        domain = head[1:]
        if not domain:
            issues.append((SyntaxSubtype.OTHER, f"{kind} has an empty domain"))
            return False
        problem = validate_macro_string(domain)
        if problem:
            issues.append((SyntaxSubtype.OTHER, problem))
            return False
        return domain


def parse_spf(raw: str, mode: str = "strict") -> SpfRecord:
    """Parse a TXT payload.

    Raises NotSpfError if the version tag is missing. In strict mode any
    syntax error raises SpfSyntaxError; in lenient mode the errors are
    returned on the record alongside the terms that parsed.
    """
    if mode not in ("strict", "lenient"):
        raise ValueError(f"unknown parse mode {mode!r}")
    if not has_version_tag(raw):
        raise NotSpfError(raw)
    record = _Parser(raw).run()
    if mode == "strict" and record.errors:
        raise SpfSyntaxError(record)
    return record


def render(record: SpfRecord) -> str:
    return " ".join([VERSION_TAG] + [str(term) for term in record.terms])


def render_term(term: Term) -> str:
    return str(term)
