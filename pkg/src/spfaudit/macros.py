"""Macro-string validation and expansion (RFC 7208 section 7)."""

from __future__ import annotations

import ipaddress
import re
from dataclasses import dataclass
from urllib.parse import quote

from .exceptions import MacroError

_MACRO_RE = re.compile(
    r"%(?:\{(?P<letter>[A-Za-z])(?P<digits>\d*)(?P<reverse>[rR]?)(?P<delims>[.\-+,/_=]*)\}"
    r"|(?P<escape>[%_-]))"
)
_LITERAL_RE = re.compile(r"[\x21-\x24\x26-\x7e]+")

MACRO_LETTERS = frozenset("slodiphv")
EXP_ONLY_LETTERS = frozenset("crt")
MAX_DOMAIN_LENGTH = 253


@dataclass(frozen=True)
class SessionInput:
    """Identity of an SMTP client as seen by the receiving server."""

    client_ip: ipaddress.IPv4Address | ipaddress.IPv6Address
    sender: str
    helo: str | None = None

    def __post_init__(self):
        if not isinstance(self.client_ip, (ipaddress.IPv4Address, ipaddress.IPv6Address)):
            object.__setattr__(self, "client_ip", ipaddress.ip_address(self.client_ip))
        if not self.sender_domain:
            raise ValueError(f"sender {self.sender!r} has no domain")

    @classmethod
    def for_domain(cls, client_ip, domain: str, helo: str | None = None) -> "SessionInput":
        return cls(client_ip, f"postmaster@{domain}", helo)

    @property
    def local_part(self) -> str:
        local, sep, _ = self.sender.rpartition("@")
        return local if sep and local else "postmaster"

    @property
    def sender_domain(self) -> str:
        return self.sender.rpartition("@")[2].rstrip(".").lower()


def has_macros(text: str | None) -> bool:
    return bool(text) and "%" in text


def validate_macro_string(text: str, allow_exp_letters: bool = False) -> str | None:
    """Return a problem description, or None when ``text`` is well formed."""
    pos = 0
    while pos < len(text):
        literal = _LITERAL_RE.match(text, pos)
        if literal:
            pos = literal.end()
            continue
        if text[pos] != "%":
            return f"invalid character {text[pos]!r}"
        macro = _MACRO_RE.match(text, pos)
        if not macro:
            return f"malformed macro at {text[pos:pos + 6]!r}"
        letter = (macro.group("letter") or "").lower()
        if letter and letter not in MACRO_LETTERS:
            if not (allow_exp_letters and letter in EXP_ONLY_LETTERS):
                return f"unknown macro letter {letter!r}"
        if macro.group("digits") and int(macro.group("digits")) == 0:
            return "macro transformer digit must be positive"
        pos = macro.end()
    return None


def _ip_value(ip) -> str:
    if ip.version == 4:
        return str(ip)
    return ".".join(ip.exploded.replace(":", ""))


def _letter_value(letter: str, session: SessionInput, domain: str) -> str:
    if letter == "s":
        return session.sender
    if letter == "l":
        return session.local_part
    if letter == "o":
        return session.sender_domain
    if letter == "d":
        return domain
    if letter in ("i", "c"):
        return _ip_value(session.client_ip) if letter == "i" else str(session.client_ip)
    if letter == "p":
        # validated reverse names need extra DNS traffic; RFC allows "unknown"
        return "unknown"
    if letter == "v":
        return "in-addr" if session.client_ip.version == 4 else "ip6"
    if letter == "h":
        return session.helo or "unknown"
    if letter == "r":
        return "unknown"
    if letter == "t":
        return "0"
    raise MacroError(f"unknown macro letter {letter!r}")


def _transform(value: str, digits: str, reverse: bool, delims: str) -> str:
    if delims:
        parts = re.split("[" + re.escape(delims) + "]", value)
    else:
        parts = value.split(".")
    if reverse:
        parts.reverse()
    if digits:
        count = int(digits)
        if count == 0:
            raise MacroError("macro transformer digit must be positive")
        parts = parts[-count:]
    return ".".join(parts)


def expand_macros(template: str, session: SessionInput, domain: str, exp: bool = False) -> str:
    """Expand a macro-string for one evaluation context.

    >>> s = SessionInput("192.0.2.1", "user@example.com")
    >>> expand_macros("%{i}.rbl.test", s, "example.com")
    '192.0.2.1.rbl.test'
    """
    out = []
    pos = 0
    while pos < len(template):
        nxt = template.find("%", pos)
        if nxt < 0:
            out.append(template[pos:])
            break
        out.append(template[pos:nxt])
        macro = _MACRO_RE.match(template, nxt)
        if not macro:
            raise MacroError(f"malformed macro in {template!r}")
        escape = macro.group("escape")
        if escape:
            out.append({"%": "%", "_": " ", "-": "%20"}[escape])
        else:
            raw_letter = macro.group("letter")
            letter = raw_letter.lower()
            if letter not in MACRO_LETTERS and not (exp and letter in EXP_ONLY_LETTERS):
                raise MacroError(f"unknown macro letter {raw_letter!r}")
            value = _transform(
                _letter_value(letter, session, domain),
                macro.group("digits"),
                bool(macro.group("reverse")),
                macro.group("delims"),
            )
            if raw_letter.isupper():
                value = quote(value, safe="-._~")
            out.append(value)
        pos = macro.end()
    return "".join(out)


def truncate_domain(name: str) -> str:
    """Drop leftmost labels until the name fits in 253 octets."""
    while len(name) > MAX_DOMAIN_LENGTH and "." in name:
        name = name.split(".", 1)[1]
    return name
