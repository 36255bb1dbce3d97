"""DNS resolution behind one small interface.

Three resolvers share the ``resolve(name, rrtype) -> DnsAnswer`` call:
:class:`LiveResolver` talks to a recursive server through dnspython,
:class:`FixtureResolver` answers from a zone fixture, and the
:class:`CachingResolver` / :class:`RateLimitedResolver` decorators wrap
either one. Failures are answers, never exceptions.
"""

from __future__ import annotations

import enum
import ipaddress
import math
import os
import re
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol

import dns.exception
import dns.name
import dns.resolver

from .exceptions import ParseError

ENV_RESOLVER = "SPF_AUDIT_RESOLVER"
DEFAULT_TIMEOUT = 5.0
MAX_LABEL_OCTETS = 63
MAX_NAME_OCTETS = 255


class RRType(str, enum.Enum):
    TXT = "TXT"
    A = "A"
    AAAA = "AAAA"
    MX = "MX"
    PTR = "PTR"
    SPF = "SPF"


class Status(str, enum.Enum):
    RECORDS = "Records"
    NXDOMAIN = "NxDomain"
    EMPTY = "Empty"
    TIMEOUT = "Timeout"
    SERVFAIL = "ServFail"
    LABEL_TOO_LONG = "LabelTooLong"
    NAME_TOO_LONG = "NameTooLong"
    DECODE_ERROR = "DecodeError"


@dataclass(frozen=True)
class DnsAnswer:
    """Outcome of one query.

    ``records`` holds strings for TXT/SPF/A/AAAA/PTR and ``(preference,
    host)`` tuples for MX. It is non-empty exactly when status is RECORDS.
    """

    status: Status
    records: tuple = ()

    def __post_init__(self):
        if (self.status is Status.RECORDS) != bool(self.records):
            raise ValueError("records must be non-empty exactly for RECORDS answers")

    @classmethod
    def of(cls, records: Iterable) -> "DnsAnswer":
        records = tuple(records)
        return cls(Status.RECORDS, records) if records else cls(Status.EMPTY)

    @property
    def ok(self) -> bool:
        return self.status is Status.RECORDS

    @property
    def void(self) -> bool:
        return self.status in (Status.NXDOMAIN, Status.EMPTY)

    @property
    def transient(self) -> bool:
        return self.status in (Status.TIMEOUT, Status.SERVFAIL)


NXDOMAIN = DnsAnswer(Status.NXDOMAIN)
EMPTY = DnsAnswer(Status.EMPTY)


def normalize_name(name: str) -> str:
    name = name.strip().lower()
    return name[:-1] if name.endswith(".") else name


def name_problem(name: str) -> Status | None:
    """Status for a name that cannot be put on the wire, else None."""
    try:
        encoded = name.encode("ascii")
    except UnicodeEncodeError:
        try:
            encoded = name.encode("idna")
        except UnicodeError:
            return Status.DECODE_ERROR
    labels = encoded.split(b".") if encoded else []
    if any(len(label) > MAX_LABEL_OCTETS for label in labels):
        return Status.LABEL_TOO_LONG
    # wire form: one length octet per label plus the root label
    if sum(len(label) + 1 for label in labels) + 1 > MAX_NAME_OCTETS:
        return Status.NAME_TOO_LONG
    if not encoded or any(not label for label in labels):
        return Status.DECODE_ERROR
    return None


@dataclass(frozen=True)
class DnsQuery:
    name: str
    rrtype: RRType

    @classmethod
    def make(cls, name: str, rrtype) -> "DnsQuery":
        return cls(normalize_name(name), RRType(rrtype))


class Resolver(Protocol):
    def resolve(self, name: str, rrtype) -> DnsAnswer: ...


@dataclass
class ZoneFixture:
    """Static answers keyed by ``(name, rrtype)``.

    Name-wide failures injected with ``ERROR`` lines are stored under the
    rrtype ``"*"``. A name that has entries, but none for the queried type,
    answers EMPTY (NODATA); unknown names get ``default``.
    """

    entries: dict = field(default_factory=dict)
    default: DnsAnswer = NXDOMAIN

    def __post_init__(self):
        self._names = {name for name, _ in self.entries}

    def add(self, name: str, rrtype: str, answer: DnsAnswer) -> None:
        key = (normalize_name(name), rrtype)
        existing = self.entries.get(key)
        if existing is not None and existing.ok and answer.ok:
            answer = DnsAnswer(Status.RECORDS, existing.records + answer.records)
        self.entries[key] = answer
        self._names.add(key[0])

    def lookup(self, query: DnsQuery) -> DnsAnswer:
        answer = self.entries.get((query.name, query.rrtype.value))
        if answer is not None:
            return answer
        answer = self.entries.get((query.name, "*"))
        if answer is not None:
            return answer
        if query.name in self._names:
            return EMPTY
        return self.default

    def knows(self, name: str) -> bool:
        return normalize_name(name) in self._names

    def names(self) -> set[str]:
        return set(self._names)


class FixtureResolver:
    def __init__(self, fixture: ZoneFixture):
        self.fixture = fixture

    def resolve(self, name: str, rrtype) -> DnsAnswer:
        query = DnsQuery.make(name, rrtype)
        problem = name_problem(query.name)
        if problem is not None:
            return DnsAnswer(problem)
        return self.fixture.lookup(query)


@dataclass(frozen=True)
class CacheStats:
    hits: int
    misses: int
    entries: int

    @property
    def queries(self) -> int:
        return self.hits + self.misses


class CachingResolver:
    """LRU cache in front of another resolver.

    Transient failures (timeouts, SERVFAIL) are passed through but not kept.
    """

    def __init__(self, inner: Resolver, capacity: int = 100_000):
        if capacity < 1:
            raise ValueError("cache capacity must be at least 1")
        self.inner = inner
        self.capacity = capacity
        self._entries: OrderedDict[DnsQuery, DnsAnswer] = OrderedDict()
        self._lock = threading.Lock()
        self._hits = 0
        self._misses = 0

    def resolve(self, name: str, rrtype) -> DnsAnswer:
        key = DnsQuery.make(name, rrtype)
        with self._lock:
            answer = self._entries.get(key)
            if answer is not None:
                self._entries.move_to_end(key)
                self._hits += 1
                return answer
            self._misses += 1
        answer = self.inner.resolve(key.name, key.rrtype)
        if not answer.transient:
            with self._lock:
                self._entries[key] = answer
                self._entries.move_to_end(key)
                while len(self._entries) > self.capacity:
                    self._entries.popitem(last=False)
        return answer

    @property
    def stats(self) -> CacheStats:
        with self._lock:
            return CacheStats(self._hits, self._misses, len(self._entries))


class RateLimitedResolver:
    """Token bucket limiter: ``qps`` tokens per second, burst of ceil(qps)."""

    def __init__(self, inner: Resolver, qps: float, clock=time.monotonic, sleep=time.sleep):
        if not qps > 0:
            raise ValueError("qps must be positive")
        self.inner = inner
        self.qps = float(qps)
        self.burst = math.ceil(qps)
        self._clock = clock
        self._sleep = sleep
        self._tokens = float(self.burst)
        self._last = clock()
        self._lock = threading.Lock()

    def _acquire(self) -> None:
        with self._lock:
            now = self._clock()
            self._tokens = min(self.burst, self._tokens + (now - self._last) * self.qps)
            self._last = now
            if self._tokens >= 1:
                self._tokens -= 1
                return
            self._sleep((1 - self._tokens) / self.qps)
            self._last = self._clock()
            self._tokens = 0.0

    def resolve(self, name: str, rrtype) -> DnsAnswer:
        self._acquire()
        return self.inner.resolve(name, rrtype)


def parse_endpoint(text: str) -> tuple[str, int]:
    """Split ``host:port`` (``[v6]:port`` for IPv6); the port defaults to 53."""
    text = text.strip()
    match = re.fullmatch(r"\[([^\]]+)\](?::(\d+))?", text)
    if match:
        return match.group(1), int(match.group(2) or 53)
    if text.count(":") == 1:
        host, port = text.split(":")
        if not port.isdigit():
            raise ValueError(f"invalid port in {text!r}")
        return host, int(port)
    if not text:
        raise ValueError("empty resolver endpoint")
    return text, 53


class LiveResolver:
    """Queries a recursive resolver over UDP, retrying over TCP on truncation."""

    def __init__(self, nameserver: str | None = None, port: int = 53, timeout: float = DEFAULT_TIMEOUT):
        self._resolver = dns.resolver.Resolver(configure=nameserver is None)
        if nameserver is not None:
            self._resolver.nameservers = [str(ipaddress.ip_address(nameserver))]
            self._resolver.port = port
        self._resolver.timeout = timeout
        self._resolver.lifetime = timeout
        self._resolver.cache = None

    @classmethod
    def from_env(cls, timeout: float = DEFAULT_TIMEOUT) -> "LiveResolver":
        endpoint = os.environ.get(ENV_RESOLVER)
        if endpoint:
            host, port = parse_endpoint(endpoint)
            return cls(host, port, timeout)
        return cls(timeout=timeout)

    def resolve(self, name: str, rrtype) -> DnsAnswer:
        query = DnsQuery.make(name, rrtype)
        problem = name_problem(query.name)
        if problem is not None:
            return DnsAnswer(problem)
        try:
            answer = self._resolver.resolve(query.name + ".", query.rrtype.value, search=False)
        except dns.resolver.NXDOMAIN:
            return NXDOMAIN
        except dns.resolver.NoAnswer:
            return EMPTY
        except dns.exception.Timeout:
            return DnsAnswer(Status.TIMEOUT)
        except dns.name.LabelTooLong:
            return DnsAnswer(Status.LABEL_TOO_LONG)
        except dns.name.NameTooLong:
            return DnsAnswer(Status.NAME_TOO_LONG)
        except UnicodeError:
            return DnsAnswer(Status.DECODE_ERROR)
        except dns.exception.DNSException:
            return DnsAnswer(Status.SERVFAIL)
        try:
            return DnsAnswer.of(_rdata_payload(query.rrtype, rdata) for rdata in answer)
        except UnicodeDecodeError:
            return DnsAnswer(Status.DECODE_ERROR)


def _rdata_payload(rrtype: RRType, rdata):
    if rrtype in (RRType.TXT, RRType.SPF):
        return b"".join(rdata.strings).decode("utf-8")
    if rrtype is RRType.MX:
        return (rdata.preference, normalize_name(rdata.exchange.to_text()))
    if rrtype is RRType.PTR:
        return normalize_name(rdata.target.to_text())
    return rdata.address


class OverlayResolver:
    """Fixture answers for names the fixture knows, the fallback for the rest."""

    def __init__(self, fixture: ZoneFixture, fallback: Resolver):
        self.fixture = fixture
        self._fixture_resolver = FixtureResolver(fixture)
        self.fallback = fallback

    def resolve(self, name: str, rrtype) -> DnsAnswer:
        if self.fixture.knows(name):
            return self._fixture_resolver.resolve(name, rrtype)
        return self.fallback.resolve(name, rrtype)


_ERROR_OUTCOMES = {
    "NXDOMAIN": NXDOMAIN,
    "EMPTY": EMPTY,
    "TIMEOUT": DnsAnswer(Status.TIMEOUT),
    "SERVFAIL": DnsAnswer(Status.SERVFAIL),
}
_QUOTED = re.compile(r'"((?:[^"\\]|\\.)*)"')


def _strip_comment(line: str) -> str:
    quoted = False
    escaped = False
    for pos, char in enumerate(line):
        if escaped:
            escaped = False
        elif char == "\\":
            escaped = True
        elif char == '"':
            quoted = not quoted
        elif char == "#" and not quoted:
            return line[:pos]
    return line


def _unescape(text: str) -> bytes:
    out = bytearray()
    pos = 0
    while pos < len(text):
        char = text[pos]
        if char == "\\" and pos + 1 < len(text):
            decimal = re.match(r"\d{3}", text[pos + 1:])
            if decimal:
                out.append(int(decimal.group()) & 0xFF)
                pos += 4
                continue
            out.extend(text[pos + 1].encode("utf-8"))
            pos += 2
            continue
        out.extend(char.encode("utf-8"))
        pos += 1
    return bytes(out)


def _txt_value(value: str, lineno: int, source) -> DnsAnswer:
    pos = 0
    chunks = []
    for match in _QUOTED.finditer(value):
        if value[pos:match.start()].strip():
            raise ParseError("unquoted text in TXT value", lineno, source)
        chunks.append(_unescape(match.group(1)))
        pos = match.end()
    if not chunks or value[pos:].strip():
        raise ParseError("TXT values must be double-quoted", lineno, source)
    try:
        return DnsAnswer.of([b"".join(chunks).decode("utf-8")])
    except UnicodeDecodeError:
        return DnsAnswer(Status.DECODE_ERROR)


def _fixture_line(line: str, lineno: int, source):
    parts = line.split(None, 2)
    if len(parts) < 3:
        raise ParseError("expected '<name> <RRTYPE> <value>'", lineno, source)
    name, rrtype, value = parts[0], parts[1].upper(), parts[2].strip()
    if rrtype == "ERROR":
        outcome = _ERROR_OUTCOMES.get(value.upper())
        if outcome is None:
            raise ParseError(f"unknown error outcome {value!r}", lineno, source)
        return name, "*", outcome
    try:
        rrtype = RRType(rrtype).value
    except ValueError:
        raise ParseError(f"unsupported record type {parts[1]!r}", lineno, source) from None
    if rrtype in ("TXT", "SPF"):
        return name, rrtype, _txt_value(value, lineno, source)
    if rrtype == "MX":
        fields = value.split()
        if len(fields) != 2 or not fields[0].isdigit():
            raise ParseError("MX value must be '<pref> <host>'", lineno, source)
        return name, rrtype, DnsAnswer.of([(int(fields[0]), normalize_name(fields[1]))])
    if rrtype in ("A", "AAAA"):
        try:
            address = ipaddress.ip_address(value)
        except ValueError:
            raise ParseError(f"invalid address {value!r}", lineno, source) from None
        if address.version != (4 if rrtype == "A" else 6):
            raise ParseError(f"{rrtype} record with IPv{address.version} address", lineno, source)
        return name, rrtype, DnsAnswer.of([str(address)])
    return name, rrtype, DnsAnswer.of([normalize_name(value)])


def load_zone_fixture(source) -> ZoneFixture:
    """Read the line-oriented fixture format from a path, text or stream.

    Raises ParseError with the line number of the first malformed line.
    """
    label = None
    if isinstance(source, (str, os.PathLike)) and not (isinstance(source, str) and "\n" in source):
        label = str(source)
        text = Path(source).read_text(encoding="utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
        label = getattr(source, "name", None)
    fixture = ZoneFixture()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = _strip_comment(line).strip()
        if not line:
            continue
        name, rrtype, answer = _fixture_line(line, lineno, label)
        fixture.add(name, rrtype, answer)
    return fixture


def fixture_resolver(text: str) -> FixtureResolver:
    """Build a resolver straight from fixture text; handy in tests and notebooks."""
    return FixtureResolver(load_zone_fixture(text if "\n" in text else text + "\n"))
