"""Domain lists, concurrent scans and corpus-level statistics."""

from __future__ import annotations

import csv
import io
import itertools
from collections import Counter, defaultdict
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .analysis import LARGE_PREFIX_MAX
from .audit import SCHEMA, Auditor, DomainAudit
from .exceptions import ParseError
from .parser import SyntaxSubtype
from .resolver import CacheStats, CachingResolver, RateLimitedResolver, Resolver, name_problem, normalize_name
from .taxonomy import ErrorKind

FORMATS = ("tranco", "plain")
TOP_INCLUDES = 20


@dataclass(frozen=True)
class DomainEntry:
    domain: str
    rank: int | None = None

    def __post_init__(self):
        if not self.domain or self.domain != self.domain.lower():
            raise ValueError(f"domain must be non-empty and lowercase: {self.domain!r}")
        if self.rank is not None and self.rank < 1:
            raise ValueError(f"rank must be positive: {self.rank}")


def _domain(text: str, lineno: int, source: str) -> str:
    name = normalize_name(text.strip())
    if not name or any(ch.isspace() or ch == "," for ch in name) or name_problem(name) is not None:
        raise ParseError(f"invalid domain {text.strip()!r}", lineno, source)
    return name


def load_domain_list(stream, format: str = "tranco", source: str = "<list>") -> list[DomainEntry]:
    """Read a ranked ``rank,domain`` CSV or a plain one-domain-per-line list.

    Repeated domains keep their best (lowest) rank. Entries come back
    ordered by rank, ties and unranked lists keeping input order.
    """
    if format not in FORMATS:
        raise ValueError(f"unknown list format {format!r}")
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    best: dict[str, tuple] = {}
    for lineno, line in enumerate(stream, 1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        if format == "plain":
            name = _domain(text, lineno, source)
            best.setdefault(name, (None, lineno))
            continue
        row = next(csv.reader([text]))
        if lineno == 1 and [c.strip().lower() for c in row] == ["rank", "domain"]:
            continue
        if len(row) != 2:
            raise ParseError("expected 'rank,domain'", lineno, source)
        try:
            rank = int(row[0])
        except ValueError:
            raise ParseError(f"rank is not an integer: {row[0]!r}", lineno, source) from None
        if rank < 1:
            raise ParseError(f"rank must be positive: {rank}", lineno, source)
        name = _domain(row[1], lineno, source)
        if name not in best or rank < best[name][0]:
            best[name] = (rank, best.get(name, (None, lineno))[1])
    ordered = sorted(best.items(), key=lambda item: (item[1][0] or 0, item[1][1]))
    return [DomainEntry(name, rank) for name, (rank, _) in ordered]


@dataclass(frozen=True)
class ScanOptions:
    concurrency: int = 8
    qps: float | None = None
    cache_capacity: int = 10_000
    record_cache: bool = True
    honor_lookup_budget: bool = False

    def __post_init__(self):
        if self.concurrency < 1:
            raise ValueError("concurrency must be at least 1")
        if self.qps is not None and self.qps <= 0:
            raise ValueError("qps must be positive")


class Scanner:
    """Audits many domains on a bounded worker pool.

    The resolver cache sits in front of the rate limiter so cached answers
    cost no query budget.
    """

    def __init__(self, resolver: Resolver, options: ScanOptions = ScanOptions()):
        self.options = options
        if options.qps is not None:
            resolver = RateLimitedResolver(resolver, options.qps)
        self.dns_cache = None
        if options.cache_capacity > 0:
            resolver = self.dns_cache = CachingResolver(resolver, options.cache_capacity)
        self.resolver = resolver
        self.auditor = Auditor(resolver, options.record_cache, honor_lookup_budget=options.honor_lookup_budget)

    @property
    def record_cache_hits(self) -> int:
        return self.auditor.cache.hits if self.auditor.cache else 0

    @property
    def dns_cache_stats(self) -> CacheStats | None:
        return self.dns_cache.stats if self.dns_cache else None

    def _audit(self, entry: DomainEntry) -> DomainAudit:
        try:
            return self.auditor.audit(entry.domain, entry.rank)
        except Exception as exc:  # a broken domain must never stop the scan
            audit = DomainAudit(entry.domain, entry.rank)
            audit.warnings.append(f"audit failed: {type(exc).__name__}: {exc}")
            return audit

    def scan(self, entries: Iterable[DomainEntry]) -> Iterator[DomainAudit]:
        """Yield audits as they complete (not in input order)."""
        entries = iter(entries)
        limit = self.options.concurrency * 4
        with ThreadPoolExecutor(max_workers=self.options.concurrency) as pool:
            pending = {pool.submit(self._audit, e) for e in itertools.islice(entries, limit)}
            while pending:
                done, pending = wait(pending, return_when=FIRST_COMPLETED)
                for future in done:
                    yield future.result()
                for entry in itertools.islice(entries, len(done)):
                    pending.add(pool.submit(self._audit, entry))


def scan(entries, resolver: Resolver, options: ScanOptions = ScanOptions()) -> Iterator[DomainAudit]:
    return Scanner(resolver, options).scan(entries)


def canonical_order(audits) -> list[DomainAudit]:
    return sorted(audits, key=lambda a: a.domain)


def error_breakdown_key(error) -> list[str]:
    """Subtype labels an error contributes to the per-class breakdown."""
    if error.kind is ErrorKind.SYNTAX_ERROR:
        labels = {issue.subtype.value for issue in error.syntax} or {SyntaxSubtype.OTHER.value}
        return sorted(labels)
    if error.kind is ErrorKind.INCLUDE_LOOP:
        return [f"depth {error.depth}"]
    return [error.subtype] if error.subtype else []


def cdf_points(values) -> list[tuple[int, float]]:
    """Empirical CDF as (value, fraction of samples <= value) at each distinct value."""
    values = sorted(values)
    n = len(values)
    points = []
    for i, value in enumerate(values, 1):
        if i == n or values[i] != value:
            points.append((value, i / n))
    return points


def _fraction(part: int, whole: int) -> float:
    return part / whole if whole else 0.0


@dataclass
class CorpusStats:
    totals: dict = field(default_factory=dict)
    adoption: dict = field(default_factory=dict)
    error_histogram: dict = field(default_factory=dict)
    error_subtypes: dict = field(default_factory=dict)
    dns_error_domains: int = 0
    cdf_points: list = field(default_factory=list)
    top_includes: list = field(default_factory=list)
    top_level_include_histogram: dict = field(default_factory=dict)
    subnet_size_histogram: dict = field(default_factory=dict)
    large_cidr_table: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "totals": dict(self.totals),
            "adoption": dict(self.adoption),
            "error_histogram": dict(self.error_histogram),
            "error_subtypes": {k: dict(v) for k, v in self.error_subtypes.items()},
            "dns_error_domains": self.dns_error_domains,
            "cdf_points": [[v, f] for v, f in self.cdf_points],
            "top_includes": [list(row) for row in self.top_includes],
            "top_level_include_histogram": {str(k): v for k, v in self.top_level_include_histogram.items()},
            "subnet_size_histogram": {str(k): v for k, v in self.subnet_size_histogram.items()},
            "large_cidr_table": {str(k): dict(v) for k, v in self.large_cidr_table.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CorpusStats":
        return cls(
            totals=dict(data["totals"]),
            adoption=dict(data["adoption"]),
            error_histogram=dict(data["error_histogram"]),
            error_subtypes={k: dict(v) for k, v in data["error_subtypes"].items()},
            dns_error_domains=data.get("dns_error_domains", 0),
            cdf_points=[(v, f) for v, f in data["cdf_points"]],
            top_includes=[tuple(row) for row in data["top_includes"]],
            top_level_include_histogram={int(k): v for k, v in data["top_level_include_histogram"].items()},
            subnet_size_histogram={int(k): v for k, v in data["subnet_size_histogram"].items()},
            large_cidr_table={int(k): dict(v) for k, v in data["large_cidr_table"].items()},
        )


def aggregate(audits: Iterable[DomainAudit], top_n: int | None = TOP_INCLUDES) -> CorpusStats:
    """Fold audits into corpus statistics.

    Error counts are per domain: a class counts once however often it
    occurs in one audit. DNS errors are tallied separately.
    """
    totals = Counter(scanned=0, with_mx=0, with_spf=0, with_dmarc=0, spf_without_mx=0, deny_all_only=0,
                     deny_all_without_mx=0, with_errors=0, with_expansion=0)
    errors: Counter = Counter()
    subtypes: dict = defaultdict(Counter)
    dns_domains = 0
    counts = []
    usage: Counter = Counter()
    allowed: dict = {}
    top_level: Counter = Counter()
    subnets: Counter = Counter()
    large = {p: {"direct": 0, "include": 0} for p in range(LARGE_PREFIX_MAX + 1)}

    for audit in audits:
        totals["scanned"] += 1
        totals["with_mx"] += audit.mx_present
        totals["with_spf"] += audit.spf_present
        totals["with_dmarc"] += audit.dmarc.present
        totals["spf_without_mx"] += audit.spf_present and not audit.mx_present
        totals["deny_all_only"] += audit.deny_all_only
        totals["deny_all_without_mx"] += audit.deny_all_only and not audit.mx_present
        totals["with_errors"] += bool(audit.errors)
        dns_domains += bool(audit.dns_errors)
        for kind in {e.kind.value for e in audit.errors}:
            errors[kind] += 1
        seen = {(e.kind.value, label) for e in audit.errors for label in error_breakdown_key(e)}
        for kind, label in seen:
            subtypes[kind][label] += 1
        if audit.expansion is None:
            continue
        expansion = audit.expansion
        totals["with_expansion"] += 1
        counts.append(expansion.ipv4_count)
        top_level[expansion.top_level_includes] += 1
        subnets.update(expansion.include_prefixes)
        for name, size in expansion.included.items():
            usage[name] += 1
            if size is not None:
                allowed.setdefault(name, size)
        if audit.flags is not None:
            for prefix in audit.flags.huge_cidr_direct:
                large[prefix]["direct"] += 1
            for prefix in audit.flags.huge_cidr_via_include:
                large[prefix]["include"] += 1

    scanned = totals["scanned"]
    ranked = sorted(usage.items(), key=lambda item: (-item[1], item[0]))
    if top_n is not None:
        ranked = ranked[:top_n]
    return CorpusStats(
        totals=dict(totals),
        adoption={
            "spf": _fraction(totals["with_spf"], scanned),
            "dmarc": _fraction(totals["with_dmarc"], scanned),
            "mx": _fraction(totals["with_mx"], scanned),
            "errors_among_spf": _fraction(totals["with_errors"], totals["with_spf"]),
        },
        error_histogram=dict(sorted(errors.items())),
        error_subtypes={k: dict(sorted(v.items())) for k, v in sorted(subtypes.items())},
        dns_error_domains=dns_domains,
        cdf_points=cdf_points(counts),
        top_includes=[(name, used, allowed.get(name)) for name, used in ranked],
        top_level_include_histogram=dict(sorted(top_level.items())),
        subnet_size_histogram=dict(sorted(subnets.items())),
        large_cidr_table=large,
    )
