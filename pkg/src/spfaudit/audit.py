"""Per-domain audits: SPF, DMARC and MX facts plus every detectable problem."""

from __future__ import annotations

import dataclasses
import json
import threading
from dataclasses import dataclass, field
from typing import Callable

from .analysis import ExpansionReport, Expander, PermissivenessFlags, permissiveness_flags
from .dmarc import DmarcStatus, fetch_dmarc
from .evaluate import DEFAULT_MAX_DEPTH, audit_lookups
from .macros import has_macros
from .parser import Directive, SpfRecord, TxtStatus, classify_txt_set, has_version_tag, parse_spf
from .resolver import Resolver, RRType, normalize_name
from .taxonomy import NOT_FOUND_BY_STATUS, ErrorClass, NotFoundCause, not_found, syntax_error_classes

SCHEMA = "spf-audit/1"
DENY_ALL_RECORDS = ("v=spf1 -all", "v=spf1 ~all")
# Top-level causes that just mean the domain publishes no SPF.
ABSENT_CAUSES = frozenset({
    NotFoundCause.SPF_MISSING.value, NotFoundCause.NOT_EXISTING.value, NotFoundCause.EMPTY_ANSWER.value,
})


@dataclass(frozen=True)
class ExpansionSummary:
    """The parts of an expansion kept in audit output.

    ``included`` maps every domain reached through include to the size of
    its own expansion; ``include_prefixes`` lists prefixes of address
    blocks that came from included records.
    """

    ipv4_count: int
    include_depth: int
    top_level_includes: int
    included: dict = field(default_factory=dict)
    include_prefixes: tuple[int, ...] = ()
    final_all: str | None = None
    truncation: tuple[str, ...] = ()
    unexpandable: tuple[str, ...] = ()
    ip6_networks: tuple[str, ...] = ()

    @property
    def truncated(self) -> bool:
        return bool(self.truncation)

    @classmethod
    def from_report(cls, report: ExpansionReport, expander: Expander | None = None) -> "ExpansionSummary":
        included = {}
        for name in report.included:
            included[name] = expander.allowed_ips(name) if expander is not None else None
        prefixes = sorted(
            c.prefix for c in report.contributions if c.via_include and c.mechanism in ("ip4", "a", "mx")
        )
        return cls(
            ipv4_count=report.count(),
            include_depth=report.include_depth_max,
            top_level_includes=report.top_level_includes,
            included=included,
            include_prefixes=tuple(prefixes),
            final_all=report.final_all.value if report.final_all is not None else None,
            truncation=tuple(report.truncation),
            unexpandable=tuple(f"{u.origin}: {u.term} ({u.reason})" for u in report.unexpandable),
            ip6_networks=tuple(str(n) for n in report.ip6_networks),
        )

    def to_dict(self) -> dict:
        return {
            "ipv4_count": self.ipv4_count,
            "include_depth": self.include_depth,
            "top_level_includes": self.top_level_includes,
            "included": dict(sorted(self.included.items())),
            "include_prefixes": list(self.include_prefixes),
            "final_all": self.final_all,
            "truncation": list(self.truncation),
            "unexpandable": list(self.unexpandable),
            "ip6_networks": list(self.ip6_networks),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExpansionSummary":
        return cls(
            data["ipv4_count"], data["include_depth"], data["top_level_includes"], dict(data.get("included", {})),
            tuple(data.get("include_prefixes", ())), data.get("final_all"), tuple(data.get("truncation", ())),
            tuple(data.get("unexpandable", ())), tuple(data.get("ip6_networks", ())),
        )


@dataclass
class DomainAudit:
    domain: str
    rank: int | None = None
    mx_present: bool = False
    spf_present: bool = False
    spf_raw: str | None = None
    spf_rrt_present: bool = False
    errors: list[ErrorClass] = field(default_factory=list)
    dns_errors: list[ErrorClass] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    lookups: int = 0
    void_lookups: int = 0
    expansion: ExpansionSummary | None = None
    flags: PermissivenessFlags | None = None
    dmarc: DmarcStatus = field(default_factory=lambda: DmarcStatus(False))
    deny_all_only: bool = False

    @property
    def has_findings(self) -> bool:
        return bool(self.errors) or (self.flags is not None and self.flags.any())

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "domain": self.domain,
            "rank": self.rank,
            "mx_present": self.mx_present,
            "spf_present": self.spf_present,
            "spf_raw": self.spf_raw,
            "spf_rrt_present": self.spf_rrt_present,
            "errors": [e.to_dict() for e in self.errors],
            "dns_errors": [e.to_dict() for e in self.dns_errors],
            "warnings": list(self.warnings),
            "lookups": self.lookups,
            "void_lookups": self.void_lookups,
            "expansion": self.expansion.to_dict() if self.expansion else None,
            "flags": self.flags.to_dict() if self.flags else None,
            "dmarc": self.dmarc.to_dict(),
            "deny_all_only": self.deny_all_only,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "DomainAudit":
        if data.get("schema") != SCHEMA:
            raise ValueError(f"unsupported schema {data.get('schema')!r}")
        return cls(
            domain=data["domain"],
            rank=data.get("rank"),
            mx_present=data["mx_present"],
            spf_present=data["spf_present"],
            spf_raw=data.get("spf_raw"),
            spf_rrt_present=data.get("spf_rrt_present", False),
            errors=[ErrorClass.from_dict(e) for e in data.get("errors", [])],
            dns_errors=[ErrorClass.from_dict(e) for e in data.get("dns_errors", [])],
            warnings=list(data.get("warnings", [])),
            lookups=data.get("lookups", 0),
            void_lookups=data.get("void_lookups", 0),
            expansion=ExpansionSummary.from_dict(data["expansion"]) if data.get("expansion") else None,
            flags=PermissivenessFlags.from_dict(data["flags"]) if data.get("flags") else None,
            dmarc=DmarcStatus.from_dict(data["dmarc"]),
            deny_all_only=data.get("deny_all_only", False),
        )

    @classmethod
    def from_json(cls, line: str) -> "DomainAudit":
        return cls.from_dict(json.loads(line))


def is_deny_all_only(raw: str | None) -> bool:
    return raw is not None and " ".join(raw.split()).lower() in DENY_ALL_RECORDS


@dataclass
class _Analysis:
    """Everything derived from a record that does not depend on the domain name."""

    domain: str
    errors: list[ErrorClass]
    dns_errors: list[ErrorClass]
    warnings: list[str]
    lookups: int
    void_lookups: int
    expansion: ExpansionSummary
    flags: PermissivenessFlags
    portable: bool

    def rebind(self, domain: str) -> "_Analysis":
        if domain == self.domain:
            return self

        def move(error: ErrorClass) -> ErrorClass:
            return dataclasses.replace(error, domain=domain) if error.domain == self.domain else error

        return dataclasses.replace(
            self, domain=domain, errors=[move(e) for e in self.errors], dns_errors=[move(e) for e in self.dns_errors],
        )


@dataclass
class _CachedRecord:
    record: SpfRecord
    analysis: _Analysis | None = None


class RecordCache:
    """Thread-safe memo keyed on raw record text.

    A lookup that finds the key, or finds it inserted by another worker
    while computing, is a hit, so misses always equal distinct keys.
    """

    def __init__(self):
        self._entries: dict = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get_or_compute(self, key, compute: Callable[[], object]):
        with self._lock:
            if key in self._entries:
                self.hits += 1
                return self._entries[key]
        value = compute()
        with self._lock:
            if key in self._entries:
                self.hits += 1
                return self._entries[key]
            self.misses += 1
            self._entries[key] = value
            return value

    def __len__(self) -> int:
        return len(self._entries)


def _domain_independent(record: SpfRecord) -> bool:
    if has_macros(record.raw):
        return False
    for term in record.terms:
        if isinstance(term, Directive) and term.mechanism.kind in ("a", "mx", "ptr") and not term.mechanism.domain:
            return False
    return True


def _add_unique(target: list, items) -> None:
    for item in items:
        if item not in target:
            target.append(item)


class Auditor:
    """Builds DomainAudit objects; safe to share between worker threads."""

    def __init__(self, resolver: Resolver, use_record_cache: bool = True, max_depth: int = DEFAULT_MAX_DEPTH,
                 honor_lookup_budget: bool = False):
        self.resolver = resolver
        self.max_depth = max_depth
        self.expander = Expander(resolver, max_depth, honor_lookup_budget)
        self.cache = RecordCache() if use_record_cache else None

    def audit(self, domain: str, rank: int | None = None) -> DomainAudit:
        domain = normalize_name(domain)
        audit = DomainAudit(domain, rank)
        mx = self.resolver.resolve(domain, RRType.MX)
        audit.mx_present = mx.ok
        if mx.transient:
            audit.dns_errors.append(not_found(NotFoundCause.DNS_ERROR, domain, "MX"))
        audit.dmarc = fetch_dmarc(domain, self.resolver)
        audit.warnings.extend(f"DMARC: {w}" for w in audit.dmarc.warnings)
        spf_rrt = self.resolver.resolve(domain, RRType.SPF)
        audit.spf_rrt_present = spf_rrt.ok and any(has_version_tag(t) for t in spf_rrt.records)

        answer = self.resolver.resolve(domain, RRType.TXT)
        if not answer.ok:
            error = not_found(NOT_FOUND_BY_STATUS[answer.status], domain)
            if error.is_dns_error:
                audit.dns_errors.append(error)
            elif error.subtype not in ABSENT_CAUSES:
                audit.errors.append(error)
            return audit
        found = classify_txt_set(answer.records)
        if found.status is TxtStatus.MISSING:
            return audit
        audit.spf_present = True
        if found.status is TxtStatus.MULTIPLE:
            audit.errors.append(not_found(NotFoundCause.MULTIPLE_RECORDS, domain, f"{found.count} SPF records"))
            return audit

        audit.spf_raw = found.raw
        audit.deny_all_only = is_deny_all_only(found.raw)
        analysis = self._analysis(found.raw, domain)
        _add_unique(audit.errors, analysis.errors)
        _add_unique(audit.dns_errors, analysis.dns_errors)
        audit.warnings.extend(analysis.warnings)
        audit.lookups = analysis.lookups
        audit.void_lookups = analysis.void_lookups
        audit.expansion = analysis.expansion
        audit.flags = dataclasses.replace(analysis.flags, deprecated_spf_rrt=audit.spf_rrt_present)
        return audit

    def _analysis(self, raw: str, domain: str) -> _Analysis:
        if self.cache is None:
            return self._analyze(parse_spf(raw, "lenient"), domain)
        entry = self.cache.get_or_compute(raw, lambda: _CachedRecord(parse_spf(raw, "lenient")))
        shared = entry.analysis
        if shared is not None:
            return shared.rebind(domain)
        analysis = self._analyze(entry.record, domain)
        if analysis.portable:
            entry.analysis = analysis
        return analysis

    def _analyze(self, record: SpfRecord, domain: str) -> _Analysis:
        errors = syntax_error_classes(record.errors, domain)
        budget = audit_lookups(domain, self.resolver, record, self.max_depth)
        _add_unique(errors, budget.errors)
        expansion = self.expander.expand(domain, record)
        warnings = [issue.detail for issue in record.warnings]
        if budget.ptr_used:
            warnings.append("ptr mechanism is deprecated")
        portable = (
            _domain_independent(record)
            and not budget.dns_errors
            and not expansion.truncated
            and all(edge[1] != domain for edge in expansion.edges)
        )
        return _Analysis(
            domain=domain,
            errors=errors,
            dns_errors=list(budget.dns_errors),
            warnings=warnings,
            lookups=budget.lookups,
            void_lookups=budget.void_lookups,
            expansion=ExpansionSummary.from_report(expansion, self.expander),
            flags=permissiveness_flags(record, expansion, ptr_used=budget.ptr_used),
            portable=portable,
        )


def audit_domain(domain: str, resolver: Resolver, rank: int | None = None) -> DomainAudit:
    return Auditor(resolver).audit(domain, rank)
