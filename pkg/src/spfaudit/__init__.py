"""SPF policy auditing: parsing, evaluation, address expansion and corpus scans."""

from .analysis import (
    ExpansionReport,
    Expander,
    IncludeGraph,
    PermissivenessFlags,
    build_include_graph,
    expand_authorized_ips,
    flag_large_cidrs,
    permissiveness_flags,
    spoofable_domains,
    subnet_size_distribution,
    top_level_include_histogram,
)
from .audit import Auditor, DomainAudit, audit_domain
from .corpus import CorpusStats, DomainEntry, ScanOptions, Scanner, aggregate, load_domain_list, scan
from .dmarc import DmarcStatus, fetch_dmarc
from .evaluate import CheckOutcome, SpfResult, audit_lookups, check_host, fetch_and_classify
from .ipset import IpSet, count_ips
from .macros import SessionInput, expand_macros
from .parser import SpfRecord, SyntaxSubtype, parse_spf, render
from .report import emit_report, read_audits_jsonl, remediation_text
from .resolver import (
    CachingResolver,
    FixtureResolver,
    LiveResolver,
    RateLimitedResolver,
    fixture_resolver,
    load_zone_fixture,
)
from .taxonomy import ErrorClass, ErrorKind, NotFoundCause

__version__ = "0.1.0"

__all__ = [
    "aggregate",
    "audit_domain",
    "audit_lookups",
    "Auditor",
    "build_include_graph",
    "CachingResolver",
    "check_host",
    "CheckOutcome",
    "CorpusStats",
    "count_ips",
    "DmarcStatus",
    "DomainAudit",
    "DomainEntry",
    "emit_report",
    "ErrorClass",
    "ErrorKind",
    "expand_authorized_ips",
    "expand_macros",
    "Expander",
    "ExpansionReport",
    "fetch_and_classify",
    "fetch_dmarc",
    "fixture_resolver",
    "FixtureResolver",
    "flag_large_cidrs",
    "IncludeGraph",
    "IpSet",
    "LiveResolver",
    "load_domain_list",
    "load_zone_fixture",
    "NotFoundCause",
    "parse_spf",
    "permissiveness_flags",
    "PermissivenessFlags",
    "RateLimitedResolver",
    "read_audits_jsonl",
    "remediation_text",
    "render",
    "scan",
    "Scanner",
    "ScanOptions",
    "SessionInput",
    "SpfRecord",
    "SpfResult",
    "spoofable_domains",
    "subnet_size_distribution",
    "SyntaxSubtype",
    "top_level_include_histogram",
]
