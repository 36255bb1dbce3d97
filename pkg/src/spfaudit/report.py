"""Report files (JSONL audits, stats JSON, CSV tables) and remediation text."""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path
from typing import Iterable

from .analysis import LARGE_PREFIX_MAX, MANY_IPS_THRESHOLD
from .audit import DomainAudit
from .corpus import CorpusStats, canonical_order
from .evaluate import LOOKUP_LIMIT, VOID_LOOKUP_LIMIT
from .exceptions import NoFindings, ParseError, ReportIOError
from .parser import SyntaxSubtype
from .taxonomy import ErrorClass, ErrorKind, NotFoundCause

FORMATS = ("jsonl", "json", "csv")
AUDITS_FILE = "audits.jsonl"
STATS_FILE = "stats.json"
TABLES_DIR = "tables"


def _open(path, mode="w"):
    try:
        return open(path, mode, encoding="utf-8", newline="" if "w" in mode else None)
    except OSError as exc:
        raise ReportIOError(path, exc) from exc


def audits_to_jsonl(audits: Iterable[DomainAudit]) -> str:
    """Canonical JSONL: sorted by domain, sorted keys, compact separators."""
    return "".join(a.to_json() + "\n" for a in canonical_order(audits))


def write_jsonl(audits: Iterable[DomainAudit], path) -> Path:
    path = Path(path)
    with _open(path) as fh:
        try:
            fh.write(audits_to_jsonl(audits))
        except OSError as exc:
            raise ReportIOError(path, exc) from exc
    return path


def read_audits_jsonl(path_or_stream) -> list[DomainAudit]:
    if isinstance(path_or_stream, (str, os.PathLike)):
        source = str(path_or_stream)
        with _open(path_or_stream, "r") as fh:
            lines = fh.readlines()
    else:
        source = getattr(path_or_stream, "name", "<stream>")
        lines = path_or_stream.readlines()
    audits = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            audits.append(DomainAudit.from_json(line))
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(f"not a valid audit line: {exc}", lineno, source) from None
    return audits


def write_stats_json(stats: CorpusStats, path) -> Path:
    path = Path(path)
    with _open(path) as fh:
        json.dump(stats.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def table_rows(stats: CorpusStats) -> dict[str, tuple[list[str], list[list]]]:
    """Every CSV table as (header, rows), keyed by file name."""
    return {
        "top_includes.csv": (
            ["include", "used_by", "allowed_ips"],
            [[name, used, "" if ips is None else ips] for name, used, ips in stats.top_includes],
        ),
        "large_cidrs.csv": (
            ["cidr", "direct", "include"],
            [[f"/{p}", stats.large_cidr_table.get(p, {}).get("direct", 0),
              stats.large_cidr_table.get(p, {}).get("include", 0)] for p in range(LARGE_PREFIX_MAX + 1)],
        ),
        "errors.csv": (
            ["class", "subtype", "domains"],
            [[kind, "", count] for kind, count in stats.error_histogram.items()]
            + [[kind, label, count] for kind, labels in stats.error_subtypes.items() for label, count in labels.items()],
        ),
        "ip_count_cdf.csv": (["ipv4_count", "fraction"], [[v, f"{f:.6f}"] for v, f in stats.cdf_points]),
        "top_level_includes.csv": (
            ["includes", "domains"], [[k, v] for k, v in stats.top_level_include_histogram.items()],
        ),
        "subnet_sizes.csv": (["prefix", "count"], [[k, v] for k, v in stats.subnet_size_histogram.items()]),
    }


def write_csv_tables(stats: CorpusStats, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportIOError(out_dir, exc) from exc
    written = []
    for name, (header, rows) in table_rows(stats).items():
        path = out_dir / name
        with _open(path) as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        written.append(path)
    return written


def emit_report(stats: CorpusStats, audits, out_dir, formats=FORMATS, figures: bool = False) -> list[Path]:
    """Write the requested artifacts under ``out_dir`` and return their paths."""
    unknown = set(formats) - set(FORMATS)
    if unknown:
        raise ValueError(f"unknown report formats: {sorted(unknown)}")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportIOError(out_dir, exc) from exc
    written = []
    if "jsonl" in formats:
        written.append(write_jsonl(audits, out_dir / AUDITS_FILE))
    if "json" in formats:
        written.append(write_stats_json(stats, out_dir / STATS_FILE))
    if "csv" in formats:
        written.extend(write_csv_tables(stats, out_dir / TABLES_DIR))
    if figures:
        from .plots import render_figures

        written.extend(render_figures(stats, out_dir / "figures"))
    return written


_SYNTAX_ADVICE = {
    SyntaxSubtype.MISSPELLED_IP4: "`{token}` is not an SPF mechanism; write it as `ip4:` followed by the address.",
    SyntaxSubtype.MISSPELLED_IP6: "`{token}` is not an SPF mechanism; write it as `ip6:` followed by the address.",
    SyntaxSubtype.BARE_IP_MECHANISM: "`{token}` is a bare address; prefix it with `ip4:` or `ip6:`.",
    SyntaxSubtype.SITE_VERIFICATION_CONCAT: "`{token}` is a site-verification token glued into the SPF record; "
                                      "publish it as its own TXT record.",
    SyntaxSubtype.MULTIPLE_VERSION_TAGS: "`{token}` repeats the version tag; keep a single `v=spf1` at the start.",
    SyntaxSubtype.WHITESPACE_AFTER_COLON: "`{token}` has whitespace after the separator; remove it.",
    SyntaxSubtype.UNKNOWN_TERM: "`{token}` is not a known mechanism or modifier; check its spelling "
                                "(a final `-all` or `~all` is the usual intent).",
    SyntaxSubtype.OTHER: "`{token}` is malformed; see the term syntax for mechanisms and modifiers.",
}

_INVALID_IP_ADVICE = "`{token}` is not a valid address for its mechanism ({subtype}); " \
                     "use a literal address of the right family with an optional prefix length."

_NOT_FOUND_ADVICE = {
    NotFoundCause.SPF_MISSING.value: "{domain} publishes no SPF record; publish one or drop the reference to it.",
    NotFoundCause.NOT_EXISTING.value: "{domain} does not exist; remove or fix the reference to it.",
    NotFoundCause.MULTIPLE_RECORDS.value: "{domain} publishes more than one SPF record; "
                                          "merge them into a single record.",
    NotFoundCause.EMPTY_ANSWER.value: "{domain} has no TXT data; publish an SPF record or drop the reference.",
    NotFoundCause.DNS_ERROR.value: "looking up {domain} failed; check its name servers.",
    NotFoundCause.LABEL_TOO_LONG.value: "{domain} has a label longer than 63 octets; fix the name.",
    NotFoundCause.NAME_TOO_LONG.value: "{domain} is longer than 255 octets; fix the name.",
    NotFoundCause.DECODE_ERROR.value: "the TXT data of {domain} cannot be decoded; republish it as plain ASCII.",
}


def _error_lines(error: ErrorClass, audit: DomainAudit) -> list[str]:
    kind = error.kind
    if kind is ErrorKind.SYNTAX_ERROR:
        where = f" (in {error.domain})" if error.domain and error.domain != audit.domain else ""
        return [
            f"SyntaxError/{issue.subtype.value}{where}: "
            + _SYNTAX_ADVICE.get(issue.subtype, _SYNTAX_ADVICE[SyntaxSubtype.OTHER]).format(token=issue.token)
            for issue in error.syntax
        ]
    if kind is ErrorKind.INVALID_IP:
        return [f"InvalidIp/{error.subtype}: " + _INVALID_IP_ADVICE.format(token=error.detail, subtype=error.subtype)]
    if kind is ErrorKind.RECORD_NOT_FOUND:
        text = _NOT_FOUND_ADVICE.get(error.subtype, "{domain}: record not found.")
        return [f"RecordNotFound/{error.subtype}: " + text.format(domain=error.domain or audit.domain)]
    if kind is ErrorKind.TOO_MANY_LOOKUPS:
        return [
            f"TooManyLookups: evaluation may use at most {LOOKUP_LIMIT} DNS-causing terms "
            f"(include, a, mx, ptr, exists, redirect); this policy uses {audit.lookups}. "
            "Replace includes with the ip4/ip6 ranges they stand for or drop unused ones."
        ]
    if kind is ErrorKind.TOO_MANY_VOID_LOOKUPS:
        return [
            f"TooManyVoidLookups: at most {VOID_LOOKUP_LIMIT} lookups may return no data; "
            f"this policy has {audit.void_lookups}. Remove references to names that do not resolve."
        ]
    if kind is ErrorKind.INCLUDE_LOOP:
        return [f"IncludeLoop: {error.detail or error.domain} includes itself; break the cycle."]
    if kind is ErrorKind.REDIRECT_LOOP:
        return [f"RedirectLoop: {error.detail or error.domain} redirects back to itself; break the cycle."]
    return [error.label()]  # pragma: no cover


def _flag_lines(audit: DomainAudit) -> list[str]:
    flags = audit.flags
    if flags is None:
        return []
    lines = []
    if flags.plus_all:
        lines.append("PlusAll: `+all` authorizes every address on the internet; end with `-all` or `~all`.")
    elif flags.no_restrictive_all:
        lines.append("NoRestrictiveAll: the policy does not end in `-all` or `~all`, "
                     "so unlisted senders are not rejected.")
    for issue in flags.typos:
        lines.append(f"Typo: `{issue.token}` looks like a mistyped `all`; it is ignored by receivers.")
    for prefix in flags.huge_cidr_direct:
        lines.append(f"LargeRange: a /{prefix} is authorized directly; list only your actual mail servers.")
    for prefix in flags.huge_cidr_via_include:
        lines.append(f"LargeRange: an included record authorizes a /{prefix}; review whether that include is needed.")
    if flags.over_100k_ips and audit.expansion is not None:
        lines.append(f"ManyAddresses: {audit.expansion.ipv4_count} IPv4 addresses are authorized "
                     f"(more than {MANY_IPS_THRESHOLD}); shared hosting ranges let other customers send as you.")
    if flags.ptr_used:
        lines.append("PtrUsed: the `ptr` mechanism is deprecated and slow; replace it with ip4/ip6 or a.")
    if flags.deprecated_spf_rrt:
        lines.append("SpfRecordType: the SPF DNS record type is obsolete; keep only the TXT record.")
    if flags.markup_suspicious:
        lines.append("Markup: the record contains HTML or script tags; tools that display it may be attacked.")
    return lines


def remediation_text(audit: DomainAudit) -> str:
    """Deterministic plain-text findings and fixes for one audit."""
    lines = []
    for error in audit.errors:
        lines.extend(_error_lines(error, audit))
    lines.extend(_flag_lines(audit))
    if not lines:
        raise NoFindings(f"{audit.domain}: nothing to report")
    header = [f"SPF findings for {audit.domain}"]
    if audit.spf_raw is not None:
        header.append(f"record: {audit.spf_raw}")
    body = [f"{i}. {line}" for i, line in enumerate(lines, 1)]
    return "\n".join(header + [""] + body) + "\n"
