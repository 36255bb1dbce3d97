"""spf-audit command line."""

from __future__ import annotations

import argparse
import ipaddress
import json
import sys
from pathlib import Path

from .analysis import Expander
from .audit import Auditor
from .corpus import ScanOptions, Scanner, aggregate, canonical_order, load_domain_list
from .evaluate import SpfResult, check_host
from .exceptions import NoFindings, ParseError, ReportIOError, SpfSyntaxError
from .macros import SessionInput
from .parser import parse_spf, render
from .report import (
    audits_to_jsonl,
    emit_report,
    read_audits_jsonl,
    remediation_text,
    write_csv_tables,
    write_stats_json,
)
from .resolver import (
    DEFAULT_TIMEOUT,
    CachingResolver,
    FixtureResolver,
    LiveResolver,
    OverlayResolver,
    RateLimitedResolver,
    load_zone_fixture,
    parse_endpoint,
)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_NEUTRAL = 2
EXIT_TEMPERROR = 3
EXIT_PERMERROR = 4
EXIT_USAGE = 64
EXIT_DATAERR = 65
EXIT_IOERR = 74

RESULT_EXIT = {
    SpfResult.PASS: EXIT_PASS,
    SpfResult.FAIL: EXIT_FAIL,
    SpfResult.SOFTFAIL: EXIT_FAIL,
    SpfResult.NEUTRAL: EXIT_NEUTRAL,
    SpfResult.NONE: EXIT_NEUTRAL,
    SpfResult.TEMPERROR: EXIT_TEMPERROR,
    SpfResult.PERMERROR: EXIT_PERMERROR,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse with the sysexits usage code instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _ip(text: str):
    try:
        return ipaddress.ip_address(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an IP address: {text!r}") from None


def _positive(kind):
    def convert(text: str):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if value <= 0:
            raise argparse.ArgumentTypeError(f"must be positive: {text}")
        return value
    return convert


def _add_resolver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("DNS")
    g.add_argument("--zone", metavar="PATH", help="answer queries from a zone fixture file")
    g.add_argument("--resolver", metavar="HOST:PORT",
                   help="query this name server (default: $SPF_AUDIT_RESOLVER or the system resolver)")
    g.add_argument("--overlay", action="store_true", help="use the zone fixture first, the live resolver after")
    g.add_argument("--timeout", type=_positive(float), default=DEFAULT_TIMEOUT, help="live query timeout in seconds")
    g.add_argument("--qps", type=_positive(float), help="limit live queries per second")
    g.add_argument("--cache", type=int, default=10_000, metavar="N", help="DNS answer cache entries (0 disables)")


def build_resolver(args, rate_limit: bool = True):
    if args.zone and args.resolver and not args.overlay:
        raise UsageError("--zone and --resolver are exclusive unless --overlay is given")
    if args.overlay and not args.zone:
        raise UsageError("--overlay needs --zone")
    fixture = load_zone_fixture(args.zone) if args.zone else None
    if fixture is not None and not args.overlay:
        resolver = FixtureResolver(fixture)
    else:
        try:
            if args.resolver:
                host, port = parse_endpoint(args.resolver)
                live = LiveResolver(host, port, args.timeout)
            else:
                live = LiveResolver.from_env(timeout=args.timeout)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        except Exception as exc:  # e.g. no system resolver configuration
            raise ReportIOError("resolver", OSError(str(exc))) from exc
        if rate_limit and args.qps:
            live = RateLimitedResolver(live, args.qps)
        resolver = OverlayResolver(fixture, live) if fixture is not None else live
    if rate_limit and args.cache > 0:
        resolver = CachingResolver(resolver, args.cache)
    return resolver


def _print_json(data, out=None) -> None:
    out = out or sys.stdout
    json.dump(data, out, indent=2, sort_keys=True)
    out.write("\n")


def cmd_parse(args) -> int:
    try:
        record = parse_spf(args.record, "strict" if args.strict else "lenient")
    except SpfSyntaxError as exc:
        record = exc.record
        code = EXIT_DATAERR
    else:
        code = 0
    if args.json:
        _print_json({
            "raw": record.raw,
            "valid": record.valid,
            "normalized": render(record),
            "terms": [str(t) for t in record.terms],
            "errors": [e.to_dict() for e in record.errors],
            "warnings": [w.to_dict() for w in record.warnings],
        })
        return code
    print(render(record))
    for issue in record.errors:
        print(f"error {issue.subtype.value} at {issue.span[0]}-{issue.span[1]}: {issue.detail}")
    for issue in record.warnings:
        print(f"warning {issue.subtype.value}: {issue.detail}")
    return code


def cmd_check(args) -> int:
    resolver = build_resolver(args)
    try:
        session = SessionInput(args.ip, args.sender or f"postmaster@{args.domain}", args.helo)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    outcome = check_host(session, args.domain, resolver)
    if args.json:
        _print_json(outcome.to_dict())
    else:
        line = outcome.result.value
        if outcome.matched:
            domain, index, term = outcome.matched
            line += f" via {term} ({domain}, term {index})"
        elif outcome.trace.error is not None:
            line += f": {outcome.trace.error.label()}"
        else:
            line += " (no term matched)"
        print(line)
        print(f"lookups {outcome.trace.lookups_used}, void lookups {outcome.trace.void_lookups_used}")
        for domain, term in outcome.trace.visited:
            print(f"  {domain}: {term}")
        for warning in outcome.trace.warnings:
            print(f"warning: {warning}")
    return RESULT_EXIT[outcome.result]


def cmd_audit(args) -> int:
    auditor = Auditor(build_resolver(args), honor_lookup_budget=args.honor_budget)
    audit = auditor.audit(args.domain)
    if args.json:
        _print_json(audit.to_dict())
        return 0
    try:
        print(remediation_text(audit), end="")
    except NoFindings:
        print(f"{audit.domain}: no findings" if audit.spf_present else f"{audit.domain}: no SPF record")
    return 0


def cmd_expand(args) -> int:
    report = Expander(build_resolver(args), honor_lookup_budget=args.honor_budget).expand(args.domain)
    if args.json:
        _print_json({
            "domain": report.domain,
            "ipv4_count": report.count(),
            "cidrs": [str(n) for n in report.ipset.cidrs()],
            "include_depth": report.include_depth_max,
            "top_level_includes": report.top_level_includes,
            "included": report.included,
            "truncation": report.truncation,
            "unexpandable": [f"{u.origin}: {u.term} ({u.reason})" for u in report.unexpandable],
            "error": report.error.to_dict() if report.error else None,
        })
        return 0
    if report.error is not None:
        print(f"{report.domain}: {report.error.label()}")
        return 0
    print(f"{report.domain}: {report.count()} IPv4 addresses")
    for network in report.ipset.cidrs():
        print(f"  {network}")
    for item in report.unexpandable:
        print(f"unexpandable: {item.origin}: {item.term} ({item.reason})")
    for reason in report.truncation:
        print(f"truncated: {reason}")
    return 0


def _list_format(path: str, requested: str | None) -> str:
    if requested:
        return requested
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip() and not line.startswith("#"):
                return "tranco" if "," in line else "plain"
    return "plain"


def _write_text(path, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ReportIOError(path, exc) from exc


def cmd_scan(args) -> int:
    with open(args.list, encoding="utf-8") as fh:
        entries = load_domain_list(fh, _list_format(args.list, args.list_format), source=args.list)
    options = ScanOptions(
        concurrency=args.concurrency, qps=args.qps, cache_capacity=args.cache,
        record_cache=not args.no_record_cache, honor_lookup_budget=args.honor_budget,
    )
    scanner = Scanner(build_resolver(args, rate_limit=False), options)
    audits = canonical_order(scanner.scan(entries))
    stats = aggregate(audits)
    if args.report:
        emit_report(stats, audits, args.report, figures=args.figures)
    if args.format == "csv":
        write_csv_tables(stats, args.out or "tables")
    elif args.format == "json":
        if args.out:
            write_stats_json(stats, args.out)
        else:
            _print_json(stats.to_dict())
    elif args.out:
        _write_text(args.out, audits_to_jsonl(audits))
    elif not args.report:
        sys.stdout.write(audits_to_jsonl(audits))
    print(f"scanned {len(audits)} domains, record cache hits {scanner.record_cache_hits}", file=sys.stderr)
    return 0


def cmd_stats(args) -> int:
    stats = aggregate(read_audits_jsonl(args.audits), top_n=args.top)
    if args.format == "csv":
        out = Path(args.out or "tables")
        write_csv_tables(stats, out)
        figures_dir = out
    elif args.out:
        write_stats_json(stats, args.out)
        figures_dir = Path(args.out).parent
    else:
        _print_json(stats.to_dict())
        figures_dir = Path(".")
    if args.figures:
        from .plots import render_figures

        render_figures(stats, figures_dir)
    return 0


def _domains_from(path: str) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        first = next((line for line in fh if line.strip()), "")
    if first.lstrip().startswith("{"):
        return [a.domain for a in read_audits_jsonl(path) if a.spf_present]
    with open(path, encoding="utf-8") as fh:
        return [e.domain for e in load_domain_list(fh, _list_format(path, None), source=path)]


def cmd_spoofable(args) -> int:
    from .analysis import spoofable_domains

    resolver = build_resolver(args)
    found = spoofable_domains(args.ip, _domains_from(args.source), resolver)
    if args.json:
        _print_json({"ip": str(args.ip), "domains": found})
    else:
        for domain in found:
            print(domain)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spf-audit", description="Audit SPF policies: evaluate, lint, expand and scan corpora.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("parse", help="parse one record and list its problems")
    p.add_argument("record")
    p.add_argument("--strict", action="store_true", help="exit 65 when the record has syntax errors")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("check", help="evaluate a domain's policy for a client IP")
    p.add_argument("domain")
    p.add_argument("ip", type=_ip)
    p.add_argument("--sender", help="MAIL FROM address (default postmaster@DOMAIN)")
    p.add_argument("--helo")
    p.add_argument("--json", action="store_true")
    _add_resolver_flags(p)
    p.set_defaults(func=cmd_check)

    for name, func, text in (("audit", cmd_audit, "audit one domain and print remediation advice"),
                             ("expand", cmd_expand, "list every IPv4 address a policy authorizes")):
        p = sub.add_parser(name, help=text)
        p.add_argument("domain")
        p.add_argument("--json", action="store_true")
        p.add_argument("--honor-budget", action="store_true", help="stop expanding after 10 DNS-causing terms")
        _add_resolver_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("scan", help="audit every domain of a list")
    p.add_argument("list", help="tranco CSV (rank,domain) or one domain per line")
    p.add_argument("--list-format", choices=("tranco", "plain"))
    p.add_argument("--format", choices=("jsonl", "json", "csv"), default="jsonl",
                   help="audits JSONL, stats JSON, or a directory of CSV tables")
    p.add_argument("--out", metavar="PATH", help="output file or table directory (default stdout)")
    p.add_argument("--report", metavar="DIR", help="also write audits.jsonl, stats.json and tables/ here")
    p.add_argument("--figures", action="store_true", help="render PNG figures into the report directory")
    p.add_argument("--concurrency", type=_positive(int), default=8)
    p.add_argument("--no-record-cache", action="store_true", help="analyze repeated records again")
    p.add_argument("--honor-budget", action="store_true")
    _add_resolver_flags(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("stats", help="recompute corpus statistics from audits JSONL")
    p.add_argument("audits")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", metavar="PATH", help="stats file (json) or table directory (csv)")
    p.add_argument("--top", type=_positive(int), default=20, help="rows in the top includes table")
    p.add_argument("--figures", action="store_true", help="render PNG figures next to the output")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("spoofable", help="domains whose policy passes a given client IP")
    p.add_argument("ip", type=_ip)
    p.add_argument("source", help="audits JSONL or domain list")
    p.add_argument("--json", action="store_true")
    _add_resolver_flags(p)
    p.set_defaults(func=cmd_spoofable)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"spf-audit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, UnicodeDecodeError) as exc:
        print(f"spf-audit: malformed input: {exc}", file=sys.stderr)
        return EXIT_DATAERR
    except (ReportIOError, OSError) as exc:
        print(f"spf-audit: {exc}", file=sys.stderr)
        return EXIT_IOERR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
