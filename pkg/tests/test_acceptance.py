"""Acceptance criteria, one marked group per criterion.

The terminal summary prints a PASS/FAIL line per criterion (see conftest).
"""

import ipaddress
import random
import time

import pytest
from conftest import CORPUS_LIST, CORPUS_ZONE

from spfaudit.analysis import Expander, expand_authorized_ips, spoofable_domains
from spfaudit.audit import audit_domain
from spfaudit.corpus import DomainEntry, ScanOptions, Scanner, aggregate, canonical_order, load_domain_list
from spfaudit.evaluate import SpfResult, check_host, detect_loops, fetch_and_classify
from spfaudit.ipset import IpSet, count_ips
from spfaudit.macros import SessionInput
from spfaudit.parser import SyntaxSubtype, parse_spf
from spfaudit.report import audits_to_jsonl
from spfaudit.resolver import fixture_resolver
from spfaudit.taxonomy import ErrorKind, NotFoundCause, syntax_error_classes


def check(resolver, ip, domain):
    return check_host(SessionInput.for_domain(ip, domain), domain, resolver)


# Criterion 1: one fixture per taxonomy leaf.

NOT_FOUND_CASES = [
    ('a.test TXT "google-site-verification=abc"', "a.test", NotFoundCause.SPF_MISSING),
    ('b.test TXT "v=spf1 -all"', "a.test", NotFoundCause.NOT_EXISTING),
    ('a.test TXT "v=spf1 -all"\na.test TXT "v=spf1 a -all"', "a.test", NotFoundCause.MULTIPLE_RECORDS),
    ("a.test MX 10 mx.a.test", "a.test", NotFoundCause.EMPTY_ANSWER),
    ("a.test ERROR SERVFAIL", "a.test", NotFoundCause.DNS_ERROR),
    ('a.test TXT "v=spf1 -all"', "l" * 64 + ".test", NotFoundCause.LABEL_TOO_LONG),
    ('a.test TXT "v=spf1 -all"', ".".join(["n" * 63] * 4) + ".test", NotFoundCause.NAME_TOO_LONG),
    ('a.test TXT "v=spf1 \\200 -all"', "a.test", NotFoundCause.DECODE_ERROR),
]

LIMIT_CASES = [
    ("\n".join(['a.test TXT "v=spf1 ' + " ".join(f"include:t{i}.test" for i in range(11)) + ' -all"']
               + [f't{i}.test TXT "v=spf1 -all"' for i in range(11)]), ErrorKind.TOO_MANY_LOOKUPS, None),
    ('a.test TXT "v=spf1 a:v1.test a:v2.test a:v3.test -all"', ErrorKind.TOO_MANY_VOID_LOOKUPS, None),
    ('a.test TXT "v=spf1 redirect=b.test"\nb.test TXT "v=spf1 redirect=a.test"', ErrorKind.REDIRECT_LOOP, None),
    ('a.test TXT "v=spf1 include:a.test -all"', ErrorKind.INCLUDE_LOOP, 0),
    ('a.test TXT "v=spf1 include:b.test -all"\nb.test TXT "v=spf1 include:c.test -all"\n'
     'c.test TXT "v=spf1 include:a.test -all"', ErrorKind.INCLUDE_LOOP, 2),
]

SYNTAX_CASES = [
    ("v=spf1 ipv4:192.0.2.1 -all", SyntaxSubtype.MISSPELLED_IP4),
    ("v=spf1 ipv6:2001:db8::1 -all", SyntaxSubtype.MISSPELLED_IP6),
    ("v=spf1 ip:192.0.2.1 -all", SyntaxSubtype.BARE_IP_MECHANISM),
    ("v=spf1 include:_spf.example.com google-site-verification=Xy12 -all", SyntaxSubtype.SITE_VERIFICATION_CONCAT),
    ("v=spf1 mx v=spf1 a -all", SyntaxSubtype.MULTIPLE_VERSION_TAGS),
    ("v=spf1 ip4: 192.0.2.1 -all", SyntaxSubtype.WHITESPACE_AFTER_COLON),
    ("v=spf1 mx -al", SyntaxSubtype.UNKNOWN_TERM),
    ("v=spf1 ip4: -all", SyntaxSubtype.INVALID_IP_NO_ADDRESS),
    ("v=spf1 ip4:192.0.2 -all", SyntaxSubtype.INVALID_IP_WRONG_OCTETS),
    ("v=spf1 ip4:mail.example.com -all", SyntaxSubtype.INVALID_IP_DOMAIN_ARG),
    ("v=spf1 ip6:192.0.2.1 -all", SyntaxSubtype.INVALID_IP_WRONG_VERSION),
]


def _classify_not_found(zone_text, name, expected):
    return fetch_and_classify(name, fixture_resolver(zone_text)).subtype == expected.value


def _classify_limit(zone_text, kind, depth):
    resolver = fixture_resolver(zone_text)
    outcome = check(resolver, "192.0.2.1", "a.test")
    error = outcome.trace.error
    ok = outcome.result is SpfResult.PERMERROR and (error.kind, error.depth) == (kind, depth)
    if kind in (ErrorKind.INCLUDE_LOOP, ErrorKind.REDIRECT_LOOP):
        found = detect_loops("a.test", resolver)
        ok = ok and (found.kind, found.depth) == (kind, depth)
    return ok


def _classify_syntax(raw, expected):
    classes = syntax_error_classes(parse_spf(raw, "lenient").errors)
    if expected.is_invalid_ip:
        return [(c.kind, c.subtype) for c in classes] == [(ErrorKind.INVALID_IP, expected.value)]
    return [c.kind for c in classes] == [ErrorKind.SYNTAX_ERROR] and \
        [i.subtype for i in classes[0].syntax] == [expected]


@pytest.mark.acceptance(1, "error taxonomy fixtures")
@pytest.mark.parametrize("zone_text, name, expected", NOT_FOUND_CASES, ids=[c[2].value for c in NOT_FOUND_CASES])
def test_c1_record_not_found(zone_text, name, expected):
    assert _classify_not_found(zone_text, name, expected)


@pytest.mark.acceptance(1, "error taxonomy fixtures")
@pytest.mark.parametrize("zone_text, kind, depth", LIMIT_CASES,
                         ids=[f"{c[1].value}-{c[2]}" for c in LIMIT_CASES])
def test_c1_limits_and_loops(zone_text, kind, depth):
    assert _classify_limit(zone_text, kind, depth)


@pytest.mark.acceptance(1, "error taxonomy fixtures")
@pytest.mark.parametrize("raw, expected", SYNTAX_CASES, ids=[c[1].value for c in SYNTAX_CASES])
def test_c1_syntax_subtypes(raw, expected):
    assert _classify_syntax(raw, expected)


@pytest.mark.acceptance(1, "error taxonomy fixtures")
def test_c1_whole_suite_under_one_second():
    assert len({c[1] for c in SYNTAX_CASES}) >= 10
    start = time.perf_counter()
    results = [_classify_not_found(*c) for c in NOT_FOUND_CASES]
    results += [_classify_limit(*c) for c in LIMIT_CASES]
    results += [_classify_syntax(*c) for c in SYNTAX_CASES]
    elapsed = time.perf_counter() - start
    assert all(results) and len(results) == 24
    assert elapsed < 1.0


# Criterion 2: evaluation conformance.

@pytest.mark.acceptance(2, "evaluation conformance")
@pytest.mark.parametrize("ip, expected", [
    ("198.51.100.5", SpfResult.PASS),
    ("192.0.2.20", SpfResult.PASS),
    ("203.0.113.9", SpfResult.FAIL),
])
def test_c2_worked_example(worked_example, ip, expected):
    assert check(worked_example, ip, "example.com").result is expected


@pytest.mark.acceptance(2, "evaluation conformance")
def test_c2_no_match_is_neutral(worked_example):
    resolver = fixture_resolver('nomatch.test TXT "v=spf1 mx"\nnomatch.test MX 10 mail.example.com\n'
                                "mail.example.com A 198.51.100.5")
    outcome = check(resolver, "203.0.113.9", "nomatch.test")
    assert outcome.result is SpfResult.NEUTRAL and outcome.matched is None


# Criterion 3: lookup and void-lookup budgets.

def _include_zone(n, prefix=""):
    lines = [f'a.test TXT "v=spf1 {prefix}' + " ".join(f"include:t{i}.test" for i in range(n)) + ' -all"']
    return "\n".join(lines + [f't{i}.test TXT "v=spf1 -all"' for i in range(n)] + ["hit.test A 192.0.2.1"])


@pytest.mark.acceptance(3, "budget semantics")
def test_c3_ten_counted_terms_complete():
    outcome = check(fixture_resolver(_include_zone(10)), "192.0.2.1", "a.test")
    assert outcome.result is SpfResult.FAIL and outcome.trace.lookups_used == 10


@pytest.mark.acceptance(3, "budget semantics")
def test_c3_eleventh_counted_term():
    outcome = check(fixture_resolver(_include_zone(11)), "192.0.2.1", "a.test")
    assert outcome.result is SpfResult.PERMERROR
    assert outcome.trace.error.kind is ErrorKind.TOO_MANY_LOOKUPS


@pytest.mark.acceptance(3, "budget semantics")
def test_c3_third_void_lookup():
    resolver = fixture_resolver('a.test TXT "v=spf1 a:v1.test mx:v2.test exists:v3.test -all"')
    outcome = check(resolver, "192.0.2.1", "a.test")
    assert outcome.result is SpfResult.PERMERROR
    assert outcome.trace.error.kind is ErrorKind.TOO_MANY_VOID_LOOKUPS
    two = check(fixture_resolver('a.test TXT "v=spf1 a:v1.test mx:v2.test -all"'), "192.0.2.1", "a.test")
    assert two.result is SpfResult.FAIL and two.trace.void_lookups_used == 2


@pytest.mark.acceptance(3, "budget semantics")
def test_c3_early_match_survives_later_excess():
    resolver = fixture_resolver(_include_zone(15, prefix="a:hit.test "))
    assert check(resolver, "192.0.2.1", "a.test").result is SpfResult.PASS
    assert check(resolver, "192.0.2.2", "a.test").result is SpfResult.PERMERROR


# Criterion 4: exact address counts against enumeration.

_RESULT = {"+": "pass", "-": "fail", "~": "softfail", "?": "neutral"}


def _span(network):
    return int(network.network_address), int(network.broadcast_address)


def _compile(records, hosts):
    """Turn (qualifier, kind, argument) tuples into integer ranges once per policy."""
    compiled = {}
    for domain, terms in records.items():
        out = []
        for qualifier, kind, arg in terms:
            if kind == "ip4":
                arg = [_span(ipaddress.ip_network(arg))]
            elif kind == "a":
                host, prefix = arg
                arg = [_span(ipaddress.ip_network(f"{h}/{prefix}", strict=False)) for h in hosts[host]]
            out.append((qualifier, kind, arg))
        compiled[domain] = out
    return compiled


def _oracle_eval(compiled, domain, address):
    """Independent first-match walk over compiled terms."""
    for qualifier, kind, arg in compiled[domain]:
        if kind == "all":
            return _RESULT[qualifier]
        if kind == "include":
            hit = _oracle_eval(compiled, arg, address) == "pass"
        else:
            hit = any(low <= address <= high for low, high in arg)
        if hit:
            return _RESULT[qualifier]
    return "neutral"


def _random_policy(rng):
    hosts = {f"h{i}.test": [f"10.{rng.randrange(8)}.{rng.randrange(256)}.{rng.randrange(256)}"
                            for _ in range(rng.randint(1, 2))] for i in range(3)}

    def block():
        prefix = rng.randint(22, 32)
        return str(ipaddress.ip_network(f"10.{rng.randrange(8)}.{rng.randrange(256)}.0/{prefix}", strict=False))

    def terms(allow_include):
        out = []
        for _ in range(rng.randint(1, 5)):
            qualifier = rng.choice("++++-~?")
            roll = rng.random()
            if roll < 0.6:
                out.append((qualifier, "ip4", block()))
            elif roll < 0.8:
                out.append((qualifier, "a", (rng.choice(sorted(hosts)), rng.randint(22, 32))))
            elif allow_include:
                out.append((qualifier, "include", rng.choice(["c1.test", "c2.test"])))
        if rng.random() < 0.7:
            out.append((rng.choice("-~?"), "all", None))
        return out

    records = {"c1.test": terms(False), "c2.test": terms(False), "top.test": terms(True)}
    return records, hosts


def _zone_text(records, hosts):
    def text(q, kind, arg):
        if kind == "all":
            return f"{q}all"
        if kind == "a":
            return f"{q}a:{arg[0]}/{arg[1]}"
        return f"{q}{kind}:{arg}"

    lines = [f'{d} TXT "v=spf1 ' + " ".join(text(*t) for t in terms) + '"' for d, terms in records.items()]
    lines += [f"{h} A {a}" for h, addresses in hosts.items() for a in addresses]
    return "\n".join(lines)


def _candidates(compiled):
    spans = {span for terms in compiled.values() for _, kind, arg in terms if kind in ("ip4", "a") for span in arg}
    return {a for low, high in spans for a in range(low, high + 1)}


@pytest.mark.acceptance(4, "IP-count oracle")
def test_c4_counts_match_enumeration():
    rng = random.Random(20240417)
    start = time.perf_counter()
    mismatches = []
    for case in range(500):
        records, hosts = _random_policy(rng)
        report = expand_authorized_ips("top.test", fixture_resolver(_zone_text(records, hosts)))
        assert all(c.prefix >= 22 for c in report.contributions)
        compiled = _compile(records, hosts)
        truth = {a for a in _candidates(compiled) if _oracle_eval(compiled, "top.test", a) == "pass"}
        if count_ips(report.ipset) != len(truth) or any(a not in report.ipset for a in truth):
            mismatches.append(case)
    assert mismatches == []
    assert time.perf_counter() - start < 30


@pytest.mark.acceptance(4, "IP-count oracle")
def test_c4_union_is_order_independent():
    rng = random.Random(7)
    networks = [ipaddress.ip_network(f"10.{rng.randrange(4)}.{rng.randrange(256)}.0/{rng.randint(22, 32)}",
                                     strict=False) for _ in range(60)]
    reference = IpSet(networks)
    brute = {int(a) for n in networks for a in n}
    assert reference.count() == len(brute)
    for _ in range(100):
        rng.shuffle(networks)
        folded = IpSet()
        for network in networks:
            folded = folded | IpSet([network])
        assert folded == reference and folded.intervals == reference.intervals


# Criterion 5: permissiveness flags.

def _flags(zone_text, domain="d.test"):
    return audit_domain(domain, fixture_resolver(zone_text)).flags


def _exact(n):
    terms, base = [], int(ipaddress.ip_address("10.0.0.0"))
    for bit in reversed(range(32)):
        if n & (1 << bit):
            terms.append(f"ip4:{ipaddress.ip_address(base)}/{32 - bit}")
            base += 1 << bit
    return 'd.test TXT "v=spf1 ' + " ".join(terms) + ' -all"'


FLAG_CASES = [
    ('d.test TXT "v=spf1 ip4:192.0.2.0/24"', "no_restrictive_all", True),
    ('d.test TXT "v=spf1 ip4:192.0.2.0/24 -all"', "no_restrictive_all", False),
    ('d.test TXT "v=spf1 ip4:192.0.2.0/24 ~all"', "no_restrictive_all", False),
    ('d.test TXT "v=spf1 mx -al"', "no_restrictive_all", True),
    ('d.test TXT "v=spf1 redirect=r.test"\nr.test TXT "v=spf1 -all"', "no_restrictive_all", False),
    ('d.test TXT "v=spf1 +all"', "plus_all", True),
    ('d.test TXT "v=spf1 ip4:0.0.0.0/0 -all"', "huge_cidr_direct", [0]),
    ('d.test TXT "v=spf1 ip4:10.0.0.0/8 -all"', "huge_cidr_direct", [8]),
    ('d.test TXT "v=spf1 include:i.test -all"\ni.test TXT "v=spf1 ip4:10.0.0.0/14 -all"',
     "huge_cidr_via_include", [14]),
    ('d.test TXT "v=spf1 include:i.test -all"\ni.test TXT "v=spf1 ip4:10.0.0.0/14 -all"', "huge_cidr_direct", []),
    (_exact(100_000), "over_100k_ips", False),
    (_exact(100_001), "over_100k_ips", True),
    ('d.test TXT "v=spf1 -all"\nd.test SPF "v=spf1 -all"', "deprecated_spf_rrt", True),
    ('d.test TXT "v=spf1 -all"', "deprecated_spf_rrt", False),
    ('d.test TXT "v=spf1 ptr -all"', "ptr_used", True),
    ('d.test TXT "v=spf1 ra=postmaster -all"', "abuse_modifiers_present", True),
    ('d.test TXT "v=spf1 rp=100 rr=all -all"', "abuse_modifiers_present", True),
    ('d.test TXT "v=spf1 xss=<script>alert(\'SPF\')</script> ~all"', "markup_suspicious", True),
    ('d.test TXT "v=spf1 ip4:192.0.2.1 -all"', "markup_suspicious", False),
]


@pytest.mark.acceptance(5, "permissiveness flags")
@pytest.mark.parametrize("zone_text, flag, expected", FLAG_CASES,
                         ids=[f"{i}-{c[1]}" for i, c in enumerate(FLAG_CASES)])
def test_c5_flags(zone_text, flag, expected):
    assert getattr(_flags(zone_text), flag) == expected


@pytest.mark.acceptance(5, "permissiveness flags")
def test_c5_near_miss_reported_as_unknown_term():
    flags = _flags('d.test TXT "v=spf1 mx -all;"')
    assert flags.no_restrictive_all
    assert [(t.subtype, t.token) for t in flags.typos] == [(SyntaxSubtype.UNKNOWN_TERM, "-all;")]


# Criterion 6: corpus pipeline against hand-computed truth.

CORPUS_TRUTH = {
    "totals": {"scanned": 20, "with_mx": 14, "with_spf": 11, "with_dmarc": 5, "spf_without_mx": 2,
               "deny_all_only": 2, "deny_all_without_mx": 2, "with_errors": 3, "with_expansion": 11},
    "adoption_spf": 0.55,
    "error_histogram": {"SyntaxError": 2, "TooManyVoidLookups": 1},
    "error_subtypes": {"SyntaxError": {"MisspelledIp4": 1, "UnknownTerm": 1}},
    "dns_error_domains": 1,
    # echo, foxtrot, golf, hotel authorize nothing; kilo one host; four mailhost users 256 + 64;
    # delta adds a /28 and a /14; india adds a /8.
    "cdf_points": [(0, 4 / 11), (1, 5 / 11), (320, 9 / 11), (256 + 64 + 16 + 2 ** 18, 10 / 11),
                   (256 + 64 + 2 ** 24, 1.0)],
    "top_level_include_histogram": {0: 6, 1: 4, 2: 1},
    "subnet_size_histogram": {14: 1, 24: 5, 26: 6},
    "top_includes": [("relay.test", 6, 64), ("_spf.mailhost.test", 5, 320), ("bulk.test", 1, 2 ** 18)],
    "large_direct": {8: 1},
    "large_include": {14: 1},
}


def _corpus_run(options=ScanOptions()):
    entries = load_domain_list(CORPUS_LIST.read_text())
    scanner = Scanner(fixture_resolver(CORPUS_ZONE.read_text()), options)
    audits = canonical_order(scanner.scan(entries))
    return audits, scanner


@pytest.mark.acceptance(6, "corpus pipeline")
def test_c6_statistics_match_ground_truth():
    start = time.perf_counter()
    audits, scanner = _corpus_run()
    stats = aggregate(audits)
    assert stats.totals == CORPUS_TRUTH["totals"]
    assert stats.adoption["spf"] == pytest.approx(CORPUS_TRUTH["adoption_spf"])
    assert stats.error_histogram == CORPUS_TRUTH["error_histogram"]
    assert stats.error_subtypes == CORPUS_TRUTH["error_subtypes"]
    assert stats.dns_error_domains == CORPUS_TRUTH["dns_error_domains"]
    assert [v for v, _ in stats.cdf_points] == [v for v, _ in CORPUS_TRUTH["cdf_points"]]
    assert [f for _, f in stats.cdf_points] == pytest.approx([f for _, f in CORPUS_TRUTH["cdf_points"]])
    assert stats.top_level_include_histogram == CORPUS_TRUTH["top_level_include_histogram"]
    assert stats.subnet_size_histogram == CORPUS_TRUTH["subnet_size_histogram"]
    assert stats.top_includes == CORPUS_TRUTH["top_includes"]
    assert {p: row["direct"] for p, row in stats.large_cidr_table.items() if row["direct"]} == \
        CORPUS_TRUTH["large_direct"]
    assert {p: row["include"] for p, row in stats.large_cidr_table.items() if row["include"]} == \
        CORPUS_TRUTH["large_include"]
    assert scanner.record_cache_hits > 0
    assert time.perf_counter() - start < 10


@pytest.mark.acceptance(6, "corpus pipeline")
def test_c6_deterministic_and_cache_transparent():
    start = time.perf_counter()
    first = audits_to_jsonl(_corpus_run()[0])
    for concurrency in (1, 5, 16):
        assert audits_to_jsonl(_corpus_run(ScanOptions(concurrency=concurrency))[0]) == first
    uncached = _corpus_run(ScanOptions(record_cache=False, cache_capacity=0))[0]
    assert audits_to_jsonl(uncached) == first
    assert time.perf_counter() - start < 10


# Criterion 7: spoofability against exhaustive evaluation.

def _spoof_corpus(rng):
    lines = [
        'shared-a.test TXT "v=spf1 ip4:10.9.0.0/24 ip4:10.9.4.0/22 -all"',
        'shared-b.test TXT "v=spf1 ip4:10.9.1.0/25 include:shared-a.test ~all"',
        'deny.test TXT "v=spf1 -all"',
        "h1.test A 10.9.2.10",
        "h2.test A 10.9.3.20",
        "mx.pool.test A 10.9.2.77",
    ]
    templates = [
        "v=spf1 ip4:{block} -all",
        "v=spf1 include:shared-a.test -all",
        "v=spf1 include:shared-b.test ?all",
        "v=spf1 -include:shared-a.test ip4:10.9.0.0/16 ~all",
        "v=spf1 a:h1.test/28 mx -all",
        "v=spf1 ptr ip4:{block} -all",
        "v=spf1 exists:%{{i}}.allow.test -all",
        "v=spf1 redirect=shared-b.test",
        "v=spf1 ip4:{block} include:deny.test",
        "v=spf1 +all",
        "v=spf1 ipv4:{addr} ip4:{block} -all",
        "v=spf1 include:missing.test ip4:{block} -all",
        "v=spf1 -ip4:{block} +all",
    ]
    domains = []
    for i in range(50):
        name = f"d{i:02d}.test"
        block = f"10.9.{rng.randrange(8)}.{rng.randrange(0, 256, 16)}/{rng.choice([24, 26, 28, 30, 32])}"
        block = str(ipaddress.ip_network(block, strict=False))
        record = rng.choice(templates).format(block=block, addr=block.split("/")[0])
        lines.append(f'{name} TXT "{record}"')
        lines.append(f"{name} MX 10 mx.pool.test")
        domains.append(name)
    lines.append("10.9.2.10.allow.test A 127.0.0.2")
    lines.append("10.2.9.10.in-addr.arpa PTR h1.test")
    return "\n".join(lines), domains


@pytest.mark.acceptance(7, "spoofability oracle")
def test_c7_spoofable_matches_exhaustive_check():
    rng = random.Random(99)
    zone_text, domains = _spoof_corpus(rng)
    resolver = fixture_resolver(zone_text)
    expander = Expander(resolver)
    expansions = {d: expander.expand(d) for d in domains}
    probes = ["10.9.2.10", "10.9.2.77", "10.9.0.5", "10.9.4.200", "10.9.1.100", "192.0.2.1"]
    probes += [f"10.9.{rng.randrange(8)}.{rng.randrange(256)}" for _ in range(14)]
    nonempty = 0
    for ip in probes:
        truth = sorted(d for d in domains if check(resolver, ip, d).result is SpfResult.PASS)
        assert spoofable_domains(ip, domains, resolver) == truth
        assert spoofable_domains(ip, domains, resolver, expansions) == truth
        nonempty += bool(truth)
    assert len(probes) == 20 and nonempty >= 10


# Criterion 8: throughput.

def _synthetic_corpus(n=1000):
    rng = random.Random(1000)
    lines = [f'prov{p}.test TXT "v=spf1 ip4:10.{p}.0.0/20 ip4:10.{p}.32.0/24 -all"' for p in range(20)]
    lines += [f"mx{p}.prov.test A 10.{p}.0.25" for p in range(20)]
    shared = [f"v=spf1 include:prov{p}.test -all" for p in range(20)]
    shared += [f"v=spf1 include:prov{p}.test include:prov{(p + 1) % 20}.test ~all" for p in range(20)]
    shared += ["v=spf1 -all", "v=spf1 ~all", "v=spf1 mx -all"]
    texts = []
    for i in range(n):
        name = f"s{i:04d}.test"
        if rng.random() < 0.15:
            continue
        record = rng.choice(shared) if rng.random() < 0.8 else f"v=spf1 ip4:10.200.{i % 256}.{i // 256}/32 -all"
        texts.append(record)
        lines.append(f'{name} TXT "{record}"')
        if rng.random() < 0.7:
            lines.append(f"{name} MX 10 mx{rng.randrange(20)}.prov.test")
    entries = [DomainEntry(f"s{i:04d}.test", i + 1) for i in range(n)]
    return "\n".join(lines), entries, len(texts) - len(set(texts))


@pytest.mark.acceptance(8, "throughput sanity")
def test_c8_thousand_domains():
    zone_text, entries, duplicated = _synthetic_corpus()
    scanner = Scanner(fixture_resolver(zone_text), ScanOptions(concurrency=16))
    start = time.perf_counter()
    audits = list(scanner.scan(entries))
    elapsed = time.perf_counter() - start
    assert len(audits) == 1000
    assert duplicated > 0
    assert scanner.record_cache_hits >= duplicated
    assert elapsed < 10, f"scan took {elapsed:.2f}s"
