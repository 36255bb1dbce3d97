"""Authorized-address expansion and permissiveness analysis of SPF policies."""

from __future__ import annotations

import ipaddress
import re
import threading
from collections import Counter, defaultdict
from dataclasses import dataclass, field

from .evaluate import DEFAULT_MAX_DEPTH, LOOKUP_LIMIT, MX_HOST_LIMIT, SpfResult, check_host, fetch_and_classify
from .ipset import IpSet
from .macros import SessionInput, has_macros
from .parser import (
    ABUSE_REPORT_MODIFIERS,
    Directive,
    Modifier,
    Qualifier,
    SpfRecord,
    SyntaxIssue,
    SyntaxSubtype,
    detect_embedded_markup,
)
from .resolver import Resolver, RRType, normalize_name
from .taxonomy import ErrorClass

LARGE_PREFIX_MAX = 16
MANY_IPS_THRESHOLD = 100_000
ADDRESS_MECHANISMS = ("ip4", "a", "mx")
_ALL_NETWORK = ipaddress.IPv4Network("0.0.0.0/0")
_NEAR_ALL = re.compile(r"[+\-~?]?a+l+[^A-Za-z0-9]*", re.IGNORECASE)


@dataclass(frozen=True)
class Contribution:
    """An address block authorized by one Pass directive.

    ``network`` is the block as written (after resolving a/mx hosts);
    ``added`` is the part not already decided by an earlier directive.
    """

    mechanism: str
    term: str
    origin: str
    network: ipaddress.IPv4Network
    via_include: bool
    added: IpSet

    @property
    def prefix(self) -> int:
        return self.network.prefixlen


@dataclass(frozen=True)
class Unexpandable:
    origin: str
    term: str
    reason: str


@dataclass
class _Partial:
    authorized: IpSet
    contributions: list[Contribution]
    ip6: list
    unexpandable: list[Unexpandable]
    included: set[str]
    edges: list[tuple[str, str, str]]
    include_height: int
    height: int
    final_all: Qualifier | None
    truncation: list[str]


@dataclass
class ExpansionReport:
    domain: str
    ipset: IpSet
    contributions: list[Contribution] = field(default_factory=list)
    ip6_networks: list = field(default_factory=list)
    unexpandable: list[Unexpandable] = field(default_factory=list)
    include_depth_max: int = 0
    top_level_includes: int = 0
    included: list[str] = field(default_factory=list)
    edges: list[tuple[str, str, str]] = field(default_factory=list)
    final_all: Qualifier | None = None
    truncation: list[str] = field(default_factory=list)
    error: ErrorClass | None = None

    @property
    def truncated(self) -> bool:
        return bool(self.truncation)

    @property
    def complete(self) -> bool:
        """No address could have been missed by this expansion."""
        return not self.truncation and not self.unexpandable and self.error is None

    def count(self) -> int:
        return self.ipset.count()


class Expander:
    """Recursive expansion of policies into authorized IPv4 sets.

    Results for a domain are cached when they do not depend on where the
    domain was reached from (no loop cut, no depth cut, budget ignored).
    """

    def __init__(self, resolver: Resolver, max_depth: int = DEFAULT_MAX_DEPTH, honor_lookup_budget: bool = False):
        self.resolver = resolver
        self.max_depth = max_depth
        self.honor_lookup_budget = honor_lookup_budget
        self._cache: dict[str, _Partial] = {}
        self._counts: dict[str, int] = {}
        self._lock = threading.Lock()

    def expand(self, domain: str, record: SpfRecord | None = None) -> ExpansionReport:
        domain = normalize_name(domain)
        if record is None:
            fetched = fetch_and_classify(domain, self.resolver)
            if isinstance(fetched, ErrorClass):
                return ExpansionReport(domain, IpSet(), error=fetched)
            record = fetched
        partial = self._record(domain, record, (domain,), 0, [0])
        top_includes = sum(
            1 for t in record.terms if isinstance(t, Directive) and t.mechanism.kind == "include"
        )
        return ExpansionReport(
            domain=domain,
            ipset=partial.authorized,
            contributions=partial.contributions,
            ip6_networks=partial.ip6,
            unexpandable=partial.unexpandable,
            include_depth_max=partial.include_height,
            top_level_includes=top_includes,
            included=sorted(partial.included),
            edges=partial.edges,
            final_all=partial.final_all,
            truncation=partial.truncation,
        )

    def allowed_ips(self, domain: str) -> int:
        """Size of ``domain``'s own expansion, memoized when it is context-free."""
        domain = normalize_name(domain)
        with self._lock:
            if domain in self._counts:
                return self._counts[domain]
        report = self.expand(domain)
        if not self.honor_lookup_budget and not report.truncated:
            with self._lock:
                self._counts[domain] = report.count()
        return report.count()

    def _charge(self, budget) -> bool:
        if not self.honor_lookup_budget:
            return True
        if budget[0] >= LOOKUP_LIMIT:
            return False
        budget[0] += 1
        return True

    def _child(self, target: str, chain, depth: int, budget):
        """Partial result for an include/redirect target, or a reason string."""
        if target in chain:
            return f"loop via {target}"
        if depth + 1 > self.max_depth:
            return f"max depth {self.max_depth} reached at {target}"
        cacheable = not self.honor_lookup_budget
        if cacheable:
            with self._lock:
                cached = self._cache.get(target)
            if cached is not None and depth + 1 + cached.height <= self.max_depth:
                return cached
        fetched = fetch_and_classify(target, self.resolver)
        if isinstance(fetched, ErrorClass):
            return fetched
        partial = self._record(target, fetched, chain + (target,), depth + 1, budget)
        if cacheable and not partial.truncation:
            with self._lock:
                self._cache.setdefault(target, partial)
        return partial

    def _record(self, domain: str, record: SpfRecord, chain, depth: int, budget) -> _Partial:
        authorized = IpSet()
        covered = IpSet()
        out = _Partial(IpSet(), [], [], [], set(), [], 0, 0, None, [])

        def grant(contribution_args, block: IpSet, qualifier: Qualifier):
            nonlocal authorized, covered
            fresh = block - covered
            if qualifier is Qualifier.PASS:
                authorized = authorized | fresh
                for mechanism, term, network in contribution_args:
                    out.contributions.append(Contribution(
                        mechanism, term, domain, network, False, IpSet([network]) - covered,
                    ))
            covered = covered | block

        for term in record.effective_terms():
            if isinstance(term, Modifier):
                if term.name != "redirect":
                    continue
                if not self._charge(budget):
                    out.truncation.append("lookup budget exhausted")
                    break
                child_auth = self._merge_child(out, term, term.value, domain, chain, depth, budget,
                                               via="redirect", qualifier=Qualifier.PASS, covered=covered)
                if child_auth is not None:
                    authorized = authorized | (child_auth - covered)
                break

            mechanism = term.mechanism
            kind = mechanism.kind
            text = str(term)
            if kind == "all":
                out.final_all = term.qualifier
                grant([("all", text, _ALL_NETWORK)], IpSet.everything(), term.qualifier)
                break
            if kind == "ip4":
                network = mechanism.network
                grant([("ip4", text, network)], IpSet([network]), term.qualifier)
                continue
            if kind == "ip6":
                if term.qualifier is Qualifier.PASS:
                    out.ip6.append(mechanism.network)
                continue
            if not self._charge(budget):
                out.truncation.append("lookup budget exhausted")
                break
            if kind in ("exists", "ptr"):
                out.unexpandable.append(Unexpandable(domain, text, f"{kind} depends on the session"))
                continue
            if has_macros(mechanism.domain):
                out.unexpandable.append(Unexpandable(domain, text, "macro-bearing domain"))
                continue
            if kind == "include":
                before = covered
                child_auth = self._merge_child(out, term, mechanism.domain, domain, chain, depth, budget,
                                               via="include", qualifier=term.qualifier, covered=before)
                if child_auth is not None:
                    if term.qualifier is Qualifier.PASS:
                        authorized = authorized | (child_auth - covered)
                    covered = covered | child_auth
                continue
            networks = self._host_networks(kind, mechanism, domain, out, text)
            if networks:
                grant([(kind, text, n) for n in networks], IpSet(networks), term.qualifier)

        out.authorized = authorized
        return out

    def _host_networks(self, kind, mechanism, domain, out, text):
        host = normalize_name(mechanism.domain) if mechanism.domain else domain
        prefix = 32 if mechanism.cidr4 is None else mechanism.cidr4
        if kind == "mx":
            answer = self.resolver.resolve(host, RRType.MX)
            if answer.transient:
                out.unexpandable.append(Unexpandable(domain, text, f"DNS error for {host} MX"))
                return []
            hosts = [name for _, name in sorted(answer.records)][:MX_HOST_LIMIT] if answer.ok else []
        else:
            hosts = [host]
        networks = []
        for name in hosts:
            answer = self.resolver.resolve(name, RRType.A)
            if answer.transient:
                out.unexpandable.append(Unexpandable(domain, text, f"DNS error for {name} A"))
                continue
            if answer.ok:
                for address in answer.records:
                    networks.append(ipaddress.IPv4Network(f"{address}/{prefix}", strict=False))
        return networks

    def _merge_child(self, out: _Partial, term, spec, domain, chain, depth, budget, via, qualifier, covered):
        text = str(term)
        if has_macros(spec):
            out.unexpandable.append(Unexpandable(domain, text, "macro-bearing domain"))
            return None
        target = normalize_name(spec)
        out.edges.append((domain, target, via))
        child = self._child(target, chain, depth, budget)
        if isinstance(child, str):
            out.truncation.append(child)
            return None
        if isinstance(child, ErrorClass):
            out.unexpandable.append(Unexpandable(domain, text, child.label()))
            return None

        through_include = via == "include"
        if through_include:
            out.included.add(target)
            out.include_height = max(out.include_height, child.include_height + 1)
        else:
            out.include_height = max(out.include_height, child.include_height)
            out.final_all = child.final_all
        out.height = max(out.height, child.height + 1)
        out.included |= child.included
        out.edges.extend(child.edges)
        out.unexpandable.extend(child.unexpandable)
        out.truncation.extend(child.truncation)
        out.ip6.extend(child.ip6 if qualifier is Qualifier.PASS else [])
        if qualifier is Qualifier.PASS:
            for c in child.contributions:
                out.contributions.append(Contribution(
                    c.mechanism, c.term, c.origin, c.network, c.via_include or through_include, c.added - covered,
                ))
        return child.authorized


def expand_authorized_ips(domain: str, resolver: Resolver, max_depth: int = DEFAULT_MAX_DEPTH,
                          honor_lookup_budget: bool = False) -> ExpansionReport:
    return Expander(resolver, max_depth, honor_lookup_budget).expand(domain)


@dataclass
class LargeCidrCounts:
    direct: Counter = field(default_factory=Counter)
    include: Counter = field(default_factory=Counter)

    def __iadd__(self, other: "LargeCidrCounts"):
        self.direct.update(other.direct)
        self.include.update(other.include)
        return self


def flag_large_cidrs(report: ExpansionReport, max_prefix: int = LARGE_PREFIX_MAX) -> LargeCidrCounts:
    """Count ip4/a/mx blocks of prefix <= 16, split by whether an include was crossed."""
    counts = LargeCidrCounts()
    for c in report.contributions:
        if c.mechanism in ADDRESS_MECHANISMS and c.prefix <= max_prefix:
            (counts.include if c.via_include else counts.direct)[c.prefix] += 1
    return counts


def subnet_size_distribution(reports) -> Counter:
    sizes = Counter()
    for report in reports:
        for c in report.contributions:
            if c.via_include and c.mechanism in ADDRESS_MECHANISMS:
                sizes[c.prefix] += 1
    return sizes


def top_level_include_histogram(reports) -> dict[int, list[str]]:
    histogram: dict[int, list[str]] = defaultdict(list)
    for report in reports:
        histogram[report.top_level_includes].append(report.domain)
    return {count: sorted(domains) for count, domains in sorted(histogram.items())}


@dataclass
class IncludeGraph:
    nodes: set[str]
    edges: set[tuple[str, str, str]]
    usage: Counter
    allowed_ips: dict[str, int]

    def top(self, n: int | None = None) -> list[tuple[str, int, int | None]]:
        ranked = sorted(self.usage.items(), key=lambda item: (-item[1], item[0]))
        if n is not None:
            ranked = ranked[:n]
        return [(name, used, self.allowed_ips.get(name)) for name, used in ranked]


def build_include_graph(reports, expander: Expander | None = None) -> IncludeGraph:
    """Include usage over audited domains; each domain counts once per include it reaches."""
    nodes: set[str] = set()
    edges: set[tuple[str, str, str]] = set()
    usage: Counter = Counter()
    for report in reports:
        nodes.add(report.domain)
        for edge in report.edges:
            edges.add(edge)
            nodes.update(edge[:2])
        usage.update(set(report.included))
    allowed = {}
    if expander is not None:
        allowed = {name: expander.allowed_ips(name) for name in usage}
    return IncludeGraph(nodes, edges, usage, allowed)


def spoofable_domains(client_ip, domains, resolver: Resolver, expansions: dict | None = None) -> list[str]:
    """Domains whose policy yields Pass for ``client_ip``, sorted by name.

    A complete expansion that does not contain the address rules a domain
    out without evaluation; every other candidate goes through check_host.
    """
    ip = ipaddress.ip_address(client_ip)
    found = []
    for domain in sorted({normalize_name(d) for d in domains}):
        expansion = (expansions or {}).get(domain)
        if expansion is not None and ip.version == 4 and expansion.complete and ip not in expansion.ipset:
            continue
        outcome = check_host(SessionInput.for_domain(ip, domain), domain, resolver)
        if outcome.result is SpfResult.PASS:
            found.append(domain)
    return found


@dataclass
class PermissivenessFlags:
    no_restrictive_all: bool = False
    plus_all: bool = False
    huge_cidr_direct: list[int] = field(default_factory=list)
    huge_cidr_via_include: list[int] = field(default_factory=list)
    over_100k_ips: bool = False
    ptr_used: bool = False
    deprecated_spf_rrt: bool = False
    abuse_modifiers_present: bool = False
    markup_suspicious: bool = False
    typos: list[SyntaxIssue] = field(default_factory=list)

    def any(self) -> bool:
        return any([
            self.no_restrictive_all, self.plus_all, self.huge_cidr_direct, self.huge_cidr_via_include,
            self.over_100k_ips, self.ptr_used, self.deprecated_spf_rrt, self.markup_suspicious,
        ])

    def to_dict(self) -> dict:
        return {
            "no_restrictive_all": self.no_restrictive_all,
            "plus_all": self.plus_all,
            "huge_cidr_direct": list(self.huge_cidr_direct),
            "huge_cidr_via_include": list(self.huge_cidr_via_include),
            "over_100k_ips": self.over_100k_ips,
            "ptr_used": self.ptr_used,
            "deprecated_spf_rrt": self.deprecated_spf_rrt,
            "abuse_modifiers_present": self.abuse_modifiers_present,
            "markup_suspicious": self.markup_suspicious,
            "typos": [issue.to_dict() for issue in self.typos],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PermissivenessFlags":
        data = dict(data)
        data["typos"] = [SyntaxIssue.from_dict(item) for item in data.get("typos", [])]
        return cls(**data)


def near_miss_all(issues) -> list[SyntaxIssue]:
    """UnknownTerm issues that look like a mistyped ``all`` (``-al``, ``-all;``)."""
    return [
        issue for issue in issues
        if issue.subtype is SyntaxSubtype.UNKNOWN_TERM and _NEAR_ALL.fullmatch(issue.token)
    ]


def permissiveness_flags(record: SpfRecord, expansion: ExpansionReport | None,
                         spf_rrt_present: bool = False, ptr_used: bool | None = None) -> PermissivenessFlags:
    final_all = expansion.final_all if expansion is not None else None
    if expansion is None:
        for term in record.effective_terms():
            if isinstance(term, Directive) and term.mechanism.kind == "all":
                final_all = term.qualifier
    large = flag_large_cidrs(expansion) if expansion is not None else LargeCidrCounts()
    if ptr_used is None:
        ptr_used = any(isinstance(t, Directive) and t.mechanism.kind == "ptr" for t in record.terms)
        if expansion is not None:
            ptr_used = ptr_used or any(u.term.lstrip("+-~?").startswith("ptr") for u in expansion.unexpandable)
    return PermissivenessFlags(
        no_restrictive_all=final_all not in (Qualifier.FAIL, Qualifier.SOFTFAIL),
        plus_all=final_all is Qualifier.PASS,
        huge_cidr_direct=sorted(large.direct.elements()),
        huge_cidr_via_include=sorted(large.include.elements()),
        over_100k_ips=expansion is not None and expansion.count() > MANY_IPS_THRESHOLD,
        ptr_used=ptr_used,
        deprecated_spf_rrt=spf_rrt_present,
        abuse_modifiers_present=any(
            isinstance(t, Modifier) and t.name in ABUSE_REPORT_MODIFIERS for t in record.terms
        ),
        markup_suspicious=detect_embedded_markup(record.raw),
        typos=near_miss_all(record.errors),
    )
