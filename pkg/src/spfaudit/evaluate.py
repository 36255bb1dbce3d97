"""check_host evaluation with lookup budgets, loop detection and error classes."""

from __future__ import annotations

import enum
import ipaddress
from dataclasses import dataclass, field

from .exceptions import MacroError, NotSpfError
from .macros import SessionInput, expand_macros, has_macros, truncate_domain
from .parser import (
    Directive,
    Modifier,
    Qualifier,
    SpfRecord,
    Term,
    TxtStatus,
    classify_txt_set,
    parse_spf,
)
from .resolver import DnsAnswer, Resolver, RRType, normalize_name
from .taxonomy import (
    NOT_FOUND_BY_STATUS,
    ErrorClass,
    ErrorKind,
    NotFoundCause,
    first_syntax_error,
    not_found,
    syntax_error_classes,
)

LOOKUP_LIMIT = 10
VOID_LOOKUP_LIMIT = 2
MX_HOST_LIMIT = 10
PTR_NAME_LIMIT = 10
DEFAULT_MAX_DEPTH = 20


class SpfResult(str, enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    SOFTFAIL = "softfail"
    NEUTRAL = "neutral"
    NONE = "none"
    TEMPERROR = "temperror"
    PERMERROR = "permerror"

    @classmethod
    def from_qualifier(cls, qualifier: Qualifier) -> "SpfResult":
        return {
            Qualifier.PASS: cls.PASS,
            Qualifier.FAIL: cls.FAIL,
            Qualifier.SOFTFAIL: cls.SOFTFAIL,
            Qualifier.NEUTRAL: cls.NEUTRAL,
        }[qualifier]


@dataclass
class EvalTrace:
    lookups_used: int = 0
    void_lookups_used: int = 0
    visited: list[tuple[str, str]] = field(default_factory=list)
    error: ErrorClass | None = None
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "lookups_used": self.lookups_used,
            "void_lookups_used": self.void_lookups_used,
            "visited": [list(item) for item in self.visited],
            "error": self.error.to_dict() if self.error else None,
            "warnings": list(self.warnings),
        }


@dataclass
class CheckOutcome:
    result: SpfResult
    matched: tuple[str, int, str] | None  # (domain, term index, term text)
    trace: EvalTrace

    def to_dict(self) -> dict:
        return {
            "result": self.result.value,
            "matched": list(self.matched) if self.matched else None,
            "trace": self.trace.to_dict(),
        }


def budget_check(trace: EvalTrace, term: Term) -> ErrorClass | None:
    """Charge one lookup for DNS-causing terms; the 11th one is an error."""
    if not term.causes_lookup:
        return None
    if trace.lookups_used >= LOOKUP_LIMIT:
        return ErrorClass(ErrorKind.TOO_MANY_LOOKUPS, detail=f"more than {LOOKUP_LIMIT} DNS-causing terms")
    trace.lookups_used += 1
    return None


def void_check(trace: EvalTrace, answer: DnsAnswer) -> ErrorClass | None:
    if not answer.void:
        return None
    trace.void_lookups_used += 1
    if trace.void_lookups_used > VOID_LOOKUP_LIMIT:
        return ErrorClass(ErrorKind.TOO_MANY_VOID_LOOKUPS, detail=f"more than {VOID_LOOKUP_LIMIT} void lookups")
    return None


def fetch_and_classify(domain: str, resolver: Resolver) -> SpfRecord | ErrorClass:
    """Fetch the TXT set of ``domain`` and return its leniently parsed record.

    Anything that keeps a single SPF record from being found is returned as
    a RecordNotFound error class, never raised.
    """
    domain = normalize_name(domain)
    answer = resolver.resolve(domain, RRType.TXT)
    if not answer.ok:
        return not_found(NOT_FOUND_BY_STATUS[answer.status], domain)
    outcome = classify_txt_set(answer.records)
    if outcome.status is TxtStatus.MISSING:
        return not_found(NotFoundCause.SPF_MISSING, domain)
    if outcome.status is TxtStatus.MULTIPLE:
        return not_found(NotFoundCause.MULTIPLE_RECORDS, domain, f"{outcome.count} SPF records")
    try:
        return parse_spf(outcome.raw, "lenient")
    except NotSpfError:  # pragma: no cover - classify_txt_set checked the tag
        return not_found(NotFoundCause.SPF_MISSING, domain)


class _Abort(Exception):
    def __init__(self, result: SpfResult, error: ErrorClass):
        super().__init__(error.label())
        self.result = result
        self.error = error


def _loop_error(target: str, chain: tuple[str, ...], via: str) -> ErrorClass:
    depth = len(chain) - 1 - chain.index(target)
    if via == "redirect":
        return ErrorClass(ErrorKind.REDIRECT_LOOP, domain=target, detail=" -> ".join(chain + (target,)))
    return ErrorClass(ErrorKind.INCLUDE_LOOP, domain=target, depth=depth, detail=" -> ".join(chain + (target,)))


class _Evaluation:
    def __init__(self, session: SessionInput, resolver: Resolver, max_depth: int):
        self.session = session
        self.resolver = resolver
        self.max_depth = max_depth
        self.trace = EvalTrace()

    def run(self, domain: str) -> CheckOutcome:
        try:
            result, matched = self._evaluate(normalize_name(domain), (), None)
        except _Abort as abort:
            self.trace.error = abort.error
            return CheckOutcome(abort.result, None, self.trace)
        return CheckOutcome(result, matched, self.trace)

    def _permerror(self, error: ErrorClass):
        raise _Abort(SpfResult.PERMERROR, error)

    def _evaluate(self, domain, chain, via):
        fetched = fetch_and_classify(domain, self.resolver)
        if isinstance(fetched, ErrorClass):
            if fetched.is_dns_error:
                raise _Abort(SpfResult.TEMPERROR, fetched)
            if via is None and fetched.subtype != NotFoundCause.MULTIPLE_RECORDS.value:
                self.trace.error = fetched
                return SpfResult.NONE, None
            self._permerror(fetched)
        record = fetched
        error = first_syntax_error(record.errors, domain)
        if error is not None:
            self._permerror(error)
        chain = chain + (domain,)
        if len(chain) > self.max_depth:
            self._permerror(ErrorClass(ErrorKind.TOO_MANY_LOOKUPS, domain=domain, detail="recursion depth"))

        for index, term in enumerate(record.terms):
            self.trace.visited.append((domain, str(term)))
            if isinstance(term, Modifier):
                if term.name == "redirect":
                    return self._redirect(term, domain, chain)
                continue
            if self._matches(term, domain, chain):
                return SpfResult.from_qualifier(term.qualifier), (domain, index, str(term))
        return SpfResult.NEUTRAL, None

    def _charge(self, term: Term):
        error = budget_check(self.trace, term)
        if error is not None:
            self._permerror(error)

    def _target(self, spec: str | None, domain: str) -> str:
        if spec is None:
            return domain
        if not has_macros(spec):
            return normalize_name(spec)
        try:
            return normalize_name(truncate_domain(expand_macros(spec, self.session, domain)))
        except MacroError as exc:
            self._permerror(ErrorClass(ErrorKind.SYNTAX_ERROR, domain=domain, detail=str(exc)))

    def _lookup(self, name: str, rrtype: RRType, counts_void: bool = True) -> DnsAnswer:
        answer = self.resolver.resolve(name, rrtype)
        if answer.transient:
            raise _Abort(SpfResult.TEMPERROR, not_found(NotFoundCause.DNS_ERROR, name, rrtype.value))
        if counts_void:
            error = void_check(self.trace, answer)
            if error is not None:
                self._permerror(ErrorClass(error.kind, domain=name, detail=error.detail))
        return answer

    @property
    def _address_type(self) -> RRType:
        return RRType.A if self.session.client_ip.version == 4 else RRType.AAAA

    def _host_matches(self, host: str, cidr4, cidr6, counts_void: bool = True) -> bool:
        answer = self._lookup(host, self._address_type, counts_void)
        if not answer.ok:
            return False
        ip = self.session.client_ip
        prefix = (32 if cidr4 is None else cidr4) if ip.version == 4 else (128 if cidr6 is None else cidr6)
        for address in answer.records:
            if ip in ipaddress.ip_network(f"{address}/{prefix}", strict=False):
                return True
        return False

    def _matches(self, term: Directive, domain: str, chain) -> bool:
        mechanism = term.mechanism
        kind = mechanism.kind
        ip = self.session.client_ip
        if kind == "all":
            return True
        if kind in ("ip4", "ip6"):
            network = mechanism.network
            return network.version == ip.version and ip in network

        self._charge(term)
        target = self._target(mechanism.domain, domain)
        if kind == "a":
            return self._host_matches(target, mechanism.cidr4, mechanism.cidr6)
        if kind == "mx":
            answer = self._lookup(target, RRType.MX)
            if not answer.ok:
                return False
            if len(answer.records) > MX_HOST_LIMIT:
                self._permerror(ErrorClass(
                    ErrorKind.TOO_MANY_LOOKUPS, domain=target, detail=f"more than {MX_HOST_LIMIT} MX hosts",
                ))
            for _, host in sorted(answer.records):
                if self._host_matches(host, mechanism.cidr4, mechanism.cidr6, counts_void=False):
                    return True
            return False
        if kind == "ptr":
            self.trace.warnings.append(f"{domain}: ptr mechanism is deprecated")
            answer = self._lookup(ip.reverse_pointer, RRType.PTR)
            if not answer.ok:
                return False
            for name in answer.records[:PTR_NAME_LIMIT]:
                name = normalize_name(name)
                if name != target and not name.endswith("." + target):
                    continue
                if self._host_matches(name, None, None, counts_void=False):
                    return True
            return False
        if kind == "exists":
            return self._lookup(target, RRType.A).ok
        if kind == "include":
            if target in chain:
                self._permerror(_loop_error(target, chain, "include"))
            result, _ = self._evaluate(target, chain, "include")
            return result is SpfResult.PASS
        raise AssertionError(kind)  # pragma: no cover

    def _redirect(self, term: Modifier, domain: str, chain):
        self._charge(term)
        target = self._target(term.value, domain)
        if target in chain:
            self._permerror(_loop_error(target, chain, "redirect"))
        return self._evaluate(target, chain, "redirect")


def check_host(session: SessionInput, domain: str, resolver: Resolver, max_depth: int = DEFAULT_MAX_DEPTH) -> CheckOutcome:
    """Evaluate the SPF policy of ``domain`` for one SMTP client.

    Terms are tried left to right and the first matching directive decides.
    ``include`` only matches on a Pass of the included policy; ``redirect``
    hands the whole evaluation to the target and later terms are ignored.
    """
    if isinstance(session, (str, ipaddress.IPv4Address, ipaddress.IPv6Address)):
        session = SessionInput.for_domain(session, domain)
    return _Evaluation(session, resolver, max_depth).run(domain)


@dataclass
class BudgetReport:
    """Evaluation-independent walk over a policy and everything it references."""

    lookups: int = 0
    void_lookups: int = 0
    errors: list[ErrorClass] = field(default_factory=list)
    dns_errors: list[ErrorClass] = field(default_factory=list)
    reachable: set[str] = field(default_factory=set)
    ptr_used: bool = False
    truncated: bool = False

    def add_error(self, error: ErrorClass) -> None:
        if error.is_dns_error:
            if error not in self.dns_errors:
                self.dns_errors.append(error)
        elif error not in self.errors:
            self.errors.append(error)


class _Walker:
    hard_lookup_cap = 200

    def __init__(self, resolver: Resolver, max_depth: int):
        self.resolver = resolver
        self.max_depth = max_depth
        self.report = BudgetReport()

    def walk(self, domain: str, record: SpfRecord | None):
        domain = normalize_name(domain)
        self.report.reachable.add(domain)
        if record is None:
            fetched = fetch_and_classify(domain, self.resolver)
            if isinstance(fetched, ErrorClass):
                return
            record = fetched
        self._walk_record(domain, record, (domain,))
        if self.report.lookups > LOOKUP_LIMIT:
            self.report.add_error(ErrorClass(
                ErrorKind.TOO_MANY_LOOKUPS, domain=domain, detail=f"{self.report.lookups} DNS-causing terms",
            ))
        if self.report.void_lookups > VOID_LOOKUP_LIMIT:
            self.report.add_error(ErrorClass(
                ErrorKind.TOO_MANY_VOID_LOOKUPS, domain=domain, detail=f"{self.report.void_lookups} void lookups",
            ))
        return self.report

    def _void(self, name: str, rrtype: RRType):
        answer = self.resolver.resolve(name, rrtype)
        if answer.void:
            self.report.void_lookups += 1
        elif answer.transient:
            self.report.add_error(not_found(NotFoundCause.DNS_ERROR, name, rrtype.value))

    def _walk_record(self, domain: str, record: SpfRecord, chain):
        for term in record.effective_terms():
            if not term.causes_lookup:
                continue
            if self.report.lookups >= self.hard_lookup_cap:
                self.report.truncated = True
                return
            self.report.lookups += 1
            if isinstance(term, Modifier):
                self._descend(domain, term.value, chain, "redirect")
                continue
            mechanism = term.mechanism
            if mechanism.kind == "ptr":
                self.report.ptr_used = True
                continue
            if has_macros(mechanism.domain):
                continue
            target = normalize_name(mechanism.domain) if mechanism.domain else domain
            if mechanism.kind == "include":
                self._descend(domain, mechanism.domain, chain, "include")
            elif mechanism.kind == "mx":
                self._void(target, RRType.MX)
            else:
                self._void(target, RRType.A)

    def _descend(self, domain: str, spec: str, chain, via: str):
        if has_macros(spec):
            return
        target = normalize_name(spec)
        if target in chain:
            self.report.add_error(_loop_error(target, chain, via))
            return
        if len(chain) >= self.max_depth:
            self.report.truncated = True
            return
        self.report.reachable.add(target)
        fetched = fetch_and_classify(target, self.resolver)
        if isinstance(fetched, ErrorClass):
            self.report.add_error(fetched)
            return
        for error in syntax_error_classes(fetched.errors, target):
            self.report.add_error(error)
        self._walk_record(target, fetched, chain + (target,))


def audit_lookups(domain: str, resolver: Resolver, record: SpfRecord | None = None,
                  max_depth: int = DEFAULT_MAX_DEPTH) -> BudgetReport:
    """Count DNS-causing terms and void lookups across the whole include tree.

    Unlike check_host this does not stop at the first match, so it reports
    budget problems that only some senders would trigger. Loops, missing
    include targets and broken included records are collected as errors.
    """
    return _Walker(resolver, max_depth).walk(domain, record) or BudgetReport()


def detect_loops(domain: str, resolver: Resolver, max_depth: int = DEFAULT_MAX_DEPTH) -> ErrorClass | None:
    """First include or redirect loop reachable from ``domain``, if any."""
    clean: dict[str, frozenset] = {}

    def visit(name: str, chain: tuple[str, ...]):
        fetched = fetch_and_classify(name, resolver)
        if isinstance(fetched, ErrorClass):
            clean[name] = frozenset()
            return None, frozenset()
        chain = chain + (name,)
        reached = set()
        for term in fetched.effective_terms():
            if isinstance(term, Modifier) and term.name == "redirect":
                spec, via = term.value, "redirect"
            elif isinstance(term, Directive) and term.mechanism.kind == "include":
                spec, via = term.mechanism.domain, "include"
            else:
                continue
            if has_macros(spec):
                continue
            target = normalize_name(spec)
            reached.add(target)
            if target in chain:
                return _loop_error(target, chain, via), frozenset()
            if len(chain) >= max_depth:
                continue
            below = clean.get(target)
            if below is not None and below.isdisjoint(chain):
                reached |= below
                continue
            loop, below = visit(target, chain)
            if loop is not None:
                return loop, frozenset()
            reached |= below
        clean[name] = frozenset(reached)
        return None, clean[name]

    loop, _ = visit(normalize_name(domain), ())
    return loop
