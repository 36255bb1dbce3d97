"""DMARC presence and policy detection."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .resolver import Resolver, RRType, normalize_name

POLICIES = ("none", "quarantine", "reject")
_VERSION = re.compile(r"^v\s*=\s*DMARC1\s*(;|$)", re.IGNORECASE)


@dataclass(frozen=True)
class DmarcStatus:
    present: bool
    policy: str | None = None
    raw: str | None = None
    warnings: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {"present": self.present, "policy": self.policy, "raw": self.raw, "warnings": list(self.warnings)}

    @classmethod
    def from_dict(cls, data: dict) -> "DmarcStatus":
        return cls(data["present"], data.get("policy"), data.get("raw"), tuple(data.get("warnings", ())))


def parse_tags(raw: str) -> dict[str, str]:
    """Split ``k=v; k=v`` pairs; tag names are lowercased, later duplicates ignored."""
    tags: dict[str, str] = {}
    for part in raw.split(";"):
        name, sep, value = part.partition("=")
        if sep:
            tags.setdefault(name.strip().lower(), value.strip())
    return tags


def is_dmarc(raw: str) -> bool:
    return bool(_VERSION.match(raw.strip()))


def dmarc_from_record(raw: str) -> DmarcStatus:
    tags = parse_tags(raw)
    if "p" not in tags:
        return DmarcStatus(True, None, raw, ("missing p tag",))
    policy = tags["p"].lower()
    if policy not in POLICIES:
        return DmarcStatus(True, None, raw, (f"invalid policy {tags['p']!r}",))
    return DmarcStatus(True, policy, raw)


def fetch_dmarc(domain: str, resolver: Resolver) -> DmarcStatus:
    answer = resolver.resolve(f"_dmarc.{normalize_name(domain)}", RRType.TXT)
    if answer.transient:
        return DmarcStatus(False, warnings=(f"DnsError: {answer.status.value}",))
    records = [r for r in answer.records if is_dmarc(r)] if answer.ok else []
    if not records:
        return DmarcStatus(False)
    if len(records) > 1:
        return DmarcStatus(False, warnings=("MultipleRecords",))
    return dmarc_from_record(records[0])
