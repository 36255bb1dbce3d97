"""Exact sets of IPv4 addresses kept as sorted, disjoint intervals."""

from __future__ import annotations

import bisect
import ipaddress
from typing import Iterable

ADDRESS_SPACE = 1 << 32


def _interval(network) -> tuple[int, int]:
    if not isinstance(network, ipaddress.IPv4Network):
        network = ipaddress.IPv4Network(network, strict=False)
    start = int(network.network_address)
    return start, start + network.num_addresses


def _canonical(intervals) -> tuple[tuple[int, int], ...]:
    merged: list[list[int]] = []
    for start, end in sorted(intervals):
        if start >= end:
            continue
        if merged and start <= merged[-1][1]:
            if end > merged[-1][1]:
                merged[-1][1] = end
        else:
            merged.append([start, end])
    return tuple((start, end) for start, end in merged)


class IpSet:
    """Immutable IPv4 address set.

    Intervals are half-open ``[start, end)`` integers; after construction
    they are sorted, disjoint and never adjacent, so two sets holding the
    same addresses compare equal however they were built.
    """

    __slots__ = ("_ranges", "_starts")

    def __init__(self, networks: Iterable = ()):
        self._set(_canonical(_interval(n) for n in networks))

    def _set(self, ranges):
        self._ranges = ranges
        self._starts = [start for start, _ in ranges]

    @classmethod
    def from_intervals(cls, intervals) -> "IpSet":
        obj = cls.__new__(cls)
        obj._set(_canonical(intervals))
        return obj

    @classmethod
    def everything(cls) -> "IpSet":
        return cls.from_intervals([(0, ADDRESS_SPACE)])

    @property
    def intervals(self) -> tuple[tuple[int, int], ...]:
        return self._ranges

    def count(self) -> int:
        return sum(end - start for start, end in self._ranges)

    def __contains__(self, address) -> bool:
        if not isinstance(address, int):
            address = int(ipaddress.IPv4Address(address))
        pos = bisect.bisect_right(self._starts, address) - 1
        return pos >= 0 and address < self._ranges[pos][1]

    def __or__(self, other: "IpSet") -> "IpSet":
        return IpSet.from_intervals(self._ranges + other._ranges)

    union = __or__

    def __sub__(self, other: "IpSet") -> "IpSet":
        result = []
        cuts = other._ranges
        j = 0
        for start, end in self._ranges:
            while j < len(cuts) and cuts[j][1] <= start:
                j += 1
            k = j
            current = start
            while k < len(cuts) and cuts[k][0] < end:
                if cuts[k][0] > current:
                    result.append((current, cuts[k][0]))
                current = max(current, cuts[k][1])
                k += 1
            if current < end:
                result.append((current, end))
        return IpSet.from_intervals(result)

    difference = __sub__

    def __and__(self, other: "IpSet") -> "IpSet":
        return self - (self - other)

    def __eq__(self, other) -> bool:
        return isinstance(other, IpSet) and self._ranges == other._ranges

    def __hash__(self) -> int:
        return hash(self._ranges)

    def __bool__(self) -> bool:
        return bool(self._ranges)

    def cidrs(self) -> list[ipaddress.IPv4Network]:
        out = []
        for start, end in self._ranges:
            out.extend(ipaddress.summarize_address_range(
                ipaddress.IPv4Address(start), ipaddress.IPv4Address(end - 1),
            ))
        return out

    def __repr__(self) -> str:
        shown = ", ".join(str(n) for n in self.cidrs()[:4])
        more = ", ..." if len(self.cidrs()) > 4 else ""
        return f"IpSet([{shown}{more}])"


def count_ips(ipset: IpSet) -> int:
    return ipset.count()
