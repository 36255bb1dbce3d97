import ipaddress

from hypothesis import given, settings
from hypothesis import strategies as st

from spfaudit.ipset import IpSet, count_ips


def brute(networks):
    members = set()
    for network in networks:
        start = int(network.network_address)
        members.update(range(start, start + network.num_addresses))
    return members


def test_empty_set():
    assert count_ips(IpSet()) == 0
    assert not IpSet()


def test_whole_space():
    assert count_ips(IpSet([ipaddress.ip_network("0.0.0.0/0")])) == 4294967296


def test_two_disjoint_blocks():
    networks = [ipaddress.ip_network("198.51.100.0/30"), ipaddress.ip_network("198.51.100.8/30")]
    assert count_ips(IpSet(networks)) == len(brute(networks)) == 8


def test_adjacent_blocks_merge():
    merged = IpSet([ipaddress.ip_network("192.0.2.0/25"), ipaddress.ip_network("192.0.2.128/25")])
    assert merged == IpSet([ipaddress.ip_network("192.0.2.0/24")])
    assert merged.cidrs() == [ipaddress.ip_network("192.0.2.0/24")]


def test_membership_and_difference():
    block = IpSet([ipaddress.ip_network("10.0.0.0/24")])
    hole = IpSet([ipaddress.ip_network("10.0.0.64/26")])
    rest = block - hole
    assert rest.count() == 192
    assert "10.0.0.1" in rest and "10.0.0.70" not in rest and "10.0.1.0" not in rest
    assert (block & hole) == hole


_small = st.tuples(st.integers(0, 255), st.integers(0, 255), st.integers(22, 32)).map(
    lambda t: ipaddress.ip_network(f"10.{t[0] % 4}.{t[1]}.0/{t[2]}", strict=False))


@settings(max_examples=200, deadline=None)
@given(st.lists(_small, max_size=8))
def test_count_matches_enumeration(networks):
    assert IpSet(networks).count() == len(brute(networks))


@settings(max_examples=200, deadline=None)
@given(st.lists(_small, max_size=6), st.lists(_small, max_size=6))
def test_set_algebra_matches_python_sets(a, b):
    x, y = IpSet(a), IpSet(b)
    assert (x | y).count() == len(brute(a) | brute(b))
    assert (x - y).count() == len(brute(a) - brute(b))
    assert (x & y).count() == len(brute(a) & brute(b))


@settings(max_examples=100, deadline=None)
@given(st.lists(_small, max_size=10), st.randoms())
def test_insertion_order_irrelevant(networks, rng):
    shuffled = list(networks)
    rng.shuffle(shuffled)
    folded = IpSet()
    for network in shuffled:
        folded = folded | IpSet([network])
    assert folded == IpSet(networks)
    assert folded.intervals == IpSet(networks).intervals


@settings(max_examples=200, deadline=None)
@given(st.lists(_small, max_size=8))
def test_canonical_intervals_never_touch(networks):
    ranges = IpSet(networks).intervals
    assert all(a_end < b_start for (_, a_end), (b_start, _) in zip(ranges, ranges[1:]))
    assert all(start < end for start, end in ranges)
