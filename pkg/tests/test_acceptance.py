"""End-to-end acceptance checks, one or more tests per numbered criterion.

A per-criterion PASS/FAIL line is printed in the terminal summary.
"""

import hashlib
import math
import random
import time
from collections import defaultdict

import pytest

from castore import probability as prob
from castore.digests import md5, sha256
from castore.iterhash import SboxCompression, compression_collision_witness, md_construct, md_encode
from castore.naming import GmComponents, NamingScheme, compute_m, compute_mpp, parse_gm
from castore.reports import emit_table1, emit_table2
from castore.store import ClusterConfig, Store

criterion = pytest.mark.criterion

RFC1321 = [
    (b"", "d41d8cd98f00b204e9800998ecf8427e"),
    (b"a", "0cc175b9c0f1b6a831c399e269772661"),
    (b"abc", "900150983cd24fb0d6963f7d28e17f72"),
    (b"message digest", "f96b697d7cb7938d525a2f31aaf161d0"),
    (b"abcdefghijklmnopqrstuvwxyz", "c3fcd3d76192e4007dfb496cca67e13b"),
    (b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789", "d174ab98d277d9f5a5611c2c9f419d9f"),
    (b"1234567890" * 8, "57edf4a22be3c955ac49da2e2107b67a"),
]

FIPS180 = [
    (b"abc", "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"),
    (
        b"abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq",
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1",
    ),
    (b"a" * 10**6, "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0"),
]

ROUNDED_TABLE1 = [1e-27, 1e-25, 1e-23, 1e-21, 1e-19, 1e-17, 1e-15, 1e-13, 1e-11, 1e-09]


def binomial_se(p: float, trials: int) -> float:
    return math.sqrt(p * (1 - p) / trials)


# 1 --------------------------------------------------------------------------


@criterion(1, "digest vectors and 1e5 random-input agreements")
@pytest.mark.parametrize("data,expected", RFC1321, ids=[f"rfc{i}" for i in range(len(RFC1321))])
def test_c1_md5_rfc1321(data, expected):
    assert md5(data).hex() == expected


@criterion(1, "digest vectors and 1e5 random-input agreements")
@pytest.mark.parametrize("data,expected", FIPS180, ids=["abc", "two-block", "million-a"])
def test_c1_sha256_fips180(data, expected):
    assert sha256(data).hex() == expected


@criterion(1, "digest vectors and 1e5 random-input agreements")
def test_c1_random_agreement():
    rng = random.Random(1321)
    start = time.perf_counter()
    for _ in range(10**5):
        data = rng.randbytes(rng.randrange(64))
        assert md5(data) == hashlib.md5(data).digest(), data
        assert sha256(data) == hashlib.sha256(data).digest(), data
    assert time.perf_counter() - start < 60


# 2 --------------------------------------------------------------------------


@criterion(2, "table of M collision probabilities within a factor of 2")
def test_c2_table1():
    rows = emit_table1().rows
    assert [r[0] for r in rows] == [f"1e+{e:02d}" for e in range(6, 16)]
    for row, rounded in zip(rows, ROUNDED_TABLE1):
        assert rounded / 2 <= float(row[3]) <= rounded * 2


# 3 --------------------------------------------------------------------------


@criterion(3, "GM collision over 1000 years within 25% of 4e-41")
def test_c3_gm_over():
    p = prob.gm_collision_over(100, 10_000, 3.15e13).value
    assert abs(p - 4e-41) <= 0.25 * 4e-41


# 4 --------------------------------------------------------------------------


@criterion(4, "M++ collision figures")
def test_c4_mpp():
    p = prob.mpp_collision(3.15e14).value
    assert 1e-46 / 2 <= p <= 1e-46 * 2
    assert 0.4 <= prob.mpp_collision(2**124).value <= 0.5


# 5 --------------------------------------------------------------------------


@criterion(5, "second-preimage cost 2^108")
def test_c5_preimage():
    cost = prob.second_preimage_cost(128, 21)
    assert cost.log2_dominant == 108
    assert abs(cost.log2_full - 108.0) <= 0.1


# 6 --------------------------------------------------------------------------


@criterion(6, "birthday classics")
def test_c6_birthday():
    assert 0.500 <= prob.same_birthday_as_you(253, 365).value <= 0.501
    assert 0.506 <= prob.exact_birthday(23, 365).value <= 0.508


# 7 --------------------------------------------------------------------------

_c7_elapsed = [0.0]


@criterion(7, "Monte Carlo within 3 standard errors of exact, never above the bound")
@pytest.mark.parametrize("q,N,trials", [(23, 365, 10**5), (256, 2**16, 10**5), (1000, 2**20, 2 * 10**4)])
def test_c7_monte_carlo(q, N, trials):
    start = time.perf_counter()
    res = prob.monte_carlo_birthday(q, N, trials, seed=b"acceptance")
    _c7_elapsed[0] += time.perf_counter() - start
    exact = prob.exact_birthday(q, N).value
    assert abs(res.rate - exact) <= 3 * binomial_se(exact, trials)
    assert res.rate <= prob.collision_bound(q, N).value
    assert _c7_elapsed[0] < 120


# 8 --------------------------------------------------------------------------


def _all_messages(length: int):
    for v in range(2**length):
        yield format(v, f"0{length}b") if length else ""


@criterion(8, "iterated-hash collision census at n=8, l=24")
def test_c8_census():
    start = time.perf_counter()
    f = SboxCompression(n=8, b=16)
    n, l = f.n, f.n + f.b
    r = l - n - 1
    # 16-bit messages fill two data blocks of r = 15 bits (then the length block)
    census = list(_all_messages(16))
    assert len(census) == 2**16
    assert all(len(md_encode(m, n, l)) == 3 for m in census)

    first_seen: dict[int, str] = {}
    collisions = witnesses = 0
    for m in census:
        h = md_construct(f, m)
        other = first_seen.setdefault(h, m)
        if other is m:
            continue
        collisions += 1
        w = compression_collision_witness(f, other, m)
        assert w.input_a != w.input_b
        assert f(*w.input_a) == f(*w.input_b) == w.output
        witnesses += 1
    assert collisions >= 1
    assert witnesses == collisions == 2**16 - len(first_seen)

    # padding injectivity and the tail property over every message up to the census length
    encodings = set()
    for length in range(17):
        for m in _all_messages(length):
            enc = tuple(md_encode(m, n, l))
            assert all(len(block) == r for block in enc)
            assert enc not in encodings
            encodings.add(enc)
    tails = {enc[i:] for enc in encodings for i in range(1, len(enc))}
    assert not tails & encodings
    assert time.perf_counter() - start < 120


# 9 --------------------------------------------------------------------------


@criterion(9, "GM and M++ layouts")
def test_c9_layouts():
    rng = random.Random(9)
    widths = (128, 70, 35, 10, 13)
    for _ in range(10**3):
        values = [rng.getrandbits(w) for w in widths]
        comps = GmComponents(*values)
        ca = comps.to_address()
        assert ca.scheme is NamingScheme.GM
        packed = 0
        for v, w in zip(values, widths):
            packed = (packed << w) | v
        assert ca.value == packed
        assert parse_gm(ca) == comps

        content = rng.randbytes(rng.randrange(2000))
        mpp = compute_mpp(content)
        raw = mpp.to_bytes()
        assert raw[:16] == hashlib.md5(content).digest() == compute_m(content).to_bytes()
        assert mpp.value & (2**120 - 1) == int.from_bytes(hashlib.sha256(content).digest(), "big") >> 136


# 10 -------------------------------------------------------------------------


@criterion(10, "scrub detects and repairs 50 corruptions; double corruption unrecoverable")
@pytest.mark.parametrize("scheme", list(NamingScheme))
def test_c10_store_integrity(tmp_path, scheme):
    rng = random.Random(10)
    cfg = ClusterConfig(root=tmp_path / "cas", scheme=scheme, replica_factor=2, durable=False, test_seed=b"c10")
    with Store(cfg) as store:
        contents = {}
        for i in range(10**3):
            data = b"object %d " % i + rng.randbytes(rng.randrange(1, 300))
            contents[store.write(data)] = data
        assert len(store) == 10**3

        targets = rng.sample(sorted(contents, key=lambda ca: ca.value), 51)
        injected = set()
        for ca in targets[:50]:
            idx = rng.randrange(2)
            offset = rng.randrange(len(contents[ca]))
            store.corrupt(ca, idx, offset, rng.randrange(1, 256))
            injected.add((ca, idx))

        report = store.scrub()
        assert set(report.corruptions_detected) == injected
        assert len(report.corruptions_detected) == 50
        assert report.repairs_made == 50
        assert report.unrecoverable == []
        for ca, data in contents.items():
            assert store.read(ca) == data
            assert all(st.healthy for st in store.verify(ca))

        victim = targets[50]
        store.corrupt(victim, 0, 0, 0x01)
        store.corrupt(victim, 1, len(contents[victim]) - 1, 0x80)
        report = store.scrub()
        assert report.unrecoverable == [victim]
        assert report.repairs_made == 0
        obj = store.get_object(victim)
        for rel in obj.replica_paths:
            kept = (store.root / rel).read_bytes()
            assert len(kept) == len(contents[victim]) and kept != contents[victim]
        assert victim in store


# 11 -------------------------------------------------------------------------


@criterion(11, "1e5 GM writes of identical content on 8 nodes are distinct")
def test_c11_gm_uniqueness(tmp_path):
    cfg = ClusterConfig(
        root=tmp_path / "cas",
        scheme=NamingScheme.GM,
        access_node_count=8,
        durable=False,
        test_seed=b"c11",
        frozen_clock=1_700_000_000_000,
    )
    per_node = defaultdict(list)
    with Store(cfg) as store:
        cas = []
        for i in range(10**5):
            ca = store.write(b"identical content")
            cas.append(ca)
            per_node[i % 8].append(parse_gm(ca).c)
        assert len(store) == 10**5
    assert len(set(cas)) == 10**5
    assert len({parse_gm(ca).m for ca in cas}) == 1
    for cs in per_node.values():
        assert len(cs) == 12_500
        assert all((b - a) % 1024 == 1 for a, b in zip(cs, cs[1:]))
        assert all(cs[i] == cs[i + 1024] for i in range(len(cs) - 1024))
        assert len(set(cs[:1024])) == 1024


# 12 -------------------------------------------------------------------------


@criterion(12, "dedupe under M and M++, one object per write under GM")
@pytest.mark.parametrize("scheme,expected", [(NamingScheme.M, 10**3), (NamingScheme.MPP, 10**3), (NamingScheme.GM, 10**4)])
def test_c12_dedupe(tmp_path, scheme, expected):
    rng = random.Random(12)
    distinct = [b"file %d " % i + rng.randbytes(20) for i in range(10**3)]
    writes = distinct * 10
    rng.shuffle(writes)
    cfg = ClusterConfig(root=tmp_path / "cas", scheme=scheme, durable=False, test_seed=b"c12")
    with Store(cfg) as store:
        for data in writes:
            store.write(data)
        assert len(store) == expected
        assert store.stats().objects == expected


# 13 -------------------------------------------------------------------------


@criterion(13, "summary table cells")
def test_c13_table2():
    rows = {r[0]: tuple(r[1:]) for r in emit_table2().rows}
    assert rows == {
        "M": ("2^64 files stored", "O(1)", "O(2^108)"),
        "GM": ("Not possible", "Not possible", "Not possible"),
        "M++": ("2^124 files stored", "O(2^67)", "2^119"),
    }
