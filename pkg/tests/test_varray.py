from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from vstream.oracle import oracle_live_check
from vstream.varray import Element, VersionedArray, build, merge, merge_many

from strategies import versioned_arrays

A, B, C, D = 1, 2, 3, 4  # keys a..d


@pytest.fixture
def e1():
    # updates v1:a, v2:b, v3:a
    return build([(A, 3, b"a3"), (B, 2, b"b2"), (A, 1, b"a1")], 1, 3)


def brute_live(arr, i, w):
    e = arr.elems[i]
    if e.version > w:
        return False
    return not any(f.key == e.key and e.version < f.version <= w for f in arr.elems)


class TestBuild:
    def test_orders_key_then_version_desc(self, e1):
        assert [(e.key, e.version) for e in e1.elems] == [(A, 3), (A, 1), (B, 2)]

    def test_empty_array(self):
        arr = build([], 1, 1)
        assert len(arr) == 0 and arr.interval == (1, 1)

    def test_dedups_identical_copies(self):
        arr = build([(A, 1, b"x"), (A, 1, b"x")], 1, 1)
        assert arr.elems == (Element(A, 1, b"x"),)

    def test_rejects_future_versions(self):
        with pytest.raises(ValueError, match="newer"):
            build([(A, 5, b"x")], 1, 3)

    def test_rejects_elements_dead_everywhere(self):
        with pytest.raises(ValueError, match="dead"):
            build([(A, 1, b"x"), (A, 2, b"y")], 2, 3)

    def test_rejects_empty_interval(self):
        with pytest.raises(ValueError):
            VersionedArray((), 3, 2)


class TestAccounting:
    def test_live_intervals(self, e1):
        got = {(e1.elems[i].key, e1.elems[i].version): (iv.lo, iv.hi) for i, iv in enumerate(e1.live_intervals())}
        assert got == {(A, 1): (1, 2), (A, 3): (3, 3), (B, 2): (2, 3)}

    @pytest.mark.parametrize("w,expected", [(1, 1), (2, 2), (3, 2)])
    def test_live_count(self, e1, w, expected):
        assert e1.live_count(w) == expected
        assert oracle_live_check(e1, w) == expected

    def test_live_count_outside_interval(self, e1):
        with pytest.raises(ValueError):
            e1.live_count(4)

    def test_density(self, e1):
        assert e1.density() == Fraction(1, 3)
        assert build([(A, 1, b"")], 1, 1).density() == 1
        assert build([(A, 1, b""), (B, 2, b"")], 1, 2).density() == Fraction(1, 2)

    def test_density_of_empty_array_is_an_error(self):
        with pytest.raises(ValueError):
            build([], 1, 1).density()

    def test_lead(self, e1):
        assert e1.lead_count(2) == 1
        assert e1.lead_total() == 3
        assert build([(A, 1, b"")], 2, 2).lead_total() == 0

    @pytest.mark.parametrize("v,keys", [(1, [(A, 3), (A, 1), (B, 2)]), (2, [(A, 3), (A, 1), (B, 2)]),
                                        (3, [(A, 3), (B, 2)])])
    def test_suffix_subarray(self, e1, v, keys):
        assert [(e.key, e.version) for e in e1.suffix_subarray(v)] == keys
        assert e1.suffix_count(v) == len(keys)

    def test_live_profile(self, e1):
        assert e1.live_profile() == [(1, 1), (2, 2), (3, 2)]


class TestScan:
    @pytest.mark.parametrize("v,k1,k2,expected", [
        (2, A, B, [(A, 1), (B, 2)]),
        (3, A, A, [(A, 3)]),
        (1, B, B, []),
    ])
    def test_scan_range(self, e1, v, k1, k2, expected):
        assert [(e.key, e.version) for e in e1.scan_range(v, k1, k2)] == expected

    def test_scan_reports_examined(self, e1):
        out, examined = e1.scan(3, A, A)
        assert examined == 2 and len(out) == 1


class TestMerge:
    def test_adjacent(self, e1):
        m = merge(e1, build([(C, 4, b"c")], 4, 4))
        assert len(m) == 4 and m.interval == (1, 4)

    def test_identity_with_empty(self, e1):
        m = merge(e1, build([], 2, 3))
        assert m.elems == e1.elems and m.interval == e1.interval

    def test_shared_copy_kept_once(self):
        x = build([(A, 1, b"a"), (B, 2, b"b")], 2, 2)
        y = build([(A, 1, b"a"), (C, 3, b"c")], 3, 3)
        m = merge(x, y)
        assert [(e.key, e.version) for e in m.elems].count((A, 1)) == 1

    def test_gap_rejected(self, e1):
        with pytest.raises(ValueError, match="non-contiguous"):
            merge(e1, build([(C, 6, b"")], 6, 6))

    def test_gap_filled_on_request(self, e1):
        m = merge(e1, build([(C, 6, b"")], 6, 6), fill_gap=True)
        assert m.interval == (1, 6)

    def test_merge_drops_shadowed_copies(self):
        # (a,1) is a copy in the newer array but the merged interval starts later than its successor
        older = build([(A, 2, b"")], 2, 2)
        newer = build([(A, 1, b""), (B, 3, b"")], 3, 3)
        m = merge(older, newer)
        assert (A, 1) not in [(e.key, e.version) for e in m.elems]


@given(versioned_arrays())
def test_liveness_matches_brute_force(arr):
    for i in range(len(arr)):
        for w in range(arr.w_lo, arr.w_hi + 1):
            assert arr.is_live(i, w) == brute_live(arr, i, w)


@given(versioned_arrays())
def test_ordering_invariant(arr):
    for a, b in zip(arr.elems, arr.elems[1:]):
        assert a.key < b.key or (a.key == b.key and a.version > b.version)


@given(versioned_arrays())
def test_every_element_live_somewhere(arr):
    assert all(iv.lo <= iv.hi for iv in arr.live_intervals())


@given(versioned_arrays())
def test_density_is_brute_force_minimum(arr):
    brute = min(oracle_live_check(arr, w) for w in range(arr.w_lo, arr.w_hi + 1))
    assert arr.density() == Fraction(brute, len(arr))


@given(versioned_arrays())
def test_live_count_non_decreasing(arr):
    counts = [arr.live_count(w) for w in range(arr.w_lo, arr.w_hi + 1)]
    assert counts == sorted(counts)


@given(versioned_arrays())
def test_suffix_monotone(arr):
    assert list(arr.suffix_subarray(arr.w_lo)) == list(arr.elems)
    prev = set(arr.elems)
    for v in range(arr.w_lo, arr.w_hi + 1):
        cur = set(arr.suffix_subarray(v))
        assert cur <= prev
        assert len(cur) == arr.suffix_count(v)
        prev = cur


def _closest(streams, v):
    best = {}
    for s in streams:
        for e in s:
            if e.version <= v and (e.key not in best or e.version > best[e.key].version):
                best[e.key] = e
    return sorted(best.values())


@given(versioned_arrays(), st.data())
def test_merge_commutes_with_scan(arr, data):
    cut = data.draw(st.integers(arr.w_lo, arr.w_hi))
    left = build(arr.window(arr.w_lo, cut), arr.w_lo, cut)
    if cut == arr.w_hi:
        return
    right = build(arr.window(cut + 1, arr.w_hi), cut + 1, arr.w_hi)
    m = merge(left, right)
    k1 = data.draw(st.integers(0, 9))
    k2 = data.draw(st.integers(k1, 9))
    v = data.draw(st.integers(arr.w_lo, arr.w_hi))
    expected = _closest([left.scan_range(v, k1, k2), right.scan_range(v, k1, k2)], v)
    assert sorted(m.scan_range(v, k1, k2)) == expected


@given(st.lists(versioned_arrays(), min_size=1, max_size=4))
def test_merge_many_output_sorted_and_unique(arrays):
    lo = min(a.w_lo for a in arrays)
    hi = max(a.w_hi for a in arrays)
    m = merge_many(arrays, lo, hi, 0)
    pairs = [(e.key, e.version) for e in m.elems]
    assert len(pairs) == len(set(pairs))
    assert pairs == sorted(pairs, key=lambda p: (p[0], -p[1]))
