"""Tests for value profiles and the tap store."""

from collections import Counter

import numpy as np
import pytest

from specforge.casestudies import key_universe, random_rules, zipf_stream
from specforge.constants import FREQUENCY_RECORD_OPS, HISTOGRAM_RECORD_OPS
from specforge.errors import ConfigError
from specforge.instrument import ProfileStore, ValueProfile, record, top_n
from specforge.mini_ir import Tap, Var


def freq_site(label="k", every_k=1):
    return Tap(label, every_k, "freq", 0, 0, Var("x"))


def test_frequency_counts():
    p = ValueProfile.frequency()
    for v in (7, 7, 7, 3):
        record(p, v)
    assert p.counts == {7: 3, 3: 1}
    assert p.samples_taken == 4
    assert p.total == 4


def test_top_n_orders_by_count_then_value():
    p = ValueProfile.frequency()
    for v in [5] * 5 + [9] * 3 + [1] * 3 + [2]:
        p.record(v)
    assert top_n(p, 2) == [(5, 5), (1, 3)]
    assert p.top_n(10) == [(5, 5), (1, 3), (9, 3), (2, 1)]
    assert ValueProfile.frequency().top_n(4) == []


def test_capacity_evicts_single_count_entries():
    p = ValueProfile.frequency(capacity=2)
    for v in (1, 1, 2, 3):
        p.record(v)
    assert p.counts == {1: 2, 3: 1}


def test_established_entries_survive_newcomers():
    p = ValueProfile.frequency(capacity=2)
    for v in [10] * 5 + [20] * 3 + [30]:
        p.record(v)
    assert set(p.counts) == {10, 20}


def test_late_hot_key_is_admitted():
    p = ValueProfile.frequency(capacity=4)
    for v in [1, 2, 3, 4] * 2:
        p.record(v)
    for _ in range(1000):
        p.record(99)
    assert p.counts == {2: 2, 3: 2, 4: 2, 99: 1000}
    assert p.top_n(1) == [(99, 1000)]
    assert p.samples_taken == 1008
    assert p.pending == {}


def test_pending_newcomers_are_bounded():
    p = ValueProfile.frequency(capacity=2)
    for v in [1] * 5 + [2] * 5 + list(range(10, 20)):
        p.record(v)
    assert p.counts == {1: 5, 2: 5}
    assert len(p.pending) == 2


def test_capacity_must_be_positive():
    with pytest.raises(ConfigError):
        ValueProfile.frequency(capacity=0)


def test_histogram_buckets():
    p = ValueProfile.histogram(1, 8)
    p.record(3)
    assert p.buckets[2] == 1
    # values outside the range clamp into the edge buckets
    p.record(-50)
    p.record(1000)
    assert p.buckets[0] == 1
    assert p.buckets[-1] == 1
    assert p.total == p.samples_taken == 3


def test_wide_histogram_is_coarsened():
    p = ValueProfile.histogram(0, 99, max_buckets=4)
    assert len(p.buckets) == 4
    assert p.bucket_index(24) == 0
    assert p.bucket_index(25) == 1
    assert [lo for lo, _ in p.rows()] == [0, 25, 50, 75]


def test_histogram_has_no_top_n():
    with pytest.raises(ConfigError):
        ValueProfile.histogram(0, 3).top_n(1)
    with pytest.raises(ConfigError):
        ValueProfile.histogram(4, 3)


@pytest.mark.parametrize(
    "evaluations, expected", [(1, 1), (95, 10), (100, 10), (101, 11)]
)
def test_every_k_sampling(evaluations, expected):
    store = ProfileStore()
    site = freq_site(every_k=10)
    for i in range(evaluations):
        store.tap(site, i)
    profile = store.get("k")
    assert profile.samples_taken == expected
    assert profile.evaluations == evaluations
    assert sorted(profile.counts) == list(range(0, evaluations, 10))


def test_record_costs():
    store = ProfileStore()
    assert store.tap(freq_site(), 1) == FREQUENCY_RECORD_OPS
    assert store.tap(Tap("h", 1, "hist", 0, 9, Var("x")), 1) == HISTOGRAM_RECORD_OPS
    assert HISTOGRAM_RECORD_OPS < FREQUENCY_RECORD_OPS
    # unsampled evaluations are free
    assert store.tap(freq_site("s", 2), 1) == FREQUENCY_RECORD_OPS
    assert store.tap(freq_site("s", 2), 1) == 0


def test_store_snapshot_and_reset():
    store = ProfileStore()
    store.tap(freq_site("a"), 1)
    store.tap(freq_site("b"), 2)
    snap = store.snapshot()
    store.tap(freq_site("a"), 1)
    assert snap["a"].counts == {1: 1}
    assert "a" in store
    store.reset(["a"])
    assert "a" not in store and "b" in store
    store.reset()
    assert store.get("b") is None


def test_zipf_top_keys_survive_sampling():
    """Sampling every tenth lookup of a Zipf stream keeps the exact top eight."""
    rng = np.random.default_rng(0)
    keys = key_universe(random_rules(50, seed=1), 1000, rng)
    stream = zipf_stream(keys, 100_000, 1.1, rng, "quota")
    exact = Counter(stream)
    store = ProfileStore()
    site = Tap("fp", 10, "freq", 0, 0, Var("addr"))
    for addr in stream:
        store.tap(site, addr)
    sampled = [v for v, _ in store.get("fp").top_n(8)]
    assert set(sampled) == {v for v, _ in exact.most_common(8)}
    assert sampled == keys[:8]
