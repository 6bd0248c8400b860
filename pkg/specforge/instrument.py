"""Value profiles collected by instrumentation taps."""

import copy
import logging
import threading
from dataclasses import dataclass, field
from typing import Literal

from .constants import (
    DEFAULT_PROFILE_CAPACITY,
    FREQUENCY_RECORD_OPS,
    HISTOGRAM_MAX_BUCKETS,
    HISTOGRAM_RECORD_OPS,
)
from .errors import ConfigError
from .mini_ir import Tap

logger = logging.getLogger(__name__)

ProfileKind = Literal["frequency", "histogram"]


@dataclass
class ValueProfile:
    kind: ProfileKind
    every_k: int = 1
    capacity: int = DEFAULT_PROFILE_CAPACITY
    lo: int = 0
    hi: int = 0
    counts: dict[int, int] = field(default_factory=dict)
    buckets: list[int] = field(default_factory=list)
    pending: dict[int, int] = field(default_factory=dict)
    samples_taken: int = 0
    evaluations: int = 0

    @classmethod
    def frequency(cls, every_k: int = 1, capacity: int = DEFAULT_PROFILE_CAPACITY):
        if capacity < 1:
            raise ConfigError("profile capacity must be >= 1")
        return cls("frequency", every_k=every_k, capacity=capacity)

    @classmethod
    def histogram(
        cls,
        lo: int,
        hi: int,
        every_k: int = 1,
        max_buckets: int = HISTOGRAM_MAX_BUCKETS,
    ):
        if lo > hi:
            raise ConfigError(f"histogram range [{lo}, {hi}] is empty")
        n = min(hi - lo + 1, max_buckets)
        return cls("histogram", every_k=every_k, lo=lo, hi=hi, buckets=[0] * n)

    @property
    def is_histogram(self) -> bool:
        return self.kind == "histogram"

    def bucket_index(self, value: int) -> int:
        value = min(max(value, self.lo), self.hi)
        return (value - self.lo) * len(self.buckets) // (self.hi - self.lo + 1)

    def bucket_lower_bound(self, index: int) -> int:
        span = self.hi - self.lo + 1
        n = len(self.buckets)
        return self.lo + -(-index * span // n)

    def record(self, value: int):
        self.samples_taken += 1
        if self.is_histogram:
            self.buckets[self.bucket_index(value)] += 1
            return
        counts = self.counts
        if value in counts:
            counts[value] += 1
        elif len(counts) < self.capacity:
            counts[value] = 1
        else:
            self._admit(value)

    def _admit(self, value: int):
        """Min-count eviction at capacity.

        A newcomer waits in `pending` until it has been seen more often than
        the least counted entry, then takes that entry's place.
        """
        counts, pending = self.counts, self.pending
        victim = min(counts, key=lambda v: (counts[v], v))
        seen = pending.pop(value, 0) + 1
        if seen > counts[victim] or counts[victim] <= 1:
            del counts[victim]
            counts[value] = seen
            return
        if len(pending) >= self.capacity:
            del pending[min(pending, key=lambda v: (pending[v], v))]
        pending[value] = seen

    def top_n(self, n: int) -> list[tuple[int, int]]:
        if self.is_histogram:
            raise ConfigError("top_n is only defined on frequency profiles")
        ranked = sorted(self.counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return ranked[: max(n, 0)]

    @property
    def total(self) -> int:
        return sum(self.buckets) if self.is_histogram else sum(self.counts.values())

    def rows(self) -> list[tuple[int, int]]:
        """(value, count) pairs; histogram values are bucket lower bounds."""
        if self.is_histogram:
            return [(self.bucket_lower_bound(i), c) for i, c in enumerate(self.buckets)]
        return sorted(self.counts.items())

    def snapshot(self) -> "ValueProfile":
        return copy.deepcopy(self)


def record(p: ValueProfile, v: int):
    p.record(v)


def top_n(p: ValueProfile, n: int) -> list[tuple[int, int]]:
    return p.top_n(n)


class ProfileStore:
    """Profiles keyed by point label, written by taps and read by the policy."""

    def __init__(
        self,
        capacity: int = DEFAULT_PROFILE_CAPACITY,
        max_buckets: int = HISTOGRAM_MAX_BUCKETS,
    ):
        self.capacity = capacity
        self.max_buckets = max_buckets
        self._profiles: dict[str, ValueProfile] = {}
        self._lock = threading.Lock()

    def _create(self, site: Tap) -> ValueProfile:
        if site.mode == "hist":
            return ValueProfile.histogram(
                site.lo, site.hi, site.every_k, self.max_buckets
            )
        return ValueProfile.frequency(site.every_k, self.capacity)

    def tap(self, site: Tap, value: int) -> int:
        """Count one evaluation of `site`; returns the ops spent recording."""
        with self._lock:
            profile = self._profiles.get(site.label)
            if profile is None:
                profile = self._profiles[site.label] = self._create(site)
            n = profile.evaluations
            profile.evaluations = n + 1
            if n % site.every_k:
                return 0
            profile.record(value)
        return HISTOGRAM_RECORD_OPS if site.mode == "hist" else FREQUENCY_RECORD_OPS

    def get(self, label: str) -> ValueProfile | None:
        with self._lock:
            profile = self._profiles.get(label)
            return profile.snapshot() if profile else None

    def snapshot(self) -> dict[str, ValueProfile]:
        with self._lock:
            return {label: p.snapshot() for label, p in self._profiles.items()}

    def reset(self, labels=None):
        with self._lock:
            if labels is None:
                self._profiles.clear()
            else:
                for label in labels:
                    self._profiles.pop(label, None)
        logger.debug("profiles reset: %s", "all" if labels is None else sorted(labels))

    def __contains__(self, label: str) -> bool:
        return label in self._profiles
