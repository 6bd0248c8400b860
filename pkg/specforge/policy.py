"""Exploration policies: apply configurations, measure windows, settle and watch."""

import logging
import math
import threading
import time
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from typing import Literal, Protocol

from .engine import Counters, SpecRuntime
from .errors import ConfigError, RuntimeStateError, SpecforgeError
from .instrument import ValueProfile
from .spec_model import (
    Const,
    Custom,
    CustomKind,
    EnumKind,
    RangeKind,
    SpecConfig,
    SpecSpace,
    range_samples_of,
)

logger = logging.getLogger(__name__)

EventKind = Literal[
    "instrument-start",
    "explore-start",
    "config-switch",
    "settle",
    "re-explore-trigger",
]
DEFAULT_WARMUP_FRACTION = 0.10
DOMINANT_FRACTION = 0.70
FASTPATH_SIZES = (0, 1, 2, 4, 8, 16)


@dataclass(frozen=True)
class WindowStats:
    invocations: int
    ops_executed: int
    events: int
    guard_failures: int
    specialized_hits: int
    elapsed_s: float

    @classmethod
    def of(cls, counters: Counters, elapsed_s: float) -> "WindowStats":
        return cls(
            counters.invocations,
            counters.ops_executed,
            counters.events,
            counters.guard_failures,
            counters.specialized_hits,
            elapsed_s,
        )


Metric = Callable[[WindowStats], float]


def ops_throughput(w: WindowStats) -> float:
    """Invocations per million executed ops."""
    return w.invocations * 1e6 / w.ops_executed if w.ops_executed else 0.0


def events_throughput(w: WindowStats) -> float:
    """Application events per million executed ops."""
    return w.events * 1e6 / w.ops_executed if w.ops_executed else 0.0


def wall_throughput(w: WindowStats) -> float:
    return w.invocations / w.elapsed_s if w.elapsed_s > 0 else 0.0


METRICS: dict[str, Metric] = {
    "ops": ops_throughput,
    "events": events_throughput,
    "wall": wall_throughput,
}


@dataclass(frozen=True)
class MetricSample:
    window_start: float
    window_len: float
    metric: float
    config: SpecConfig
    stats: WindowStats | None = None

    @property
    def config_id(self) -> str:
        return self.config.config_id


@dataclass(frozen=True)
class TimelineEvent:
    time: float
    event: EventKind
    config: SpecConfig | None = None
    detail: str = ""


@dataclass
class ExplorationReport:
    samples: list[MetricSample] = field(default_factory=list)
    best: SpecConfig | None = None
    timeline: list[TimelineEvent] = field(default_factory=list)

    @property
    def best_sample(self) -> MetricSample | None:
        for s in self.samples:
            if s.config == self.best:
                return s
        return None


# -- windows -------------------------------------------------------------------------


class Window(Protocol):
    def measure(self, rt: SpecRuntime, handler: str) -> WindowStats: ...


@dataclass
class InvocationWindow:
    """`count` invocations produced by `drive(n)`; the warm-up share is not measured."""

    count: int
    drive: Callable[[int], None]
    warmup_fraction: float = DEFAULT_WARMUP_FRACTION

    def __post_init__(self):
        if self.count < 1:
            raise ConfigError("window must contain at least one invocation")
        if not 0 <= self.warmup_fraction < 1:
            raise ConfigError("warmup_fraction must be in [0, 1)")

    def measure(self, rt: SpecRuntime, handler: str) -> WindowStats:
        warmup = int(self.count * self.warmup_fraction)
        if warmup:
            self.drive(warmup)
        before = rt.stats(handler)
        started = time.perf_counter()
        self.drive(self.count - warmup)
        elapsed = time.perf_counter() - started
        return WindowStats.of(rt.stats(handler).since(before), elapsed)


@dataclass
class TimeWindow:
    """A wall-clock window over invocations issued by another thread."""

    seconds: float
    warmup_fraction: float = DEFAULT_WARMUP_FRACTION
    sleep: Callable[[float], None] = time.sleep

    def __post_init__(self):
        if self.seconds <= 0:
            raise ConfigError("window length must be positive")

    def measure(self, rt: SpecRuntime, handler: str) -> WindowStats:
        self.sleep(self.seconds * self.warmup_fraction)
        before = rt.stats(handler)
        started = time.perf_counter()
        self.sleep(self.seconds * (1 - self.warmup_fraction))
        elapsed = time.perf_counter() - started
        return WindowStats.of(rt.stats(handler).since(before), elapsed)


def invocation_clock(rt: SpecRuntime, handler: str) -> Callable[[], float]:
    """Logical time: invocations of `handler` so far."""
    return lambda: float(rt.stats(handler).invocations)


def wall_clock() -> Callable[[], float]:
    started = time.monotonic()
    return lambda: (time.monotonic() - started) * 1000


# -- space and application -------------------------------------------------------------


def spec_space(rt: SpecRuntime) -> SpecSpace:
    if not rt.loaded:
        raise RuntimeStateError("runtime has no module loaded")
    return rt.spec_space()


def apply(rt: SpecRuntime, c: SpecConfig) -> int:
    return rt.specialize(c)


def knob_configs(
    space: SpecSpace, label: str, range_samples: int = 4
) -> list[SpecConfig]:
    """Every constant of a tuning-knob point, unguarded, then the generic config."""
    point = space.point(label)
    match point.kind:
        case EnumKind(values=values):
            candidates = list(values)
        case RangeKind(lo=lo, hi=hi):
            candidates = range_samples_of(lo, hi, range_samples)
        case _:
            raise ConfigError(f"'{label}' is not an enum or range point")
    configs = [SpecConfig({label: Const(v)}, guards={label: False}) for v in candidates]
    return configs + [SpecConfig()]


def fastpath_configs(
    label: str, sizes: Iterable[int] = FASTPATH_SIZES
) -> list[SpecConfig]:
    return [SpecConfig({label: Custom.of(n=n)}) for n in sizes]


def dominant_value(
    profile: ValueProfile | None, fraction: float = DOMINANT_FRACTION
) -> int | None:
    """The profiled value seen in at least `fraction` of the samples, if any."""
    if profile is None or profile.kind != "frequency":
        return None
    total = profile.total
    top = profile.top_n(1)
    if not total or not top:
        return None
    value, count = top[0]
    return value if count >= fraction * total else None


def fastpath_params(rt: SpecRuntime, label: str, n: int) -> Custom:
    """Custom decision for a fast-path point sized to at most `n` profiled keys."""
    space = spec_space(rt)
    if not isinstance(space.point(label).kind, CustomKind):
        raise ConfigError(f"'{label}' is not a custom point")
    profile = space.profiles.get(label)
    if profile is None:
        raise RuntimeStateError(
            f"no profile recorded for '{label}'; instrument it first"
        )
    return Custom.of(n=min(n, len(profile.counts)))


# -- exhaustive exploration ------------------------------------------------------------


def explore_exhaustive(
    rt: SpecRuntime,
    configs: Sequence[SpecConfig],
    metric: Metric,
    window: Window,
    handler: str,
    clock: Callable[[], float] | None = None,
) -> ExplorationReport:
    """Measure one window per config in order and settle on the best.

    Ties go to the config listed first. A config that fails to apply scores
    -inf and is skipped.
    """
    if not configs:
        raise ConfigError("nothing to explore")
    clock = clock or invocation_clock(rt, handler)
    report = ExplorationReport()
    started = TimelineEvent(clock(), "explore-start", detail=f"{len(configs)} configs")
    report.timeline.append(started)
    logger.info("exploring %d configs on '%s'", len(configs), handler)
    best: MetricSample | None = None
    for c in configs:
        start = clock()
        try:
            apply(rt, c)
        except SpecforgeError as err:
            logger.info("config %s failed to apply: %s", c.text or "<generic>", err)
            report.samples.append(MetricSample(start, 0.0, -math.inf, c))
            continue
        report.timeline.append(TimelineEvent(start, "config-switch", c))
        stats = window.measure(rt, handler)
        end = clock()
        sample = MetricSample(start, end - start, metric(stats), c, stats)
        report.samples.append(sample)
        logger.info("config %s: metric %.3f", c.text or "<generic>", sample.metric)
        if best is None or sample.metric > best.metric:
            best = sample
    if best is not None:
        apply(rt, best.config)
        report.best = best.config
        detail = f"metric={best.metric:.3f}"
        report.timeline.append(TimelineEvent(clock(), "settle", best.config, detail))
        logger.info("settled on %s", best.config.text or "<generic>")
    return report


# -- watchdog --------------------------------------------------------------------------


class Watchdog:
    """Fires when the metric drops below (1 - threshold) of the settled level,
    or unconditionally every `interval` time units when one is set."""

    def __init__(
        self,
        threshold: float,
        interval: float | None = None,
        on_trigger: Callable[[float, str], None] | None = None,
    ):
        if not 0 < threshold < 1:
            raise ConfigError("watch threshold must be in (0, 1)")
        self.threshold = threshold
        self.interval = interval
        self.on_trigger = on_trigger
        self.baseline: float | None = None
        self.exploring = False
        self.triggers = 0
        self._last = 0.0
        self._thread: threading.Thread | None = None
        self._stop = threading.Event()

    def settle(self, metric: float, now: float = 0.0):
        if self.baseline is None or metric > self.baseline:
            self.baseline = metric
        self._last = now

    def rearm(self, now: float = 0.0):
        self.baseline = None
        self._last = now

    def observe(self, metric: float, now: float = 0.0) -> bool:
        if self.exploring:
            return False
        reason = None
        if self.baseline is not None and metric < (1 - self.threshold) * self.baseline:
            floor = 1 - self.threshold
            reason = f"metric {metric:.3f} < {floor:.2f} x {self.baseline:.3f}"
        elif self.interval is not None and now - self._last >= self.interval:
            reason = "interval elapsed"
        if reason is None:
            return False
        self.triggers += 1
        self._last = now
        logger.info("watchdog triggered: %s", reason)
        if self.on_trigger is not None:
            self.on_trigger(now, reason)
        return True

    def start(
        self,
        rt: SpecRuntime,
        handler: str,
        metric: Metric,
        window: Window,
        clock: Callable[[], float],
    ):
        """Watch continuously on a background thread until `stop`."""

        def loop():
            while not self._stop.is_set():
                self.observe(metric(window.measure(rt, handler)), clock())

        self._stop.clear()
        self._thread = threading.Thread(
            target=loop, name="specforge-watchdog", daemon=True
        )
        self._thread.start()

    def stop(self):
        self._stop.set()
        if self._thread is not None:
            self._thread.join()
            self._thread = None


def watchdog(
    rt: SpecRuntime,
    threshold: float,
    interval: float | None = None,
    on_trigger: Callable[[float, str], None] | None = None,
) -> Watchdog:
    spec_space(rt)
    return Watchdog(threshold, interval, on_trigger)


# -- adaptive controller ---------------------------------------------------------------

State = Literal["instrument", "explore", "settle", "watch"]


class AdaptiveController:
    """Instrument, explore, settle and watch, one window per step.

    `configs` may be a fixed list or a function of the current space, so that
    candidates can depend on what instrumentation recorded.
    """

    def __init__(
        self,
        rt: SpecRuntime,
        handler: str,
        configs: Sequence[SpecConfig] | Callable[[SpecSpace], Sequence[SpecConfig]],
        metric: Metric,
        window: Window,
        watchdog: Watchdog,
        instrument: SpecConfig | None = None,
        instrument_windows: int = 1,
        settle_windows: int = 3,
        clock: Callable[[], float] | None = None,
    ):
        self.rt = rt
        self.handler = handler
        self.configs = configs
        self.metric = metric
        self.window = window
        self.watchdog = watchdog
        self.instrument = instrument
        self.instrument_windows = instrument_windows
        self.settle_windows = max(1, settle_windows)
        self.clock = clock or invocation_clock(rt, handler)
        self.state: State = "instrument" if instrument is not None else "explore"
        self.samples: list[MetricSample] = []
        self.timeline: list[TimelineEvent] = []
        self.reports: list[ExplorationReport] = []
        self.current: SpecConfig = SpecConfig()
        self._remaining = 0

    @property
    def rounds(self) -> int:
        return len(self.reports)

    def _measure(self) -> MetricSample:
        start = self.clock()
        stats = self.window.measure(self.rt, self.handler)
        elapsed = self.clock() - start
        sample = MetricSample(start, elapsed, self.metric(stats), self.current, stats)
        self.samples.append(sample)
        return sample

    def step(self):
        match self.state:
            case "instrument":
                if self._remaining == 0:
                    event = TimelineEvent(
                        self.clock(), "instrument-start", self.instrument
                    )
                    self.timeline.append(event)
                    apply(self.rt, self.instrument)
                    self.current = self.instrument
                    self._remaining = self.instrument_windows
                self._measure()
                self._remaining -= 1
                if self._remaining == 0:
                    self.state = "explore"
            case "explore":
                self.watchdog.exploring = True
                try:
                    configs = self.configs
                    if callable(configs):
                        configs = configs(spec_space(self.rt))
                    report = explore_exhaustive(
                        self.rt,
                        configs,
                        self.metric,
                        self.window,
                        self.handler,
                        self.clock,
                    )
                finally:
                    self.watchdog.exploring = False
                self.reports.append(report)
                self.timeline.extend(report.timeline)
                self.samples.extend(report.samples)
                self.current = report.best if report.best is not None else SpecConfig()
                self.watchdog.rearm(self.clock())
                self.state = "settle"
                self._remaining = self.settle_windows
            case "settle":
                sample = self._measure()
                self.watchdog.settle(sample.metric, sample.window_start)
                self._remaining -= 1
                if self._remaining == 0:
                    self.state = "watch"
            case "watch":
                sample = self._measure()
                if self.watchdog.observe(sample.metric, self.clock()):
                    now = self.clock()
                    event = TimelineEvent(now, "re-explore-trigger", self.current)
                    self.timeline.append(event)
                    has_instrument = self.instrument is not None
                    self.state = "instrument" if has_instrument else "explore"

    def run(self, done: Callable[[], bool], max_steps: int | None = None):
        steps = 0
        while not done() and (max_steps is None or steps < max_steps):
            self.step()
            steps += 1

    def run_live(self, done: Callable[[], bool], poll: float = 0.01):
        """Run the controller on its own thread while invocations go on elsewhere."""
        thread = threading.Thread(
            target=self.run, args=(done,), name="specforge-policy", daemon=True
        )
        thread.start()
        while thread.is_alive():
            thread.join(poll)

