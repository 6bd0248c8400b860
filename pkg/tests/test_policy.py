"""Tests for exploration, the watchdog and the adaptive controller."""

import math
import threading

import pytest

from specforge.casestudies import build_mmul, build_simplebench
from specforge.engine import SpecRuntime
from specforge.errors import ConfigError, RuntimeStateError
from specforge.instrument import ValueProfile
from specforge.interpreter import HostState
from specforge.ir_text import parse_module
from specforge.policy import (
    AdaptiveController,
    InvocationWindow,
    TimeWindow,
    Watchdog,
    WindowStats,
    apply,
    dominant_value,
    events_throughput,
    explore_exhaustive,
    fastpath_configs,
    knob_configs,
    ops_throughput,
    spec_space,
    wall_throughput,
    watchdog,
)
from specforge.spec_model import Const, SpecConfig, collect_spec_points

SUM_SOURCE = """
(fn f (x:int) -> int
  (block
    (let k (spec-enum K x 1 2 3))
    (let acc 0)
    (for i 0 k 1 (assign acc (add acc i)))
    (return acc)))
"""

K = {v: SpecConfig({"K": Const(v)}) for v in (1, 2, 3)}


class Workload:
    """Invokes `f` with the current phase value."""

    def __init__(self, rt, value=3):
        self.rt = rt
        self.value = value

    def __call__(self, n):
        for _ in range(n):
            self.rt.invoke("f", [self.value])


@pytest.fixture
def sum_runtime(backend):
    return SpecRuntime(backend=backend).load(parse_module(SUM_SOURCE), HostState())


def test_metrics():
    w = WindowStats(
        invocations=10,
        ops_executed=1000,
        events=40,
        guard_failures=0,
        specialized_hits=10,
        elapsed_s=0.5,
    )
    assert ops_throughput(w) == 10_000
    assert events_throughput(w) == 40_000
    assert wall_throughput(w) == 20
    idle = WindowStats(0, 0, 0, 0, 0, 0.0)
    assert ops_throughput(idle) == events_throughput(idle) == 0.0
    assert wall_throughput(idle) == 0.0


def test_window_validation():
    with pytest.raises(ConfigError):
        InvocationWindow(0, lambda n: None)
    with pytest.raises(ConfigError):
        InvocationWindow(10, lambda n: None, warmup_fraction=1.0)
    with pytest.raises(ConfigError):
        TimeWindow(0)


def test_invocation_window_skips_warmup(sum_runtime):
    drive = Workload(sum_runtime)
    stats = InvocationWindow(20, drive).measure(sum_runtime, "f")
    assert stats.invocations == 18
    assert sum_runtime.stats("f").invocations == 20


def test_time_window_sleeps_through_warmup(sum_runtime):
    slept = []
    window = TimeWindow(2.0, warmup_fraction=0.25, sleep=slept.append)
    stats = window.measure(sum_runtime, "f")
    assert slept == [0.5, 1.5]
    assert stats.invocations == 0


def test_explore_settles_on_the_best_config(sum_runtime):
    rt = sum_runtime
    configs = [SpecConfig(), K[1], K[2], K[3]]
    window = InvocationWindow(10, Workload(rt))
    report = explore_exhaustive(rt, configs, ops_throughput, window, "f")
    assert report.best == K[3]
    assert [s.config for s in report.samples] == configs
    assert [s.window_start for s in report.samples] == [0, 10, 20, 30]
    assert all(s.window_len == 10 for s in report.samples)
    # guard failures cost more than staying generic
    generic, fail_1, fail_2, best = (s.metric for s in report.samples)
    assert fail_1 < generic and fail_2 < generic < best
    assert report.best_sample.metric == best
    assert rt.active_version("f").config_id == K[3].config_id
    events = ["explore-start"] + ["config-switch"] * 4 + ["settle"]
    assert [e.event for e in report.timeline] == events


def test_ties_go_to_the_first_config(sum_runtime):
    rt = sum_runtime
    window = InvocationWindow(5, Workload(rt))
    report = explore_exhaustive(rt, [K[2], K[3]], lambda w: 1.0, window, "f")
    assert report.best == K[2]


def test_configs_that_fail_to_apply_are_skipped(sum_runtime):
    rt = sum_runtime
    bad = SpecConfig({"missing": Const(1)})
    window = InvocationWindow(5, Workload(rt))
    report = explore_exhaustive(rt, [bad, K[3]], ops_throughput, window, "f")
    assert report.samples[0].metric == -math.inf
    assert report.samples[0].stats is None
    assert report.best == K[3]


def test_explore_needs_configs(sum_runtime):
    with pytest.raises(ConfigError, match="nothing to explore"):
        window = InvocationWindow(5, Workload(sum_runtime))
        explore_exhaustive(sum_runtime, [], ops_throughput, window, "f")


def test_spec_space_needs_a_module():
    with pytest.raises(RuntimeStateError):
        spec_space(SpecRuntime())
    with pytest.raises(RuntimeStateError):
        watchdog(SpecRuntime(), 0.1)


def test_apply_installs_a_version(sum_runtime):
    version = apply(sum_runtime, K[2])
    assert sum_runtime.active_version("f").version_id == version
    assert spec_space(sum_runtime).labels == ("K",)


def test_knob_configs():
    space = collect_spec_points(build_simplebench())
    configs = knob_configs(space, "g_b")
    assert [c.text for c in configs] == ["g_b=1", "g_b=22", "g_b=43", "g_b=64", ""]
    assert not configs[0].guard_enabled("g_b")
    assert len(knob_configs(collect_spec_points(build_mmul()), "B")) == 7
    with pytest.raises(ConfigError, match="not an enum or range point"):
        knob_configs(space, "f_a")


def test_fastpath_configs():
    texts = [c.text for c in fastpath_configs("fp", (0, 4))]
    assert texts == ["fp=custom(n=0)", "fp=custom(n=4)"]
    assert len(fastpath_configs("fp")) == 6


@pytest.mark.parametrize(
    "values, expected",
    [
        ([5] * 8 + [1, 2], 5),
        ([5] * 7 + [1, 2, 3], 5),
        ([5] * 6 + [1, 2, 3, 4], None),
        ([], None),
    ],
)
def test_dominant_value(values, expected):
    p = ValueProfile.frequency()
    for v in values:
        p.record(v)
    assert dominant_value(p) == expected


def test_dominant_value_ignores_histograms():
    h = ValueProfile.histogram(0, 9)
    h.record(3)
    assert dominant_value(h) is None
    assert dominant_value(None) is None


def test_watchdog_threshold():
    fired = []
    dog = Watchdog(0.1, on_trigger=lambda now, reason: fired.append((now, reason)))
    assert not dog.observe(1.0)
    dog.settle(100.0)
    dog.settle(80.0)
    assert dog.baseline == 100.0
    assert not dog.observe(95.0, now=1)
    assert dog.observe(80.0, now=2)
    assert dog.triggers == 1
    assert fired[0][0] == 2
    assert "0.90" in fired[0][1]


def test_watchdog_is_quiet_while_exploring():
    dog = Watchdog(0.1)
    dog.settle(100.0)
    dog.exploring = True
    assert not dog.observe(1.0)
    dog.exploring = False
    dog.rearm()
    assert dog.baseline is None
    assert not dog.observe(1.0)


def test_watchdog_interval():
    dog = Watchdog(0.5, interval=10)
    dog.settle(100.0, now=0)
    assert not dog.observe(100.0, now=5)
    assert dog.observe(100.0, now=10)
    assert not dog.observe(100.0, now=15)
    assert dog.observe(100.0, now=20)


@pytest.mark.parametrize("threshold", [0, 1, -0.5, 1.5])
def test_watchdog_threshold_range(threshold):
    with pytest.raises(ConfigError):
        Watchdog(threshold)


def test_watchdog_thread(sum_runtime):
    rt = sum_runtime
    triggered = threading.Event()
    dog = watchdog(rt, 0.5, interval=1, on_trigger=lambda now, reason: triggered.set())
    clock = iter(range(10_000)).__next__
    window = InvocationWindow(5, Workload(rt))
    dog.start(rt, "f", ops_throughput, window, lambda: float(clock()))
    assert triggered.wait(5)
    dog.stop()
    assert dog.triggers >= 1


def make_controller(rt, drive, **kwargs):
    def candidates(space):
        value = dominant_value(space.profiles.get("K"))
        if value is None:
            return [SpecConfig()]
        return [SpecConfig({"K": Const(value)}), SpecConfig()]

    return AdaptiveController(
        rt,
        "f",
        candidates,
        ops_throughput,
        InvocationWindow(10, drive),
        Watchdog(0.2),
        instrument=SpecConfig(instrument={"K": 1}),
        settle_windows=2,
        **kwargs,
    )


def test_controller_adapts_to_a_phase_change(sum_runtime):
    rt = sum_runtime
    drive = Workload(rt, value=3)
    ctrl = make_controller(rt, drive)
    assert ctrl.state == "instrument"
    ctrl.step()
    assert ctrl.state == "explore"
    assert rt.spec_space().profiles["K"].counts == {3: 10}
    ctrl.step()
    assert ctrl.state == "settle"
    assert ctrl.current == K[3]
    ctrl.step()
    ctrl.step()
    assert ctrl.state == "watch"
    ctrl.step()
    assert ctrl.state == "watch"

    drive.value = 1
    ctrl.step()
    assert ctrl.state == "instrument"
    ctrl.step()
    assert rt.spec_space().profiles["K"].counts == {1: 10}
    ctrl.step()
    assert ctrl.current == K[1]
    assert ctrl.rounds == 2
    events = [e.event for e in ctrl.timeline]
    assert events.count("instrument-start") == 2
    assert events.count("re-explore-trigger") == 1
    assert rt.active_version("f").config_id == K[1].config_id


def test_controller_without_instrumentation(sum_runtime):
    rt = sum_runtime
    ctrl = AdaptiveController(
        rt,
        "f",
        [SpecConfig(), K[3]],
        ops_throughput,
        InvocationWindow(10, Workload(rt)),
        Watchdog(0.2),
    )
    assert ctrl.state == "explore"
    ctrl.run(lambda: False, max_steps=4)
    assert ctrl.state == "watch"
    assert ctrl.current == K[3]
    assert len(ctrl.samples) == 2 + 3


def test_controller_runs_live(sum_runtime):
    rt = sum_runtime
    ctrl = make_controller(rt, Workload(rt))
    ctrl.run_live(lambda: ctrl.rounds >= 1)
    assert ctrl.current == K[3]
