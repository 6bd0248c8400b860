import csv
import io
import logging
import threading
from collections.abc import Callable, Iterable
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Literal, NamedTuple, get_args

from pydantic import BaseModel, ConfigDict, ValidationError

from .casestudies import (
    Bench,
    BatchBench,
    LpmBench,
    MmulBench,
    SimpleBench,
    WorkloadDriver,
    WorkloadPhase,
    load_phases,
    random_rules,
    validation_details,
)
from .constants import CSV_HEADER
from .custom_specs import LpmRule
from .engine import SpecRuntime
from .errors import ConfigError, SpecforgeError
from .ir_text import print_module
from .optimizer import PassPipeline
from .policy import (
    AdaptiveController,
    ExplorationReport,
    InvocationWindow,
    MetricSample,
    TimelineEvent,
    TimeWindow,
    Watchdog,
    Window,
    WindowStats,
    apply,
    explore_exhaustive,
    invocation_clock,
    wall_clock,
)
from .settings import Settings
from .spec_model import Const, Custom, SpecConfig, parse_config
from .utils import atomic_write_text

logger = logging.getLogger(__name__)

BenchName = Literal["mmul", "lpm", "simple", "batch"]
SimpleMode = Literal["generic", "guard-pass", "guard-fail", "no-guard", "instrument"]
SIMPLE_MODES: tuple[str, ...] = get_args(SimpleMode)
GENERIC_TEXT = "generic"


class RunOptions(NamedTuple):
    """Flags shared by bench, explore and adapt."""

    seed: int = 0
    duration: int | None = None
    config: str | None = None
    passes: PassPipeline | None = None
    phases_text: str | None = None
    sample_every: int | None = None
    guard: bool = True
    watch_threshold: float | None = None
    deterministic: bool = True


class BenchResult(NamedTuple):
    """Result of a fixed-configuration run."""

    success: bool
    message: str
    rows: tuple["CsvRow", ...] = ()


class ExploreResult(NamedTuple):
    success: bool
    message: str
    rows: tuple["CsvRow", ...] = ()
    report: ExplorationReport | None = None


class AdaptResult(NamedTuple):
    success: bool
    message: str
    rows: tuple["CsvRow", ...] = ()
    rounds: int = 0
    triggers: int = 0


class DumpResult(NamedTuple):
    success: bool
    message: str
    text: str = ""


# -- CSV -------------------------------------------------------------------------------


class CsvRow(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    time_ms: float
    handler: str
    config_id: str = ""
    config: str = ""
    phase: int = 1
    event: str
    metric: float | None = None
    invocations: int = 0
    ops_executed: int = 0
    guard_failures: int = 0

    def cells(self, deterministic: bool) -> list[str]:
        time_ms = f"{self.time_ms:.0f}" if deterministic else f"{self.time_ms:.3f}"
        metric = "" if self.metric is None else f"{self.metric:.6f}"
        return [
            time_ms,
            self.handler,
            self.config_id,
            self.config,
            str(self.phase),
            self.event,
            metric,
            str(self.invocations),
            str(self.ops_executed),
            str(self.guard_failures),
        ]


def config_text(c: SpecConfig | None) -> str:
    if c is None:
        return ""
    return c.text or GENERIC_TEXT


def sample_row(
    s: MetricSample, handler: str, phase: int, event: str = "window"
) -> CsvRow:
    stats = s.stats or WindowStats(0, 0, 0, 0, 0, 0.0)
    return CsvRow(
        time_ms=s.window_start,
        handler=handler,
        config_id=s.config_id,
        config=config_text(s.config),
        phase=phase,
        event=event,
        metric=s.metric,
        invocations=stats.invocations,
        ops_executed=stats.ops_executed,
        guard_failures=stats.guard_failures,
    )


def event_row(e: TimelineEvent, handler: str, phase: int) -> CsvRow:
    return CsvRow(
        time_ms=e.time,
        handler=handler,
        config_id=e.config.config_id if e.config is not None else "",
        config=config_text(e.config),
        phase=phase,
        event=e.event,
    )


def render_csv(rows: Iterable[CsvRow], deterministic: bool) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row.cells(deterministic))
    return buf.getvalue()


def write_csv(rows: Iterable[CsvRow], path: Path, deterministic: bool) -> Path:
    return atomic_write_text(path, render_csv(rows, deterministic))


# -- scenario set-up -------------------------------------------------------------------


def make_bench(
    settings: Settings,
    name: BenchName,
    seed: int = 0,
    variant: str = "fp",
    rules: list[LpmRule] | None = None,
    table_size: int | None = None,
    handler: str = "f",
) -> Bench:
    benches = settings.benches
    match name:
        case "mmul":
            return MmulBench(benches)
        case "lpm":
            if rules is None:
                size = table_size if table_size is not None else benches.lpm_rules
                rules = random_rules(size, seed=seed)
            return LpmBench(benches, variant, rules)
        case "simple":
            return SimpleBench(benches, handler)
        case "batch":
            return BatchBench(benches)
    raise ConfigError(f"unknown bench '{name}'")


def make_runtime(settings: Settings, passes: PassPipeline | None = None) -> SpecRuntime:
    engine = settings.engine
    base = passes if passes is not None else PassPipeline.parse(engine.passes)
    pipeline = replace(
        base, unroll_max_factor=engine.unroll_max_factor, max_growth=engine.max_growth
    )
    return SpecRuntime(
        backend=engine.backend,
        pipeline=pipeline,
        profile_capacity=settings.instrument.capacity,
        histogram_max_buckets=settings.instrument.histogram_max_buckets,
    )


def resolve_phases(
    bench: Bench,
    opts: RunOptions,
    overrides: dict | None = None,
    adapt: bool = False,
) -> list[WorkloadPhase]:
    """Phases from the phase file or the bench defaults, with command-line overrides.

    Fields a phase file sets explicitly win over flags; seeds count up from
    ``opts.seed`` per phase.
    """
    from_file = opts.phases_text is not None
    if from_file:
        phases = load_phases(opts.phases_text, bench.phase_model)
    else:
        phases = bench.adapt_phases() if adapt else [bench.default_phase()]
    resolved = []
    for i, phase in enumerate(phases):
        explicit = phase.model_fields_set if from_file else set()
        update = {
            k: v
            for k, v in (overrides or {}).items()
            if v is not None and k not in explicit
        }
        if "seed" not in explicit:
            update["seed"] = opts.seed + i
        if opts.duration is not None and "duration" not in explicit:
            update["duration"] = opts.duration
        try:
            fields = {**phase.model_dump(), **update}
            resolved.append(type(phase).model_validate(fields))
        except ValidationError as err:
            details = validation_details(err)
            raise ConfigError(f"phase {i + 1}: {details}") from None
    return resolved


@dataclass
class Scenario:
    """A loaded runtime with its bench, workload driver and clock."""

    settings: Settings
    bench: Bench
    rt: SpecRuntime
    driver: WorkloadDriver
    clock: Callable[[], float]
    deterministic: bool

    @property
    def handler(self) -> str:
        return self.bench.handler

    @property
    def every_k(self) -> int:
        return self.settings.instrument.sample_every

    def window(self, warmup: bool = True, driven: bool = False) -> Window:
        """Invocation windows drive the workload; timed windows watch another thread."""
        exploration = self.settings.exploration
        fraction = exploration.warmup_fraction if warmup else 0.0
        if self.deterministic or driven:
            return InvocationWindow(exploration.window, self.driver.drive, fraction)
        return TimeWindow(exploration.window_seconds, fraction)

    def measure(self, window: Window, config: SpecConfig) -> MetricSample:
        start = self.clock()
        stats = window.measure(self.rt, self.handler)
        elapsed = self.clock() - start
        return MetricSample(start, elapsed, self.bench.metric(stats), config, stats)

    def phase_at(self, t: float) -> int:
        return self.driver.phase_at(t)

    def sample_row(self, s: MetricSample, event: str = "window") -> CsvRow:
        return sample_row(s, self.handler, self.phase_at(s.window_start), event)

    def event_row(self, e: TimelineEvent) -> CsvRow:
        return event_row(e, self.handler, self.phase_at(e.time))


def prepare(
    settings: Settings, bench: Bench, phases: list[WorkloadPhase], opts: RunOptions
) -> Scenario:
    rt = make_runtime(settings, opts.passes)
    rt.load(bench.module(), bench.host(phases[0]))
    bench.setup(rt)
    clock = invocation_clock(rt, bench.handler) if opts.deterministic else wall_clock()
    driver = WorkloadDriver(rt, bench, phases, clock)
    return Scenario(settings, bench, rt, driver, clock, opts.deterministic)


def resolve_config(
    scenario: Scenario,
    text: str | None,
    guard: bool = True,
    default: SpecConfig | None = None,
) -> SpecConfig:
    """Parse ``--config`` against the loaded space; raises ConfigError."""
    if text is None:
        config = default if default is not None else SpecConfig()
        return config if guard else config.with_guards(False)
    config = parse_config(text, scenario.rt.spec_space(), default_guard=guard)
    return scenario.bench.complete(config)


class ProcessingLoop:
    """Runs the workload on its own thread until it is exhausted or stopped."""

    def __init__(self, driver: WorkloadDriver, chunk: int = 16):
        self.driver = driver
        self.chunk = chunk
        self.error: BaseException | None = None
        self._thread = threading.Thread(
            target=self._run, name="specforge-processing", daemon=True
        )

    def _run(self):
        try:
            while not self.driver.exhausted:
                self.driver.drive(self.chunk)
        except BaseException as err:
            self.error = err
            self.driver.stop()

    def __enter__(self) -> "ProcessingLoop":
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self.driver.stop()
        self._thread.join()
        if self.error is not None and exc[0] is None:
            raise self.error


def _instrument(
    scenario: Scenario, every_k: int
) -> tuple[list[CsvRow], SpecConfig | None]:
    """Run the instrumentation windows; returns their rows and the config used."""
    config = scenario.bench.instrument_config(every_k)
    if config is None:
        return [], None
    event = TimelineEvent(scenario.clock(), "instrument-start", config)
    apply(scenario.rt, config)
    rows = [scenario.event_row(event)]
    window = scenario.window(warmup=False)
    for _ in range(scenario.settings.exploration.instrument_windows):
        sample = scenario.measure(window, config)
        rows.append(scenario.sample_row(sample))
    return rows, config


def _sorted(rows: list[CsvRow]) -> tuple[CsvRow, ...]:
    return tuple(sorted(rows, key=lambda r: r.time_ms))


def _describe(c: SpecConfig | None) -> str:
    return config_text(c) or GENERIC_TEXT


# -- operations ------------------------------------------------------------------------


def simple_mode_config(
    bench: SimpleBench, mode: SimpleMode, value: int, every_k: int
) -> tuple[SpecConfig, dict]:
    """Config and phase overrides of a SimpleBench cost mode."""
    label = bench.label
    dominant = {"dominant_fraction": 1.0, "value": value}
    rare = {"dominant_fraction": 0.0, "value": value}
    match mode:
        case "generic":
            return SpecConfig(), dominant
        case "guard-pass":
            return SpecConfig({label: Const(value)}), dominant
        case "guard-fail":
            return SpecConfig({label: Const(value)}), rare
        case "no-guard":
            return SpecConfig({label: Const(value)}, guards={label: False}), dominant
        case "instrument":
            return bench.instrument_config(every_k), dominant
    raise ConfigError(f"unknown mode '{mode}' (choose from {', '.join(SIMPLE_MODES)})")


def run_bench(
    scenario: Scenario, config: SpecConfig, sample_every: int | None = None
) -> BenchResult:
    """Run the workload to completion under one configuration.

    Configurations with custom decisions, or an explicit sampling interval,
    start with an instrumentation phase so generators see a profile.
    """
    rt = scenario.rt
    rows: list[CsvRow] = []
    try:
        needs_profile = any(isinstance(d, Custom) for d in config.decisions.values())
        if (needs_profile or sample_every is not None) and not config.instrument:
            instrument_rows, _ = _instrument(scenario, sample_every or scenario.every_k)
            rows.extend(instrument_rows)
        switch = TimelineEvent(scenario.clock(), "config-switch", config)
        apply(rt, config)
        rows.append(scenario.event_row(switch))
        window = scenario.window(warmup=False, driven=True)
        invocations = ops = 0
        while not scenario.driver.exhausted:
            sample = scenario.measure(window, config)
            if not sample.stats.invocations:
                break
            invocations += sample.stats.invocations
            ops += sample.stats.ops_executed
            rows.append(scenario.sample_row(sample))
    except SpecforgeError as err:
        return BenchResult(False, f"{scenario.bench.name}: {err}", _sorted(rows))
    per_call = ops / invocations if invocations else 0.0
    message = (
        f"{scenario.bench.name}: {invocations} invocations under {_describe(config)}, "
        f"{per_call:.1f} ops per invocation"
    )
    return BenchResult(True, message, _sorted(rows))


def _explore_once(
    scenario: Scenario, guard: bool
) -> tuple[list[CsvRow], ExplorationReport]:
    rows, _ = _instrument(scenario, scenario.every_k)
    bench = scenario.bench
    range_samples = scenario.settings.exploration.range_samples
    space = scenario.rt.spec_space()
    configs = [bench.complete(c) for c in bench.configs(space, range_samples)]
    if not guard:
        configs = [c.with_guards(False) for c in configs]
    report = explore_exhaustive(
        scenario.rt,
        configs,
        bench.metric,
        scenario.window(),
        scenario.handler,
        scenario.clock,
    )
    return rows, report


def run_explore(scenario: Scenario, guard: bool = True) -> ExploreResult:
    """Explore the bench's candidate configurations once and settle on the best."""
    handler = scenario.handler
    try:
        if scenario.deterministic:
            rows, report = _explore_once(scenario, guard)
        else:
            with ProcessingLoop(scenario.driver):
                rows, report = _explore_once(scenario, guard)
    except SpecforgeError as err:
        return ExploreResult(False, f"{scenario.bench.name}: {err}")
    rows += [scenario.event_row(e) for e in report.timeline]
    rows += [scenario.sample_row(s) for s in report.samples]
    best = report.best_sample
    if best is not None:
        rows.append(scenario.sample_row(best, event="best"))
    explored = len(report.samples)
    message = f"{scenario.bench.name}: explored {explored} configs on '{handler}'"
    if best is not None:
        message += f", best {_describe(best.config)} (metric {best.metric:.3f})"
    return ExploreResult(True, message, _sorted(rows), report)


def run_adapt(
    scenario: Scenario, threshold: float | None = None, guard: bool = True
) -> AdaptResult:
    """Instrument, explore, settle and watch until the workload is exhausted."""
    bench, handler = scenario.bench, scenario.handler
    exploration = scenario.settings.exploration

    def candidates(space):
        configs = bench.configs(space, exploration.range_samples)
        configs = [bench.complete(c) for c in configs]
        return configs if guard else [c.with_guards(False) for c in configs]

    if threshold is None:
        threshold = exploration.watch_threshold
    watchdog = Watchdog(threshold, exploration.watch_interval)
    controller = AdaptiveController(
        scenario.rt,
        handler,
        candidates,
        bench.metric,
        scenario.window(),
        watchdog,
        instrument=bench.instrument_config(scenario.every_k),
        instrument_windows=exploration.instrument_windows,
        settle_windows=exploration.settle_windows,
        clock=scenario.clock,
    )

    def done() -> bool:
        return scenario.driver.exhausted

    try:
        if scenario.deterministic:
            controller.run(done)
        else:
            with ProcessingLoop(scenario.driver):
                controller.run_live(done)
    except SpecforgeError as err:
        return AdaptResult(False, f"{bench.name}: {err}")
    rows = [scenario.event_row(e) for e in controller.timeline]
    rows += [scenario.sample_row(s) for s in controller.samples]
    settled = [r.best for r in controller.reports if r.best is not None]
    settled_text = ", ".join(_describe(c) for c in settled) or GENERIC_TEXT
    rounds, triggers = controller.rounds, watchdog.triggers
    message = (
        f"{bench.name}: {len(scenario.driver.phases)} phases, "
        f"{rounds} exploration rounds, {triggers} re-explorations; "
        f"settled on {settled_text}"
    )
    return AdaptResult(True, message, _sorted(rows), rounds, triggers)


def specialized_ir(
    settings: Settings,
    bench: Bench,
    config: str | None,
    passes: PassPipeline | None = None,
    guard: bool = True,
) -> DumpResult:
    """Specialize and optimize the bench's module without running it.

    Invalid decisions in `config` raise ConfigError.
    """
    try:
        rt = make_runtime(settings, passes)
        rt.load(bench.module(), bench.host(bench.default_phase()))
        bench.setup(rt)
    except SpecforgeError as err:
        return DumpResult(False, f"{bench.name}: {err}")
    c = SpecConfig()
    if config is not None:
        c = bench.complete(parse_config(config, rt.spec_space(), default_guard=guard))
    try:
        sm = rt.build(c)
    except SpecforgeError as err:
        return DumpResult(False, f"{bench.name}: {err}")
    return DumpResult(True, f"{bench.name}: {_describe(c)}", print_module(sm.module))
