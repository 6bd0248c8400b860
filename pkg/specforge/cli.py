import json
from enum import Enum
from pathlib import Path
from typing import Annotated

import typer
from pydantic import ValidationError

from .casestudies import Bench
from .constants import PROG_NAME, SETTINGS_PATH_ENV_VAR
from .core import (
    AdaptResult,
    BenchResult,
    ExploreResult,
    RunOptions,
    Scenario,
    make_bench,
    prepare,
    render_csv,
    resolve_config,
    resolve_phases,
    run_adapt,
    run_bench,
    run_explore,
    simple_mode_config,
    specialized_ir,
    write_csv,
)
from .custom_types import (
    ConfigText,
    ConfigTextParser,
    PassesParser,
    PhasesFile,
    PhasesFileParser,
    RulesFile,
    RulesFileParser,
)
from .errors import ConfigError, SpecforgeError
from .optimizer import PassPipeline
from .settings import Settings, default_settings_path
from .spec_model import SpecConfig
from .utils import configure_logging
from .validation import validate_bench_flags

app = typer.Typer(
    name=PROG_NAME,
    help="Workload-guided specialization of handler code",
    no_args_is_help=True,
    pretty_exceptions_enable=False,
)


def success(msg: str, err: bool = False):
    typer.secho(msg, fg=typer.colors.GREEN, err=err)


def error(msg: str):
    typer.secho(f"Error: {msg}", err=True, fg=typer.colors.RED)


@app.callback()
def main(
    ctx: typer.Context,
    settings_path: Annotated[
        Path | None,
        typer.Option(
            "--settings-path",
            "-s",
            help=f"Path to settings file (or use env {SETTINGS_PATH_ENV_VAR} env var)",
            envvar=SETTINGS_PATH_ENV_VAR,
            default_factory=default_settings_path,
        ),
    ],
):
    """Specialize handlers for the workload they see."""
    configure_logging()
    try:
        settings = Settings.from_file(settings_path)
    except (ConfigError, ValidationError) as err:
        error(f"invalid settings file {settings_path}: {err}")
        raise typer.Exit(1)
    ctx.ensure_object(dict)
    ctx.obj["settings"] = settings


class BenchKind(str, Enum):
    mmul = "mmul"
    lpm = "lpm"
    simple = "simple"
    batch = "batch"


class LpmVariantChoice(str, Enum):
    none = "none"
    fp = "fp"
    ni = "ni"
    ni_fp = "ni-fp"


class SimpleModeChoice(str, Enum):
    generic = "generic"
    guard_pass = "guard-pass"
    guard_fail = "guard-fail"
    no_guard = "no-guard"
    instrument = "instrument"


class LpmWorkloadChoice(str, Enum):
    a = "A"
    b = "B"
    zipf = "zipf"
    hitrate = "hitrate"


class SimpleHandlerChoice(str, Enum):
    f = "f"
    g = "g"


BenchArg = Annotated[BenchKind, typer.Argument(help="Benchmark scenario")]
SeedOpt = Annotated[
    int, typer.Option("--seed", help="Seed of rules and workload phases")
]
DurationOpt = Annotated[
    int | None, typer.Option("--duration", min=1, help="Invocations per phase")
]
ConfigOpt = Annotated[
    ConfigText | None,
    typer.Option(
        "--config",
        help="Decisions, e.g. 'B=8;NmB=assume' or 'fp=on'",
        click_type=ConfigTextParser(),
    ),
]
PassesOpt = Annotated[
    PassPipeline | None,
    typer.Option(
        "--passes",
        help="'default', 'none' or a comma separated pass list",
        click_type=PassesParser(),
    ),
]
CsvOpt = Annotated[
    Path | None,
    typer.Option("--csv", help="Write metrics to this CSV file instead of stdout"),
]
RulesOpt = Annotated[
    RulesFile | None,
    typer.Option(
        "--rules",
        help="LPM rule file, one 'A.B.C.D/len value' per line",
        click_type=RulesFileParser(),
    ),
]
PhasesOpt = Annotated[
    PhasesFile | None,
    typer.Option(
        "--phases",
        help="Phase parameter file: key=value lines, '---' between phases",
        click_type=PhasesFileParser(),
    ),
]
SampleEveryOpt = Annotated[
    int | None,
    typer.Option("--sample-every", min=1, help="Sampling interval k of taps"),
]
GuardOpt = Annotated[
    bool, typer.Option("--guard/--no-guard", help="Guard specialized values")
]
WatchThresholdOpt = Annotated[
    float | None,
    typer.Option(
        "--watch-threshold",
        help="Relative metric drop that triggers re-exploration",
    ),
]
DeterministicOpt = Annotated[
    bool,
    typer.Option(
        "--deterministic",
        help="Measure in invocations on one thread instead of wall-clock time",
    ),
]
VariantOpt = Annotated[
    LpmVariantChoice | None,
    typer.Option("--variant", help="LPM variant (default fp)"),
]
TableSizeOpt = Annotated[
    int | None,
    typer.Option("--table-size", min=0, help="Random LPM rules to generate"),
]


def _lpm_flags(variant, table_size, rules) -> dict:
    return {"--variant": variant, "--table-size": table_size, "--rules": rules}


def _with_sample_every(settings: Settings, sample_every: int | None) -> Settings:
    if sample_every is None:
        return settings
    instrument = settings.instrument.model_copy(update={"sample_every": sample_every})
    return settings.model_copy(update={"instrument": instrument})


def _options(
    seed: int,
    duration: int | None,
    config: ConfigText | None,
    passes: PassPipeline | None,
    phases: PhasesFile | None,
    sample_every: int | None,
    guard: bool,
    watch_threshold: float | None,
    deterministic: bool,
) -> RunOptions:
    if watch_threshold is not None and not 0 < watch_threshold < 1:
        raise typer.BadParameter(
            "must be between 0 and 1 (exclusive)", param_hint="'--watch-threshold'"
        )
    return RunOptions(
        seed=seed,
        duration=duration,
        config=config.text if config is not None else None,
        passes=passes,
        phases_text=phases.text if phases is not None else None,
        sample_every=sample_every,
        guard=guard,
        watch_threshold=watch_threshold,
        deterministic=deterministic,
    )


def _bench(
    settings: Settings,
    name: BenchKind,
    opts: RunOptions,
    variant: LpmVariantChoice | None = None,
    rules: RulesFile | None = None,
    table_size: int | None = None,
    handler: SimpleHandlerChoice | None = None,
) -> Bench:
    try:
        return make_bench(
            settings,
            name.value,
            seed=opts.seed,
            variant=variant.value if variant is not None else "fp",
            rules=rules.rules if rules is not None else None,
            table_size=table_size,
            handler=handler.value if handler is not None else "f",
        )
    except SpecforgeError as err:
        error(str(err))
        raise typer.Exit(1)


def _scenario(
    settings: Settings,
    bench: Bench,
    opts: RunOptions,
    overrides: dict | None = None,
    adapt: bool = False,
) -> Scenario:
    try:
        phases = resolve_phases(bench, opts, overrides, adapt)
    except ConfigError as err:
        raise typer.BadParameter(str(err), param_hint="'--phases'")
    try:
        return prepare(settings, bench, phases, opts)
    except SpecforgeError as err:
        error(f"{bench.name}: {err}")
        raise typer.Exit(1)


def _config(
    scenario: Scenario, opts: RunOptions, default: SpecConfig | None = None
) -> SpecConfig:
    try:
        return resolve_config(scenario, opts.config, opts.guard, default)
    except ConfigError as err:
        raise typer.BadParameter(str(err), param_hint="'--config'")


def _finish(
    result: BenchResult | ExploreResult | AdaptResult,
    csv_path: Path | None,
    deterministic: bool,
):
    if not result.success:
        error(result.message)
        raise typer.Exit(1)
    if csv_path is not None:
        write_csv(result.rows, csv_path, deterministic)
        success(f"{result.message}\nWrote {len(result.rows)} rows to {csv_path}")
    else:
        typer.echo(render_csv(result.rows, deterministic), nl=False)
        success(result.message, err=True)


@app.command()
def bench(
    ctx: typer.Context,
    name: BenchArg,
    seed: SeedOpt = 0,
    duration: DurationOpt = None,
    config: ConfigOpt = None,
    passes: PassesOpt = None,
    csv: CsvOpt = None,
    rules: RulesOpt = None,
    phases: PhasesOpt = None,
    sample_every: SampleEveryOpt = None,
    guard: GuardOpt = True,
    watch_threshold: WatchThresholdOpt = None,
    deterministic: DeterministicOpt = False,
    variant: VariantOpt = None,
    table_size: TableSizeOpt = None,
    workload: Annotated[
        LpmWorkloadChoice | None,
        typer.Option("--workload", help="LPM address workload"),
    ] = None,
    hit_rate: Annotated[
        float | None,
        typer.Option(
            "--hit-rate",
            min=0.0,
            max=1.0,
            help="Share of LPM lookups drawn from the hot keys",
        ),
    ] = None,
    mode: Annotated[
        SimpleModeChoice | None,
        typer.Option("--mode", help="SimpleBench cost mode"),
    ] = None,
    handler: Annotated[
        SimpleHandlerChoice | None,
        typer.Option("--handler", help="SimpleBench handler"),
    ] = None,
    value: Annotated[
        int | None,
        typer.Option("--value", help="SimpleBench specialized input value"),
    ] = None,
):
    """Run a benchmark under one configuration and report metrics per window."""
    validate_bench_flags(
        name.value,
        {
            "--variant": variant,
            "--workload": workload,
            "--hit-rate": hit_rate,
            "--table-size": table_size,
            "--rules": rules,
            "--mode": mode,
            "--handler": handler,
        },
    )
    settings: Settings = ctx.obj["settings"]
    opts = _options(
        seed,
        duration,
        config,
        passes,
        phases,
        sample_every,
        guard,
        watch_threshold,
        deterministic,
    )
    b = _bench(settings, name, opts, variant, rules, table_size, handler)

    default_config = None
    overrides: dict = {}
    if name is BenchKind.simple:
        simple_value = value if value is not None else settings.benches.simple_value
        every_k = sample_every or settings.instrument.sample_every
        mode_value = mode.value if mode is not None else "guard-pass"
        default_config, overrides = simple_mode_config(
            b, mode_value, simple_value, every_k
        )
    elif name is BenchKind.lpm:
        if hit_rate is not None and workload is None:
            workload = LpmWorkloadChoice.hitrate
        overrides = {
            "workload": workload.value if workload is not None else None,
            "hit_rate": hit_rate,
        }

    scenario = _scenario(settings, b, opts, overrides)
    result = run_bench(scenario, _config(scenario, opts, default_config), sample_every)
    _finish(result, csv, deterministic)


@app.command()
def explore(
    ctx: typer.Context,
    name: BenchArg,
    seed: SeedOpt = 0,
    duration: DurationOpt = None,
    passes: PassesOpt = None,
    csv: CsvOpt = None,
    rules: RulesOpt = None,
    phases: PhasesOpt = None,
    sample_every: SampleEveryOpt = None,
    guard: GuardOpt = True,
    deterministic: DeterministicOpt = False,
    variant: VariantOpt = None,
    table_size: TableSizeOpt = None,
):
    """Explore the bench's candidate configurations once and settle on the best."""
    validate_bench_flags(name.value, _lpm_flags(variant, table_size, rules))
    settings: Settings = ctx.obj["settings"]
    settings = _with_sample_every(settings, sample_every)
    opts = _options(
        seed, duration, None, passes, phases, sample_every, guard, None, deterministic
    )
    b = _bench(settings, name, opts, variant, rules, table_size)
    scenario = _scenario(settings, b, opts)
    _finish(run_explore(scenario, guard), csv, deterministic)


@app.command()
def adapt(
    ctx: typer.Context,
    name: BenchArg,
    seed: SeedOpt = 0,
    duration: DurationOpt = None,
    passes: PassesOpt = None,
    csv: CsvOpt = None,
    rules: RulesOpt = None,
    phases: PhasesOpt = None,
    sample_every: SampleEveryOpt = None,
    guard: GuardOpt = True,
    watch_threshold: WatchThresholdOpt = None,
    deterministic: DeterministicOpt = False,
    variant: VariantOpt = None,
    table_size: TableSizeOpt = None,
):
    """Adapt to a multi-phase workload: instrument, explore, settle and watch."""
    validate_bench_flags(name.value, _lpm_flags(variant, table_size, rules))
    settings: Settings = ctx.obj["settings"]
    settings = _with_sample_every(settings, sample_every)
    opts = _options(
        seed,
        duration,
        None,
        passes,
        phases,
        sample_every,
        guard,
        watch_threshold,
        deterministic,
    )
    b = _bench(settings, name, opts, variant, rules, table_size)
    scenario = _scenario(settings, b, opts, adapt=True)
    _finish(run_adapt(scenario, opts.watch_threshold, guard), csv, deterministic)


@app.command()
def dump_ir(
    ctx: typer.Context,
    name: BenchArg,
    config: ConfigOpt = None,
    passes: PassesOpt = None,
    rules: RulesOpt = None,
    variant: VariantOpt = None,
    table_size: TableSizeOpt = None,
    seed: SeedOpt = 0,
    guard: GuardOpt = True,
    output: Annotated[
        Path | None, typer.Option("--output", "-o", help="Write the IR to a file")
    ] = None,
):
    """Print the specialized and optimized IR of a bench's handler module."""
    validate_bench_flags(name.value, _lpm_flags(variant, table_size, rules))
    settings: Settings = ctx.obj["settings"]
    opts = RunOptions(seed=seed, passes=passes)
    b = _bench(settings, name, opts, variant, rules, table_size)
    try:
        text = config.text if config is not None else None
        result = specialized_ir(settings, b, text, passes, guard)
    except ConfigError as err:
        raise typer.BadParameter(str(err), param_hint="'--config'")
    if not result.success:
        error(result.message)
        raise typer.Exit(1)
    if output is not None:
        output.write_text(result.text, encoding="utf-8")
        success(f"{result.message}: IR written to {output}")
    else:
        typer.echo(result.text, nl=False)


@app.command()
def config_schema(pretty: bool = True):
    """Prints the config jsonschema"""
    s = Settings.model_json_schema()
    if pretty:
        from rich import print_json

        print_json(data=s)
    else:
        typer.secho(json.dumps(s))


if __name__ == "__main__":
    app()
