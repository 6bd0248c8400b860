"""Tests for CLI commands functionality."""

import csv
import io
import json

from specforge.cli import app
from specforge.constants import CSV_HEADER


def csv_rows(text: str) -> list[dict[str, str]]:
    reader = csv.DictReader(io.StringIO(text))
    assert tuple(reader.fieldnames) == CSV_HEADER
    return list(reader)


def windows(rows):
    return [r for r in rows if r["event"] == "window"]


def test_bench_command_success(runner, cli_settings):
    """Test a fixed-configuration run writing CSV to stdout."""
    result = runner.invoke(app, ["bench", "mmul", "--deterministic", "--config", "B=2"])

    assert result.exit_code == 0
    rows = csv_rows(result.stdout)
    assert [r["event"] for r in rows].count("config-switch") == 1
    assert len(windows(rows)) == 20
    assert {r["config"] for r in rows} == {"B=2"}
    assert sum(int(r["invocations"]) for r in rows) == 200
    assert all(r["guard_failures"] == "0" for r in rows)
    assert "mmul: 200 invocations under B=2" in result.stderr


def test_bench_command_wall_clock(runner, cli_settings):
    result = runner.invoke(app, ["bench", "mmul", "--duration", "30"])

    assert result.exit_code == 0
    assert sum(int(r["invocations"]) for r in csv_rows(result.stdout)) == 30


def test_bench_simple_modes(runner, cli_settings):
    args = ["bench", "simple", "--deterministic", "--mode", "guard-fail"]
    result = runner.invoke(app, args)
    assert result.exit_code == 0
    assert sum(int(r["guard_failures"]) for r in csv_rows(result.stdout)) == 200

    args = ["bench", "simple", "--deterministic", "--mode", "generic"]
    result = runner.invoke(app, args)
    assert result.exit_code == 0
    rows = csv_rows(result.stdout)
    assert sum(int(r["guard_failures"]) for r in rows) == 0
    assert rows[0]["config"] == "generic"


def test_bench_command_with_phases(runner, cli_settings, fixtures_dir):
    """Test a phase file moving the workload to a second matrix size."""
    phases = fixtures_dir / "mmul_phases.txt"
    args = ["bench", "mmul", "--deterministic", "--phases", str(phases)]
    result = runner.invoke(app, args)

    assert result.exit_code == 0
    rows = windows(csv_rows(result.stdout))
    assert [r["phase"] for r in rows] == ["1"] * 4 + ["2"] * 4


def test_bench_lpm_instruments_before_the_fastpath(runner, cli_settings, fixtures_dir):
    rules = fixtures_dir / "rules.txt"
    result = runner.invoke(
        app,
        ["bench", "lpm", "--deterministic", "--rules", str(rules), "--config", "fp=on"],
    )

    assert result.exit_code == 0
    rows = csv_rows(result.stdout)
    assert rows[0]["event"] == "instrument-start"
    assert "fp=custom(n=4)" in {r["config"] for r in rows}


def test_bench_command_writes_csv(runner, cli_settings, temp_settings_dir):
    out = temp_settings_dir / "metrics" / "mmul.csv"
    result = runner.invoke(app, ["bench", "mmul", "--deterministic", "--csv", str(out)])

    assert result.exit_code == 0
    assert "Wrote 21 rows to" in result.stdout
    assert len(csv_rows(out.read_text())) == 21


def test_relative_csv_path(temp_dir_runner, cli_settings, temp_settings_dir):
    args = ["bench", "simple", "--deterministic", "--csv", "out/simple.csv"]
    result = temp_dir_runner.invoke(app, args)

    assert result.exit_code == 0
    assert (temp_settings_dir / "out" / "simple.csv").is_file()


def test_bench_command_invalid_config(runner, cli_settings):
    """Test decisions outside a point's domain."""
    result = runner.invoke(app, ["bench", "mmul", "--config", "B=7"])
    assert result.exit_code == 2
    assert "Invalid value for '--config'" in result.stderr

    result = runner.invoke(app, ["bench", "mmul", "--config", "B"])
    assert result.exit_code == 2

    result = runner.invoke(app, ["bench", "mmul", "--config", "Q=1"])
    assert result.exit_code == 2
    assert "unknown specialization point 'Q'" in result.stderr


def test_bench_command_invalid_flags(runner, cli_settings, fixtures_dir):
    result = runner.invoke(app, ["bench", "mmul", "--variant", "fp"])
    assert result.exit_code == 2
    assert "--variant only applies to the lpm bench" in result.stderr

    result = runner.invoke(app, ["bench", "mmul", "--passes", "dce,inline"])
    assert result.exit_code == 2

    result = runner.invoke(app, ["bench", "mmul", "--watch-threshold", "1.5"])
    assert result.exit_code == 2

    bad = fixtures_dir / "bad_rules.txt"
    result = runner.invoke(app, ["bench", "lpm", "--rules", str(bad)])
    assert result.exit_code == 2


def test_bench_command_invalid_phases(
    runner, cli_settings, fixtures_dir, temp_settings_dir
):
    bad = fixtures_dir / "bad_phases.txt"
    result = runner.invoke(app, ["bench", "mmul", "--phases", str(bad)])
    assert result.exit_code == 2
    assert "phase 2" in result.stderr

    missing = temp_settings_dir / "missing.txt"
    result = runner.invoke(app, ["bench", "mmul", "--phases", str(missing)])
    assert result.exit_code == 2


def test_explore_command(runner, cli_settings):
    result = runner.invoke(app, ["explore", "mmul", "--deterministic"])

    assert result.exit_code == 0
    rows = csv_rows(result.stdout)
    assert [r["event"] for r in rows].count("best") == 1
    assert [r["event"] for r in rows].count("settle") == 1
    assert "explored 7 configs on 'matmul'" in result.stderr


def test_deterministic_explore_is_reproducible(runner, cli_settings, temp_settings_dir):
    outputs = []
    for i in range(2):
        out = temp_settings_dir / f"explore-{i}.csv"
        args = ["explore", "mmul", "--seed", "42", "--deterministic", "--csv", str(out)]
        result = runner.invoke(app, args)
        assert result.exit_code == 0
        outputs.append(out.read_bytes())

    assert outputs[0] == outputs[1]
    assert len(csv_rows(outputs[0].decode())) > 7


def test_adapt_command_follows_phases(runner, cli_settings, fixtures_dir):
    """Test the batch size switching from the full queue to the trickle phase."""
    phases = fixtures_dir / "batch_phases.txt"
    args = ["adapt", "batch", "--deterministic", "--phases", str(phases)]
    result = runner.invoke(app, args)

    assert result.exit_code == 0
    rows = csv_rows(result.stdout)
    triggers = [r for r in rows if r["event"] == "re-explore-trigger"]
    assert len(triggers) == 1
    assert triggers[0]["phase"] == "2"
    assert "2 exploration rounds, 1 re-explorations" in result.stderr
    assert "settled on BATCH_SIZE=64, BATCH_SIZE=4" in result.stderr


def test_dump_ir_command(runner, cli_settings, temp_settings_dir):
    result = runner.invoke(app, ["dump-ir", "mmul", "--config", "B=8;NmB=assume"])
    assert result.exit_code == 0
    assert "(guard B (eq b 8))" in result.stdout
    assert "(guard NmB" in result.stdout
    assert "spec-enum" not in result.stdout

    result = runner.invoke(app, ["dump-ir", "mmul", "--config", "B=8", "--no-guard"])
    assert result.exit_code == 0
    assert "guard" not in result.stdout

    out = temp_settings_dir / "mmul.ir"
    result = runner.invoke(app, ["dump-ir", "mmul", "--output", str(out)])
    assert result.exit_code == 0
    assert out.read_text().startswith("(module")

    result = runner.invoke(app, ["dump-ir", "mmul", "--config", "B=3"])
    assert result.exit_code == 2


def test_config_schema_command(runner, cli_settings):
    result = runner.invoke(app, ["config-schema", "--no-pretty"])

    assert result.exit_code == 0
    schema = json.loads(result.stdout)
    sections = {"engine", "instrument", "exploration", "benches"}
    assert sections <= set(schema["properties"])


def test_invalid_settings_file(runner, cli_settings_path):
    cli_settings_path.write_text("engine:\n  backend: gpu\n")
    result = runner.invoke(app, ["dump-ir", "mmul"])

    assert result.exit_code == 1
    assert "invalid settings file" in result.stderr
