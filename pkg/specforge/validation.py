"""Validation helpers for CLI flags that only make sense for some benches."""

import typer

USAGE_ERROR = 2

BENCH_ONLY_FLAGS = {
    "--variant": "lpm",
    "--workload": "lpm",
    "--hit-rate": "lpm",
    "--table-size": "lpm",
    "--rules": "lpm",
    "--mode": "simple",
    "--handler": "simple",
}


def validate_bench_flags(bench: str, given: dict[str, object]) -> None:
    """Reject flags given for a bench that ignores them."""
    for flag, value in given.items():
        owner = BENCH_ONLY_FLAGS.get(flag)
        if value is None or owner is None or owner == bench:
            continue
        typer.secho(
            f"Error: {flag} only applies to the {owner} bench, not {bench}",
            err=True,
            fg=typer.colors.RED,
        )
        raise typer.Exit(USAGE_ERROR)
