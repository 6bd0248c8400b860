from pathlib import Path
from typing import NamedTuple

import click
import typer

from .casestudies import parse_rules
from .custom_specs import LpmRule
from .errors import ConfigError, RuleError
from .optimizer import PassPipeline
from .spec_model import split_config_text


class ConfigText(NamedTuple):
    """``label=value;...`` as typed, checked for shape only.

    Labels and values are resolved once the handler module is known.
    """

    text: str
    decisions: dict[str, str]


def parse_config_text(value: str) -> ConfigText:
    try:
        return ConfigText(value, split_config_text(value))
    except ConfigError as err:
        raise typer.BadParameter(str(err))


class ConfigTextParser(click.ParamType):
    name = "LABEL=VALUE;..."

    def convert(self, value, param, ctx):
        if isinstance(value, ConfigText):
            return value
        return parse_config_text(value)


class PassesParser(click.ParamType):
    name = "PASSES"

    def convert(self, value, param, ctx):
        if isinstance(value, PassPipeline):
            return value
        try:
            return PassPipeline.parse(value)
        except ConfigError as err:
            self.fail(str(err), param, ctx)


class RulesFile(NamedTuple):
    path: Path
    rules: list[LpmRule]


def parse_rules_file(path: Path) -> RulesFile:
    if not path.is_file():
        raise typer.BadParameter(f"No such file: {path}")
    try:
        return RulesFile(path, parse_rules(path.read_text(encoding="utf-8")))
    except RuleError as err:
        raise typer.BadParameter(f"{path}: {err}")


class RulesFileParser(click.ParamType):
    name = "FILE"

    def convert(self, value, param, ctx):
        if isinstance(value, RulesFile):
            return value
        return parse_rules_file(Path(value))


class PhasesFile(NamedTuple):
    """Phase parameter text; validated against the bench's phase model later."""

    path: Path
    text: str


class PhasesFileParser(click.ParamType):
    name = "FILE"

    def convert(self, value, param, ctx):
        if isinstance(value, PhasesFile):
            return value
        path = Path(value)
        if not path.is_file():
            self.fail(f"No such file: {path}", param, ctx)
        return PhasesFile(path, path.read_text(encoding="utf-8"))
