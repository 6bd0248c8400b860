import random
import shutil
import tempfile
from pathlib import Path
from traceback import print_tb

import pytest
import yaml
from typer.testing import CliRunner as BaseCliRunner

from specforge.casestudies import build_mmul, mmul_host
from specforge.constants import SETTINGS_PATH_ENV_VAR
from specforge.engine import SpecRuntime
from specforge.ir_text import parse_module
from specforge.mini_ir import (
    CMPOPS,
    Assign,
    BinOp,
    Cmp,
    For,
    Function,
    HandlerModule,
    If,
    Let,
    Lit,
    Param,
    Return,
    SpecAssume,
    SpecEnum,
    SpecRange,
    Var,
    check_module,
)
from specforge.optimizer import PassPipeline
from specforge.settings import Settings
from specforge.utils import cd_to_directory

FIXTURES_DIR = Path(__file__).parent / "fixtures"

SQUARE_SOURCE = "(fn f (a:int) -> int (return (mul a a)))"


class CliRunner(BaseCliRunner):
    with_traceback = True

    def invoke(self, cli, commands, **kwargs):
        result = super().invoke(cli, commands, **kwargs)
        if not result.exit_code == 0 and self.with_traceback:
            if result.exc_info is not None:
                print_tb(result.exc_info[2])
            print(result.exception)
            print(result.output)
        return result


@pytest.fixture
def temp_settings_dir():
    """Create a temporary directory for settings."""
    temp_dir = Path(tempfile.mkdtemp())
    yield temp_dir
    shutil.rmtree(temp_dir)


@pytest.fixture
def cli_settings_path(temp_settings_dir, monkeypatch):
    """Create settings for CLI testing with environment variable set."""
    settings_path = temp_settings_dir / "test_settings.yaml"
    monkeypatch.setenv(SETTINGS_PATH_ENV_VAR, str(settings_path))
    return settings_path


@pytest.fixture
def small_settings_data():
    """Settings small enough for benches to finish in well under a second."""
    return {
        "benches": {
            "duration": 200,
            "mmul_n": 4,
            "mmul_b": 2,
            "lpm_rules": 20,
            "lpm_universe": 50,
            "lpm_fastpath_size": 4,
        },
        "exploration": {
            "window": 10,
            "window_seconds": 0.01,
            "settle_windows": 1,
        },
    }


@pytest.fixture
def cli_settings(cli_settings_path, small_settings_data):
    """Write the small settings where the CLI will look for them."""
    cli_settings_path.write_text(yaml.safe_dump(small_settings_data))
    return Settings.from_file(cli_settings_path)


@pytest.fixture
def small_settings(small_settings_data):
    return Settings(**small_settings_data)


@pytest.fixture
def runner():
    """Create CLI test runner."""
    return CliRunner()


@pytest.fixture
def temp_dir_runner(temp_settings_dir):
    """Create CLI test runner."""
    with cd_to_directory(temp_settings_dir):
        yield CliRunner()


@pytest.fixture
def fixtures_dir():
    return FIXTURES_DIR


@pytest.fixture
def square_module():
    return parse_module(SQUARE_SOURCE)


@pytest.fixture(params=["compiled", "interp"])
def backend(request):
    return request.param


def mmul_runtime(
    n: int, seed: int = 42, backend: str = "interp", passes: str = "default"
) -> SpecRuntime:
    """Runtime with the blocked matmul loaded on seeded n x n matrices."""
    rt = SpecRuntime(backend=backend, pipeline=PassPipeline.parse(passes))
    return rt.load(build_mmul(), mmul_host(n, seed))


@pytest.fixture
def make_mmul_runtime():
    return mmul_runtime


# -- random handler modules ------------------------------------------------------------

ASSUME_PRED = Cmp("lt", Var("a"), Lit(2))
_ARITH = ("add", "sub", "mul", "and", "or", "xor")


class ModuleGenerator:
    """Seeded random modules ``f(a, b) -> int``: trap-free, no loads, unique names.

    Optional spec points: enum ``E`` over ``a``, range ``R`` over ``b + 1`` and
    assume ``P`` that ``a < 2``; some branches test the assumed predicate.
    """

    def __init__(self, seed: int):
        self.rng = random.Random(seed)
        self.counter = 0

    def fresh(self, prefix: str) -> str:
        self.counter += 1
        return f"{prefix}{self.counter}"

    def expr(self, names: list[str], depth: int = 0):
        rng = self.rng
        if depth >= 2 or rng.random() < 0.3:
            if names and rng.random() < 0.7:
                return Var(rng.choice(names))
            return Lit(rng.randint(-5, 9))
        lhs = self.expr(names, depth + 1)
        match rng.randint(0, 3):
            case 0:
                return BinOp(rng.choice(_ARITH), lhs, self.expr(names, depth + 1))
            case 1:
                op = rng.choice(("div", "mod"))
                return BinOp(op, lhs, Lit(rng.choice((1, 2, 3, -3, 7))))
            case 2:
                return BinOp(rng.choice(("shl", "shr")), lhs, Lit(rng.randint(0, 3)))
        return Cmp(rng.choice(CMPOPS), lhs, self.expr(names, depth + 1))

    def loop(self, names: list[str], assignable: list[str], depth: int) -> For:
        rng = self.rng
        var = self.fresh("i")
        match rng.randint(0, 2):
            case 0:
                lo = rng.randint(-2, 3)
                lo_e, hi_e = Lit(lo), Lit(lo + rng.randint(0, 4))
            case 1:
                lo_e, hi_e = Lit(rng.randint(-2, 1)), Var("b")
            case _:
                lo_e, hi_e = Var("a"), BinOp("add", Var("a"), Lit(rng.randint(0, 3)))
        body = self.block(names + [var], list(assignable), depth + 1)
        return For(var, lo_e, hi_e, Lit(rng.choice((1, 2))), body)

    def block(self, names: list[str], assignable: list[str], depth: int) -> tuple:
        rng = self.rng
        out = []
        for _ in range(rng.randint(1, 4)):
            r = rng.random()
            if r < 0.35 or depth >= 2:
                name = self.fresh("v")
                out.append(Let(name, self.expr(names)))
                names.append(name)
                assignable.append(name)
            elif r < 0.55 and assignable:
                out.append(Assign(rng.choice(assignable), self.expr(names)))
            elif r < 0.8:
                cond = ASSUME_PRED if rng.random() < 0.3 else self.expr(names)
                then = self.block(list(names), list(assignable), depth + 1)
                orelse = ()
                if rng.random() < 0.5:
                    orelse = self.block(list(names), list(assignable), depth + 1)
                out.append(If(cond, then, orelse))
            else:
                out.append(self.loop(names, assignable, depth))
        return tuple(out)

    def module(self) -> HandlerModule:
        rng = self.rng
        names = ["a", "b"]
        prefix = []
        if rng.random() < 0.7:
            prefix.append(Let("e", SpecEnum("E", Var("a"), (0, 1, 2))))
            names.append("e")
        if rng.random() < 0.7:
            bound = BinOp("add", Var("b"), Lit(1))
            prefix.append(Let("g", SpecRange("R", bound, -2, 6)))
            names.append("g")
        if rng.random() < 0.6:
            prefix.append(SpecAssume("P", ASSUME_PRED))
        body = self.block(names, [], 0)
        ret = Return(self.expr(names))
        params = (Param("a", "int"), Param("b", "int"))
        fn = Function("f", params, "int", (*prefix, *body, ret))
        return check_module(HandlerModule((fn,)))


def random_module(seed: int) -> HandlerModule:
    return ModuleGenerator(seed).module()


def random_args(rng: random.Random) -> tuple[int, int]:
    return rng.randint(-3, 4), rng.randint(-3, 6)


@pytest.fixture
def make_random_module():
    return random_module


@pytest.fixture
def make_random_args():
    return random_args
