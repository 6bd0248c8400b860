"""The compiled backend must agree with the interpreter on values and op counts."""

import random

import pytest

from specforge.casestudies import build_mmul, matmul_oracle, mmul_host
from specforge.codegen import compile_module, expr_cost, generate_source
from specforge.errors import GuardFailure, Trap, UnknownHandlerError
from specforge.instrument import ProfileStore
from specforge.interpreter import ExecContext, HostState, interpret
from specforge.ir_text import parse_expr, parse_module

PROGRAMS = {
    "sum": (
        """
        (fn f (n:int) -> int
          (block
            (let acc 0)
            (for i 0 n 1 (assign acc (add acc i)))
            (return acc)))
        """,
        [(0,), (3,), (17,)],
    ),
    "while": (
        """
        (fn f (n:int) -> int
          (block
            (let k 0)
            (let steps 0)
            (while (lt k n)
              (block
                (assign k (add k 3))
                (assign steps (add steps 1))))
            (return (mul k steps))))
        """,
        [(0,), (1,), (10,)],
    ),
    "dynamic-step": (
        """
        (fn f (s:int) -> int
          (block
            (let acc 0)
            (for i 10 -10 s (assign acc (add (mul acc 3) i)))
            (return acc)))
        """,
        [(-1,), (-3,), (7,)],
    ),
    "loop-bound-changes": (
        """
        (fn f (n:int) -> int
          (block
            (let hi n)
            (let c 0)
            (for i 0 hi 1
              (block
                (assign c (add c 1))
                (if (lt hi 20) (assign hi (add hi 1)))))
            (return c)))
        """,
        [(0,), (2,), (30,)],
    ),
    "arith": (
        """
        (fn f (a:int b:int) -> int
          (block
            (let x (div a 3))
            (let y (mod a -7))
            (let z (xor (shl b 3) (shr a 1)))
            (if (ge x y) (return (sub z x)) (return (add (and z 255) (or y 1))))))
        """,
        [(-20, 5), (40, -3), (0, 0), (9223372036854775807, 9223372036854775807)],
    ),
    "float": (
        """
        (fn f (x:float) -> float
          (block
            (let y (mul x 2.5))
            (if (gt y 10.0) (return (div y 4.0)))
            (return (sub y 1.0))))
        """,
        [(1.0,), (8.0,)],
    ),
    "calls": (
        """
        (fn sq (a:int) -> int (return (mul a a)))
        (fn f (x:int) -> int
          (block
            (let s 0)
            (for i 0 x 1 (assign s (add s (call sq i))))
            (return s)))
        """,
        [(0,), (5,)],
    ),
}


def run_both(m, name, args, host_factory=HostState):
    expected = interpret(m, name, args, host_factory())
    ctx = ExecContext(host_factory())
    value = compile_module(m).call(name, args, ctx)
    return expected, (value, ctx.ops)


@pytest.mark.parametrize("name", sorted(PROGRAMS))
def test_programs_agree(name):
    source, arg_sets = PROGRAMS[name]
    m = parse_module(source)
    for args in arg_sets:
        expected, actual = run_both(m, "f", list(args))
        assert actual == tuple(expected), args


def test_matmul_agrees_with_interpreter():
    m = build_mmul()
    n = 5
    for b in (2, 4):
        host_i, host_c = mmul_host(n, seed=3), mmul_host(n, seed=3)
        expected = interpret(m, "matmul", [n, b], host_i)
        ctx = ExecContext(host_c)
        compile_module(m).call("matmul", [n, b], ctx)
        assert ctx.ops == expected.ops_executed
        assert host_c.arrays["O"] == host_i.arrays["O"]
        left, right = host_c.arrays["L"], host_c.arrays["R"]
        assert host_c.arrays["O"] == matmul_oracle(left, right, n)


def test_random_modules_agree(make_random_module, make_random_args):
    rng = random.Random(11)
    for seed in range(150):
        m = make_random_module(seed)
        for _ in range(3):
            args = list(make_random_args(rng))
            expected, actual = run_both(m, "f", args)
            assert actual == tuple(expected), (seed, args)


def test_guard_failure_counts_like_the_interpreter():
    m = parse_module(
        """
        (fn f (x:int) -> int
          (block
            (let y (add x 1))
            (guard G (eq y 8))
            (return y)))
        """
    )
    with pytest.raises(GuardFailure):
        interpret(m, "f", [4], HostState())
    ctx = ExecContext(HostState())
    with pytest.raises(GuardFailure) as exc:
        compile_module(m).call("f", [4], ctx)
    assert exc.value.label == "G"
    # let y (4 ops) + the guard
    assert ctx.ops == 5


def test_taps_record_into_the_context_profiles():
    m = parse_module("(fn f (x:int) -> int (return (tap K 2 freq x)))")
    image = compile_module(m)
    profiles = ProfileStore()
    ctx = ExecContext(HostState(), profiles)
    for x in (1, 2, 1, 1, 3):
        image.call("f", [x], ctx)
    # evaluations 0, 2 and 4 are sampled
    assert profiles.get("K").counts == {1: 2, 3: 1}
    reference = ProfileStore()
    ops = sum(
        interpret(m, "f", [x], HostState(), reference).ops_executed
        for x in (1, 2, 1, 1, 3)
    )
    assert ctx.ops == ops


def test_traps_surface_from_compiled_code():
    m = parse_module(
        "(extern a int[]) (fn f (i:int) -> int (return (div (load a i) i)))"
    )
    image = compile_module(m)
    with pytest.raises(Trap) as exc:
        image.call("f", [5], ExecContext(HostState(arrays={"a": [1, 2]})))
    assert exc.value.kind == "out-of-bounds"
    with pytest.raises(Trap) as exc:
        image.call("f", [0], ExecContext(HostState(arrays={"a": [1, 2]})))
    assert exc.value.kind == "div-by-zero"
    with pytest.raises(UnknownHandlerError):
        image.call("g", [0], ExecContext(HostState()))


def test_scalar_externals_in_compiled_code():
    m = parse_module(
        "(extern hits int)"
        " (fn f () -> int (block (assign hits (add hits 2)) (return hits)))"
    )
    host = HostState(scalars={"hits": 1})
    assert compile_module(m).call("f", [], ExecContext(host)) == 3
    assert host.scalars["hits"] == 3


def test_generated_source_shape(square_module):
    source = generate_source(square_module)
    assert source.startswith("def f_f(v_a, _c):")
    assert compile_module(square_module).source == source


def test_expr_cost_skips_annotations():
    assert expr_cost(parse_expr("(add x 1)")) == 3
    assert expr_cost(parse_expr("(spec-enum B (add x 1) 1 2)")) == 3
