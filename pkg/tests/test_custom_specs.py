"""Tests for the fast-path and nested-if prefix-match generators."""

import ipaddress

import numpy as np
import pytest

from specforge.casestudies import (
    address_in,
    build_lpm,
    key_universe,
    lpm_host,
    lpm_oracle,
    parse_rules,
    random_rules,
)
from specforge.codegen import compile_module
from specforge.custom_specs import (
    FASTPATH_KIND,
    LpmRule,
    check_rules,
    fastpath_generator,
    gen_fastpath,
    gen_lpm_nested_if,
    prefix_mask,
    rule_tree,
)
from specforge.engine import SpecRuntime
from specforge.errors import RuleError, RuntimeStateError, SpecializationError
from specforge.instrument import ValueProfile
from specforge.interpreter import ExecContext, HostState, interpret
from specforge.ir_text import parse_module
from specforge.mini_ir import Cmp, HandlerModule, If, Lit, Return, Var, count_statements
from specforge.policy import fastpath_params
from specforge.spec_model import Custom, SpecConfig


def addr(text):
    return int(ipaddress.IPv4Address(text))


@pytest.fixture
def square():
    return parse_module("(fn sq (k:int) -> int (return (mul k k)))").function("sq")


@pytest.fixture
def table(fixtures_dir):
    return parse_rules((fixtures_dir / "rules.txt").read_text())


def test_fastpath_prepends_checks(square):
    fn = gen_fastpath([(3, 9), (4, 16)], 1, square)
    assert fn.body[0] == If(Cmp("eq", Var("k"), Lit(3)), (Return(Lit(9)),))
    assert fn.body[1:] == square.body
    assert len(gen_fastpath([(3, 9), (3, 9), (4, 16)], 8, square).body) == 3


def test_empty_fastpath_is_the_target(square):
    assert gen_fastpath([(3, 9)], 0, square) is square
    assert gen_fastpath([], 4, square) is square


def test_fastpath_rejects_impure_targets(square):
    with pytest.raises(SpecializationError, match="not pure"):
        gen_fastpath([(3, 9), (3, 10)], 2, square)
    with pytest.raises(SpecializationError):
        gen_fastpath([(3, 9)], -1, square)


def test_fastpath_needs_a_single_int_key():
    fn = parse_module("(fn g (a:int b:int) -> int (return a))").function("g")
    with pytest.raises(SpecializationError, match="single int parameter"):
        gen_fastpath([(1, 1)], 1, fn)


def test_fastpath_generator_uses_the_top_keys(square):
    profile = ValueProfile.frequency()
    for v in [5] * 4 + [2] * 2 + [9]:
        profile.record(v)
    gen = fastpath_generator(lambda fn, args: args[0] * args[0])
    fn = gen(square, {"n": 2}, profile)
    assert [s.cond.rhs for s in fn.body[:2]] == [Lit(5), Lit(2)]
    assert [s.then[0].expr for s in fn.body[:2]] == [Lit(25), Lit(4)]
    assert gen(square, {"n": 0}, profile) is square
    assert gen(square, {"n": 4}, None) is square
    assert gen(square, {"n": 4}, ValueProfile.histogram(0, 9)) is square
    assert len(gen(square, {"n": 10}, profile).body) == 3 + len(square.body)


def test_prefix_masks():
    assert prefix_mask(0) == 0
    assert prefix_mask(8) == 0xFF000000
    assert prefix_mask(32) == 0xFFFFFFFF
    rule = LpmRule(addr("10.0.0.0"), 8, 2)
    assert rule.matches(addr("10.200.1.1"))
    assert not rule.matches(addr("11.0.0.1"))


@pytest.mark.parametrize(
    "rule, message",
    [
        (LpmRule(0, 33, 1), "prefix length 33"),
        (LpmRule(1 << 32, 32, 1), "is not a 32-bit value"),
        (LpmRule(addr("10.1.2.3"), 8, 1), "bits set beyond its length"),
    ],
)
def test_rule_checks(rule, message):
    with pytest.raises(RuleError, match=message):
        check_rules([rule])


def test_duplicate_rules():
    with pytest.raises(RuleError, match="duplicate rule"):
        check_rules([LpmRule(0, 0, 1), LpmRule(0, 0, 2)])


def test_rule_tree(table):
    tree = rule_tree(table)
    default, ten, ten_one, ten_one_two, home, home_seven = table
    assert tree[None] == [default]
    assert tree[default] == [ten, home]
    assert tree[ten] == [ten_one]
    assert tree[ten_one] == [ten_one_two]
    assert tree[home] == [home_seven]
    assert tree[home_seven] == []


@pytest.mark.parametrize(
    "text, expected",
    [
        ("10.1.2.200", 4),
        ("10.1.3.1", 3),
        ("10.9.9.9", 2),
        ("192.168.7.7", 6),
        ("192.168.8.7", 5),
        ("8.8.8.8", 1),
    ],
)
def test_nested_if_lookup(table, text, expected):
    m = HandlerModule((gen_lpm_nested_if(table),))
    assert interpret(m, "lookup", [addr(text)], HostState()).value == expected


def test_nested_if_matches_the_scan():
    rng = np.random.default_rng(3)
    for seed, default in [(3, True), (4, False)]:
        rules = random_rules(40, seed=seed, default=default)
        m = HandlerModule((gen_lpm_nested_if(rules),))
        uniform = rng.integers(0, 1 << 32, 150).tolist()
        addresses = key_universe(rules, 150, rng) + uniform
        for a in addresses:
            got = interpret(m, "lookup", [a], HostState()).value
            assert got == lpm_oracle(rules, a)


def test_nested_if_with_no_rules():
    m = HandlerModule((gen_lpm_nested_if([]),))
    assert interpret(m, "lookup", [42], HostState()).value == -1


NESTED_IF_SIZES = [1, 10, 100, 512]


def nested_if_rules(size):
    return random_rules(size, seed=size, default=size >= 100)


@pytest.mark.slow
@pytest.mark.parametrize("size", NESTED_IF_SIZES)
def test_compiled_nested_if_matches_the_scan(size):
    rules = nested_if_rules(size)
    image = compile_module(HandlerModule((gen_lpm_nested_if(rules),)))
    rng = np.random.default_rng(size)
    inside = [
        address_in(rules[int(rng.integers(len(rules)))], rng) for _ in range(5000)
    ]
    addresses = inside + rng.integers(0, 1 << 32, 5000).tolist()
    for a in addresses:
        got = image.call("lookup", [a], ExecContext(HostState()))
        assert got == lpm_oracle(rules, a)


def test_nested_if_grows_linearly():
    """One check per rule on top of the fixed let and return."""
    per_rule = {}
    for size in NESTED_IF_SIZES:
        fn = gen_lpm_nested_if(nested_if_rules(size))
        per_rule[size] = (count_statements(fn.body) - 2) / size
    c = per_rule[NESTED_IF_SIZES[-1]]
    assert all(abs(v - c) <= 0.25 * c for v in per_rule.values())


def lpm_runtime(table):
    rt = SpecRuntime().load(build_lpm("fp", table), lpm_host(table))
    rt.add_custom_spec(FASTPATH_KIND, fastpath_generator(rt.evaluate_function))
    return rt


def test_profiled_fastpath_end_to_end(table):
    rt = lpm_runtime(table)
    hot, warm, cold = addr("10.1.2.7"), addr("192.168.7.1"), addr("8.8.8.8")
    rt.specialize(SpecConfig(instrument={"fp": 1}))
    for a in [hot] * 5 + [warm] * 3 + [cold]:
        rt.invoke("lookup", [a])
    assert fastpath_params(rt, "fp", 2) == Custom.of(n=2)
    assert fastpath_params(rt, "fp", 50) == Custom.of(n=3)

    rt.specialize(SpecConfig({"fp": Custom.of(n=2)}))
    body = rt.active_version("lookup").module.module.function("lookup").body
    assert body[0] == If(Cmp("eq", Var("addr"), Lit(hot)), (Return(Lit(4)),))
    assert body[1] == If(Cmp("eq", Var("addr"), Lit(warm)), (Return(Lit(6)),))

    rt.reset_stats()
    assert rt.invoke("lookup", [hot]) == 4
    fast_ops = rt.stats("lookup").ops_executed
    for a in (cold, addr("10.1.3.3"), addr("192.168.0.1")):
        assert rt.invoke("lookup", [a]) == lpm_oracle(table, a)
    generic = rt.evaluate_generic("lookup", [hot]).ops_executed
    assert fast_ops < generic


def test_fastpath_params_errors(table):
    rt = lpm_runtime(table)
    with pytest.raises(RuntimeStateError, match="instrument it first"):
        fastpath_params(rt, "fp", 4)
