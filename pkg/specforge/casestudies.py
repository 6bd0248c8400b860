"""Benchmark handlers, their host state, seeded workloads and phase files.

Each scenario pairs a handler module with the fixed code around it: host
state set-up, the invocation stream of every workload phase, and the
configurations worth exploring.
"""

import ipaddress
import logging
import math
from bisect import bisect_right
from collections.abc import Callable, Iterator, Sequence
from dataclasses import replace
from typing import Any, ClassVar, Literal

import numpy as np
from pydantic import ConfigDict, Field, ValidationError
from pydantic import BaseModel as PydanticBaseModel

from .constants import LPM_KEY_BITS
from .custom_specs import (
    FASTPATH_KIND,
    LpmRule,
    check_rules,
    fastpath_generator,
    gen_lpm_nested_if,
)
from .engine import SpecRuntime
from .errors import ConfigError, RuleError
from .interpreter import HostState
from .ir_text import parse_module
from .mini_ir import HandlerModule, SpecCustom, check_module
from .policy import (
    Metric,
    dominant_value,
    events_throughput,
    fastpath_configs,
    knob_configs,
    ops_throughput,
)
from .settings import BenchSettings
from .spec_model import Custom, SpecConfig, SpecSpace

logger = logging.getLogger(__name__)

LpmVariant = Literal["none", "fp", "ni", "ni-fp"]
LPM_VARIANTS: tuple[str, ...] = ("none", "fp", "ni", "ni-fp")
MMUL_BLOCK_SIZES = (2, 4, 8, 16, 32, 64)
BATCH_SIZES = (1, 2, 4, 8, 16, 32, 64)

# -- handler modules -------------------------------------------------------------------

MMUL_SOURCE = """
(module
  (extern L int[])
  (extern R int[])
  (extern O int[])
  ; O = L x R for n x n row-major matrices, blocked over rows and the inner dimension
  (fn matmul (n:int b:int) -> void
    (block
      (let nn (spec-generic N n))
      (let bs (spec-enum B b 2 4 8 16 32 64))
      (spec-assume NmB (eq (mod nn bs) 0))
      (let full (sub nn (mod nn bs)))
      (for z 0 (mul nn nn) 1 (store O z 0))
      (for ii 0 full bs
        (for kk 0 full bs
          (for u 0 bs 1
            (block
              (let ib (mul (add ii u) nn))
              (let lb (add ib kk))
              (for j 0 nn 1
                (block
                  (let acc (load O (add ib j)))
                  (for t 0 bs 1
                    (assign acc (add acc (mul (load L (add lb t)) (load R (add (mul (add kk t) nn) j))))))
                  (store O (add ib j) acc)))))))
      ; rows and columns left over by whole blocks
      (if (ne (mod nn bs) 0)
        (for i 0 nn 1
          (block
            (let ib (mul i nn))
            (let k0 0)
            (if (lt i full) (assign k0 full))
            (for j 0 nn 1
              (block
                (let acc (load O (add ib j)))
                (for k k0 nn 1
                  (assign acc (add acc (mul (load L (add ib k)) (load R (add (mul k nn) j))))))
                (store O (add ib j) acc))))))
      (return))))
"""

LPM_SCAN_SOURCE = """
(module
  (extern rule_prefix int[])
  (extern rule_mask int[])
  (extern rule_len int[])
  (extern rule_value int[])
  (extern rule_count int)
  (fn lookup (addr:int) -> int
    (block
      (let best -1)
      (let best_len -1)
      (for r 0 rule_count 1
        (if (eq (and addr (load rule_mask r)) (load rule_prefix r))
          (if (gt (load rule_len r) best_len)
            (block
              (assign best (load rule_value r))
              (assign best_len (load rule_len r))))))
      (return best))))
"""

SIMPLE_SOURCE = """
(module
  (fn f (a:int) -> int
    (block
      (let x (spec-generic f_a a))
      (return (mul x x))))
  (fn g (a:int b:int) -> int
    (block
      (let y (spec-range g_b b 1 64))
      (return (mul a y)))))
"""

BATCH_SOURCE = """
(module
  (extern queue int[])
  (extern q_state int[] 3)  ; head, count, capacity
  (extern sink int[] 1)
  (extern batch_overhead int)
  (extern poll_cost int)
  (extern event_cost int)
  ; drains up to a batch of queued events; returns how many were processed
  (fn drain (batch:int) -> int
    (block
      (let bsz (spec-enum BATCH_SIZE batch 1 2 4 8 16 32 64))
      (let acc 0)
      (for w 0 batch_overhead 1 (assign acc (add acc w)))
      (for s 0 (mul bsz poll_cost) 1 (assign acc (xor acc s)))
      (let head (load q_state 0))
      (let count (load q_state 1))
      (let cap (load q_state 2))
      (let n count)
      (if (gt n bsz) (assign n bsz))
      (for i 0 n 1
        (block
          (let ev (load queue (mod (add head i) cap)))
          (let work ev)
          (for e 0 event_cost 1 (assign work (add (mul work 31) e)))
          (store sink 0 (add (load sink 0) work))))
      (store q_state 0 (mod (add head n) cap))
      (store q_state 1 (sub count n))
      (return n))))
"""


def build_mmul() -> HandlerModule:
    return parse_module(MMUL_SOURCE)


def build_simplebench() -> HandlerModule:
    return parse_module(SIMPLE_SOURCE)


def build_batchbench(phase: "BatchPhase | None" = None) -> HandlerModule:
    """Batch drain handler; a phase fixes the declared queue capacity."""
    source = BATCH_SOURCE
    if phase is not None:
        declared = f"(extern queue int[] {phase.capacity})"
        source = source.replace("(extern queue int[])", declared)
    return parse_module(source)


def _unknown_variant(variant: str) -> ConfigError:
    choices = ", ".join(LPM_VARIANTS)
    return ConfigError(f"unknown LPM variant '{variant}' (choose from {choices})")


def _with_fastpath_point(module: HandlerModule) -> HandlerModule:
    fn = module.function("lookup")
    body = (SpecCustom("fp", FASTPATH_KIND), *fn.body)
    return module.replace_function(replace(fn, body=body))


def build_lpm(variant: LpmVariant, rules: Sequence[LpmRule]) -> HandlerModule:
    """Longest-prefix-match lookup: linear scan, fast path, nested-if or both."""
    rules = check_rules(rules)
    match variant:
        case "none":
            return parse_module(LPM_SCAN_SOURCE)
        case "fp":
            return check_module(_with_fastpath_point(parse_module(LPM_SCAN_SOURCE)))
        case "ni":
            return check_module(HandlerModule((gen_lpm_nested_if(rules),)))
        case "ni-fp":
            nested = HandlerModule((gen_lpm_nested_if(rules),))
            return check_module(_with_fastpath_point(nested))
    raise _unknown_variant(variant)


# -- oracles ---------------------------------------------------------------------------


def matmul_oracle(left: Sequence[int], right: Sequence[int], n: int) -> list[int]:
    lm = np.asarray(left, dtype=np.int64).reshape(n, n)
    rm = np.asarray(right, dtype=np.int64).reshape(n, n)
    return (lm @ rm).ravel().tolist()


def lpm_oracle(rules: Sequence[LpmRule], addr: int) -> int:
    best, best_len = -1, -1
    for r in rules:
        if r.matches(addr) and r.length > best_len:
            best, best_len = r.value, r.length
    return best


# -- host state ------------------------------------------------------------------------


def mmul_host(n: int, seed: int = 0, lo: int = -9, hi: int = 9) -> HostState:
    rng = np.random.default_rng(seed)
    return HostState(
        arrays={
            "L": rng.integers(lo, hi + 1, n * n).tolist(),
            "R": rng.integers(lo, hi + 1, n * n).tolist(),
            "O": [0] * (n * n),
        }
    )


def lpm_host(rules: Sequence[LpmRule]) -> HostState:
    return HostState(
        arrays={
            "rule_prefix": [r.prefix for r in rules],
            "rule_mask": [r.mask for r in rules],
            "rule_len": [r.length for r in rules],
            "rule_value": [r.value for r in rules],
        },
        scalars={"rule_count": len(rules)},
    )


def batch_host(phase: "BatchPhase") -> HostState:
    return HostState(
        arrays={
            "queue": [0] * phase.capacity,
            "q_state": [0, 0, phase.capacity],
            "sink": [0],
        },
        scalars={
            "batch_overhead": phase.batch_overhead,
            "poll_cost": phase.poll_cost,
            "event_cost": phase.event_cost,
        },
    )


def push_events(host: HostState, values: Sequence[int]) -> int:
    """Enqueue events as the fixed code would; returns how many were dropped."""
    queue = host.arrays["queue"]
    state = host.arrays["q_state"]
    head, count, cap = state
    dropped = 0
    for v in values:
        if count < cap:
            queue[(head + count) % cap] = v
            count += 1
        else:
            dropped += 1
    state[1] = count
    return dropped


# -- rules -----------------------------------------------------------------------------


def parse_rules(text: str) -> list[LpmRule]:
    """One ``A.B.C.D/len value`` rule per line; ``#`` starts a comment."""
    rules = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise RuleError(
                f"line {lineno}: expected 'A.B.C.D/len value', got '{line}'"
            )
        try:
            net = ipaddress.IPv4Network(parts[0], strict=True)
        except ValueError as err:
            raise RuleError(f"line {lineno}: {err}") from None
        try:
            value = int(parts[1])
        except ValueError:
            message = f"rule value '{parts[1]}' is not an integer"
            raise RuleError(f"line {lineno}: {message}") from None
        rules.append(LpmRule(int(net.network_address), net.prefixlen, value))
    try:
        return check_rules(rules)
    except RuleError as err:
        raise RuleError(f"invalid rule set: {err}") from None


def format_rules(rules: Sequence[LpmRule]) -> str:
    lines = [f"{ipaddress.IPv4Address(r.prefix)}/{r.length} {r.value}" for r in rules]
    return "\n".join(lines) + "\n"


def random_rules(
    n: int,
    seed: int = 0,
    default: bool = True,
    min_len: int = 8,
    max_len: int = LPM_KEY_BITS,
) -> list[LpmRule]:
    """`n` distinct canonical rules, led by the /0 default when `default` is set."""
    rng = np.random.default_rng(seed)
    rules: dict[tuple[int, int], LpmRule] = {}
    if default and n > 0:
        rules[(0, 0)] = LpmRule(0, 0, 1)
    while len(rules) < n:
        length = int(rng.integers(min_len, max_len + 1))
        prefix = int(rng.integers(0, 1 << LPM_KEY_BITS)) & LpmRule(0, length, 0).mask
        if (prefix, length) not in rules:
            rules[(prefix, length)] = LpmRule(prefix, length, len(rules) + 1)
    return list(rules.values())


def address_in(rule: LpmRule, rng: np.random.Generator) -> int:
    host_bits = LPM_KEY_BITS - rule.length
    return rule.prefix | int(rng.integers(0, 1 << host_bits))


def key_universe(
    rules: Sequence[LpmRule], size: int, rng: np.random.Generator
) -> list[int]:
    """`size` distinct addresses, each drawn inside a randomly chosen rule."""
    keys: dict[int, None] = {}
    attempts = 0
    while len(keys) < size:
        attempts += 1
        if attempts > 100 * size:
            raise ConfigError(f"could not draw {size} distinct keys")
        if rules:
            addr = address_in(rules[int(rng.integers(len(rules)))], rng)
        else:
            addr = int(rng.integers(0, 1 << LPM_KEY_BITS))
        keys[addr] = None
    return list(keys)


def default_only_addresses(
    rules: Sequence[LpmRule], count: int, rng: np.random.Generator
) -> list[int]:
    """Addresses matched by no rule except a /0 default."""
    specific = [r for r in rules if r.length > 0]
    out = []
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > 1000 * max(count, 1):
            raise RuleError("rules leave no address to the default route")
        addr = int(rng.integers(0, 1 << LPM_KEY_BITS))
        if not any(r.matches(addr) for r in specific):
            out.append(addr)
    return out


def zipf_weights(size: int, exponent: float) -> np.ndarray:
    weights = np.arange(1, size + 1, dtype=np.float64) ** -exponent
    return weights / weights.sum()


def zipf_stream(
    keys: Sequence[int],
    length: int,
    exponent: float,
    rng: np.random.Generator,
    mode: Literal["iid", "quota"] = "quota",
) -> list[int]:
    """Zipf-distributed key stream; rank r is ``keys[r]``.

    ``iid`` draws independently. ``quota`` gives each key its expected count
    exactly and interleaves them by a fixed stride coprime with the length,
    spreading every key's occurrences over the whole stream.
    """
    if not keys or length <= 0:
        return []
    p = zipf_weights(len(keys), exponent)
    if mode == "iid":
        return [keys[i] for i in rng.choice(len(keys), size=length, p=p)]
    counts = np.floor(p * length).astype(np.int64)
    # hand the rounding remainder to the highest ranks
    counts[: length - int(counts.sum())] += 1
    ordered = np.repeat(np.arange(len(keys)), counts)
    stride = int(length * 0.618) + 1
    while math.gcd(stride, length) != 1:
        stride += 1
    return [keys[ordered[(j * stride) % length]] for j in range(length)]


# -- phases ----------------------------------------------------------------------------


class WorkloadPhase(PydanticBaseModel):
    model_config = ConfigDict(extra="forbid")

    duration: int = Field(4000, ge=1, description="Invocations in this phase")
    seed: int = 0


class MmulPhase(WorkloadPhase):
    n: int = Field(16, ge=1)
    b: int = Field(8, ge=1)


class LpmPhase(WorkloadPhase):
    workload: Literal["A", "B", "zipf", "hitrate"] = "zipf"
    zipf_exponent: float = Field(1.1, gt=0)
    universe: int = Field(1000, ge=1)
    stream: Literal["quota", "iid"] = "quota"
    flows: int = Field(1, ge=1, description="Distinct addresses of workloads A and B")
    hit_rate: float = Field(1.0, ge=0, le=1)
    hot_keys: int = Field(8, ge=1)


class SimplePhase(WorkloadPhase):
    handler: Literal["f", "g"] = "f"
    value: int = Field(7, ge=1, le=64)
    dominant_fraction: float = Field(0.9, ge=0, le=1)


class BatchPhase(WorkloadPhase):
    arrivals: int = Field(64, ge=0, description="Events arriving before each call")
    batch_overhead: int = Field(64, ge=0)
    poll_cost: int = Field(0, ge=0)
    event_cost: int = Field(1, ge=0)
    capacity: int = Field(64, ge=1)
    batch: int = Field(16, ge=1, description="BATCH_SIZE argument of the fixed code")


def split_phase_text(text: str) -> list[dict[str, str]]:
    """``key=value`` lines, ``#`` comments, ``---`` between phases."""
    phases: list[dict[str, str]] = [{}]
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "---":
            phases.append({})
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"line {lineno}: expected key=value, got '{line}'")
        phases[-1][key.strip()] = value.strip()
    return [p for p in phases if p] or [{}]


def validation_details(err: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(map(str, e['loc']))}: {e['msg']}" for e in err.errors()
    )


def load_phases(text: str, model: type[WorkloadPhase]) -> list[WorkloadPhase]:
    phases = []
    for i, fields in enumerate(split_phase_text(text), 1):
        try:
            phases.append(model.model_validate(fields))
        except ValidationError as err:
            raise ConfigError(f"phase {i}: {validation_details(err)}") from None
    return phases


# -- scenarios -------------------------------------------------------------------------


class Bench:
    """Fixed code of one scenario: module, host, invocation streams and candidates."""

    name: ClassVar[str]
    handler: str
    phase_model: ClassVar[type[WorkloadPhase]]
    metric: ClassVar[Metric] = staticmethod(ops_throughput)

    def __init__(self, settings: BenchSettings | None = None):
        self.settings = settings or BenchSettings()

    def module(self) -> HandlerModule:
        raise NotImplementedError

    def host(self, phase: WorkloadPhase) -> HostState:
        return HostState()

    def setup(self, rt: SpecRuntime):
        """Register generators and hooks once the module is loaded."""

    def enter_phase(self, host: HostState, phase: WorkloadPhase):
        """Adjust host state when a phase starts."""

    def items(self, phase: WorkloadPhase) -> Iterator[Any]:
        raise NotImplementedError

    def step(self, rt: SpecRuntime, item: Any):
        rt.invoke(self.handler, item)

    def default_phase(self, **overrides) -> WorkloadPhase:
        return self.phase_model(**{"duration": self.settings.duration, **overrides})

    def adapt_phases(self) -> list[WorkloadPhase]:
        return [self.default_phase(seed=1), self.default_phase(seed=2)]

    def configs(self, space: SpecSpace, range_samples: int = 4) -> list[SpecConfig]:
        return [SpecConfig()]

    def instrument_config(self, every_k: int) -> SpecConfig | None:
        return None

    def complete(self, config: SpecConfig) -> SpecConfig:
        """Fill in parameters a command-line config leaves implicit."""
        return config


class MmulBench(Bench):
    name = "mmul"
    handler = "matmul"
    phase_model = MmulPhase

    def module(self) -> HandlerModule:
        return build_mmul()

    def default_phase(self, **overrides) -> MmulPhase:
        fields = {"n": self.settings.mmul_n, "b": self.settings.mmul_b, **overrides}
        return super().default_phase(**fields)

    def adapt_phases(self) -> list[WorkloadPhase]:
        n = self.settings.mmul_n
        return [
            self.default_phase(seed=1, n=n),
            self.default_phase(seed=2, n=n + n // 2),
        ]

    def host(self, phase: MmulPhase) -> HostState:
        return mmul_host(phase.n, phase.seed)

    def enter_phase(self, host: HostState, phase: MmulPhase):
        fresh = mmul_host(phase.n, phase.seed)
        host.arrays.update(fresh.arrays)

    def items(self, phase: MmulPhase) -> Iterator[tuple[int, int]]:
        for _ in range(phase.duration):
            yield (phase.n, phase.b)

    def configs(self, space: SpecSpace, range_samples: int = 4) -> list[SpecConfig]:
        return knob_configs(space, "B", range_samples)


class LpmBench(Bench):
    name = "lpm"
    handler = "lookup"
    phase_model = LpmPhase

    def __init__(
        self,
        settings: BenchSettings | None = None,
        variant: LpmVariant = "fp",
        rules: Sequence[LpmRule] | None = None,
    ):
        super().__init__(settings)
        if variant not in LPM_VARIANTS:
            raise _unknown_variant(variant)
        self.variant = variant
        if rules is None:
            rules = random_rules(self.settings.lpm_rules, seed=0)
        self.rules = check_rules(rules)

    @property
    def has_fastpath(self) -> bool:
        return self.variant in ("fp", "ni-fp")

    def module(self) -> HandlerModule:
        return build_lpm(self.variant, self.rules)

    def default_phase(self, **overrides) -> LpmPhase:
        fields = {
            "zipf_exponent": self.settings.lpm_zipf_exponent,
            "universe": self.settings.lpm_universe,
            "hot_keys": max(self.settings.lpm_fastpath_size, 1),
            **overrides,
        }
        return super().default_phase(**fields)

    def host(self, phase: LpmPhase) -> HostState:
        return lpm_host(self.rules)

    def setup(self, rt: SpecRuntime):
        if self.has_fastpath:
            rt.add_custom_spec(FASTPATH_KIND, fastpath_generator(rt.evaluate_function))

    def addresses(self, phase: LpmPhase) -> list[int]:
        rng = np.random.default_rng(phase.seed)
        match phase.workload:
            case "A":
                longest = LpmRule(0, 0, -1)
                target = max(self.rules, key=lambda r: r.length, default=longest)
                flows = [address_in(target, rng) for _ in range(phase.flows)]
                return [flows[i % len(flows)] for i in range(phase.duration)]
            case "B":
                flows = default_only_addresses(self.rules, phase.flows, rng)
                return [flows[i % len(flows)] for i in range(phase.duration)]
            case "zipf":
                keys = key_universe(self.rules, phase.universe, rng)
                return zipf_stream(
                    keys, phase.duration, phase.zipf_exponent, rng, phase.stream
                )
            case "hitrate":
                keys = key_universe(self.rules, phase.universe + phase.hot_keys, rng)
                hot, cold = keys[: phase.hot_keys], keys[phase.hot_keys :]
                draws = rng.random(phase.duration)
                picks = rng.integers(0, 1 << 30, phase.duration)
                return [
                    hot[p % len(hot)] if d < phase.hit_rate else cold[p % len(cold)]
                    for d, p in zip(draws.tolist(), picks.tolist())
                ]
        raise ConfigError(f"unknown LPM workload '{phase.workload}'")

    def items(self, phase: LpmPhase) -> Iterator[tuple[int]]:
        for addr in self.addresses(phase):
            yield (addr,)

    def configs(self, space: SpecSpace, range_samples: int = 4) -> list[SpecConfig]:
        if not self.has_fastpath:
            return [SpecConfig()]
        return fastpath_configs("fp")

    def instrument_config(self, every_k: int) -> SpecConfig | None:
        return SpecConfig(instrument={"fp": every_k}) if self.has_fastpath else None

    def complete(self, config: SpecConfig) -> SpecConfig:
        d = config.decision("fp")
        if isinstance(d, Custom) and d.get("n") is None:
            n = self.settings.lpm_fastpath_size
            return config.with_decisions(fp=Custom.of(**d.as_dict(), n=n))
        return config


class SimpleBench(Bench):
    name = "simple"
    handler = "f"
    phase_model = SimplePhase

    def __init__(
        self, settings: BenchSettings | None = None, handler: Literal["f", "g"] = "f"
    ):
        super().__init__(settings)
        self.handler = handler

    @property
    def label(self) -> str:
        return "f_a" if self.handler == "f" else "g_b"

    def module(self) -> HandlerModule:
        return build_simplebench()

    def default_phase(self, **overrides) -> SimplePhase:
        fields = {
            "value": self.settings.simple_value,
            "handler": self.handler,
            **overrides,
        }
        return super().default_phase(**fields)

    def adapt_phases(self) -> list[WorkloadPhase]:
        v = self.settings.simple_value
        return [
            self.default_phase(seed=1, value=v),
            self.default_phase(seed=2, value=v % 64 + 1),
        ]

    def items(self, phase: SimplePhase) -> Iterator[tuple[int, ...]]:
        rng = np.random.default_rng(phase.seed)
        draws = rng.random(phase.duration).tolist()
        others = rng.integers(1, 64, phase.duration).tolist()
        for d, other in zip(draws, others):
            if d < phase.dominant_fraction:
                v = phase.value
            else:
                # skips the dominant value
                v = other if other < phase.value else other + 1
            yield (v,) if self.handler == "f" else (3, v)

    def configs(self, space: SpecSpace, range_samples: int = 4) -> list[SpecConfig]:
        value = dominant_value(space.profiles.get(self.label))
        candidates = []
        if value is not None:
            candidates.append(space.config(**{self.label: value}))
        return candidates + [SpecConfig()]

    def instrument_config(self, every_k: int) -> SpecConfig | None:
        return SpecConfig(instrument={self.label: every_k})


class BatchBench(Bench):
    name = "batch"
    handler = "drain"
    phase_model = BatchPhase
    metric = staticmethod(events_throughput)

    def __init__(self, settings: BenchSettings | None = None):
        super().__init__(settings)
        self.dropped = 0
        self._rng: np.random.Generator | None = None
        self._phase: BatchPhase | None = None

    def module(self) -> HandlerModule:
        return build_batchbench()

    def default_phase(self, **overrides) -> BatchPhase:
        fields = {
            "batch": self.settings.batch_size,
            "capacity": self.settings.batch_capacity,
            **overrides,
        }
        return super().default_phase(**fields)

    def adapt_phases(self) -> list[WorkloadPhase]:
        # arrivals refill the queue to capacity before every call in both phases
        costs = {"batch_overhead": 64, "event_cost": 1}
        return [
            self.default_phase(seed=1, arrivals=64, poll_cost=0, capacity=64, **costs),
            self.default_phase(seed=2, arrivals=4, poll_cost=4, capacity=4, **costs),
        ]

    def host(self, phase: BatchPhase) -> HostState:
        return batch_host(phase)

    def enter_phase(self, host: HostState, phase: BatchPhase):
        fresh = batch_host(phase)
        host.arrays.update(fresh.arrays)
        host.scalars.update(fresh.scalars)
        self._rng = np.random.default_rng(phase.seed)
        self._phase = phase

    def items(self, phase: BatchPhase) -> Iterator[int]:
        for _ in range(phase.duration):
            yield phase.batch

    def step(self, rt: SpecRuntime, item: int):
        phase = self._phase
        if phase is not None and phase.arrivals:
            values = self._rng.integers(0, 1 << 16, phase.arrivals).tolist()
            self.dropped += push_events(rt.host, values)
        processed = rt.invoke(self.handler, (item,))
        rt.count_events(self.handler, processed)

    def configs(self, space: SpecSpace, range_samples: int = 4) -> list[SpecConfig]:
        return knob_configs(space, "BATCH_SIZE")


BENCHES: dict[str, type[Bench]] = {
    "mmul": MmulBench,
    "lpm": LpmBench,
    "simple": SimpleBench,
    "batch": BatchBench,
}


# -- driving ---------------------------------------------------------------------------


class WorkloadDriver:
    """Feeds a bench's phases into the runtime, one invocation per item."""

    def __init__(
        self,
        rt: SpecRuntime,
        bench: Bench,
        phases: Sequence[WorkloadPhase],
        clock: Callable[[], float] | None = None,
    ):
        if not phases:
            raise ConfigError("a workload needs at least one phase")
        self.rt = rt
        self.bench = bench
        self.phases = list(phases)
        self.clock = clock
        self.position = 0
        self.boundaries: list[float] = []
        self.phase_index = 0
        self._items = self._stream()
        self._next: Any = None
        self.exhausted = False
        self._advance()

    def _stream(self) -> Iterator[Any]:
        # pulled one item ahead: a phase starts right after the previous one ends
        total = len(self.phases)
        for index, phase in enumerate(self.phases, 1):
            self.bench.enter_phase(self.rt.host, phase)
            self.phase_index = index
            self.boundaries.append(self.clock() if self.clock else float(self.position))
            logger.info("%s: phase %d of %d starts", self.bench.name, index, total)
            yield from self.bench.items(phase)

    def _advance(self):
        try:
            self._next = next(self._items)
        except StopIteration:
            self.exhausted = True

    @property
    def total(self) -> int:
        return sum(p.duration for p in self.phases)

    def drive(self, n: int):
        for _ in range(n):
            if self.exhausted:
                return
            item = self._next
            self.bench.step(self.rt, item)
            self.position += 1
            self._advance()

    def stop(self):
        self.exhausted = True

    def phase_at(self, t: float) -> int:
        """1-based index of the phase running at clock time `t`."""
        return max(1, bisect_right(self.boundaries, t))
