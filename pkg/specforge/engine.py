"""Handler state and versions behind stable trampolines.

Every handler starts on the generic version. Installing a specialized module
swaps the active version with a single reference assignment, so an invocation
runs entirely on the version it read when it started. Old versions stay alive
until the last invocation holding them returns.
"""

import logging
import threading
import time
from collections.abc import Callable, Iterable
from dataclasses import dataclass, replace
from typing import Literal

from .codegen import CompiledImage, compile_module
from .constants import DEFAULT_PROFILE_CAPACITY, HISTOGRAM_MAX_BUCKETS
from .errors import (
    GuardFailure,
    RuntimeStateError,
    SpecializationError,
    UnknownHandlerError,
)
from .instrument import ProfileStore
from .interpreter import (
    ExecContext,
    HostState,
    InterpreterImage,
    InterpretResult,
    check_args,
    check_bindings,
    interpret,
)
from .mini_ir import Function, HandlerModule, Value, check_module
from .optimizer import PassPipeline, default_pipeline, run_pipeline
from .spec_model import EMPTY_CONFIG, SpecConfig, SpecSpace, collect_spec_points
from .specializer import (
    CustomGeneratorRegistry,
    Generator,
    SpecializedModule,
    specialize,
)

logger = logging.getLogger(__name__)

Backend = Literal["compiled", "interp"]
BACKENDS: tuple[str, ...] = ("compiled", "interp")
GENERIC_VERSION = 0

CleanupHook = Callable[[str, tuple, GuardFailure], None]
Image = CompiledImage | InterpreterImage


@dataclass(frozen=True)
class FunctionVersion:
    version_id: int
    handler: str
    image: Image
    config_id: str
    installed_at: float
    module: SpecializedModule | None = None
    compile_ms: float = 0.0

    @property
    def is_generic(self) -> bool:
        return self.version_id == GENERIC_VERSION


@dataclass
class Counters:
    invocations: int = 0
    specialized_hits: int = 0
    guard_failures: int = 0
    ops_executed: int = 0
    events: int = 0

    def snapshot(self) -> "Counters":
        return replace(self)

    def since(self, earlier: "Counters") -> "Counters":
        return Counters(
            self.invocations - earlier.invocations,
            self.specialized_hits - earlier.specialized_hits,
            self.guard_failures - earlier.guard_failures,
            self.ops_executed - earlier.ops_executed,
            self.events - earlier.events,
        )


class _HandlerState:
    __slots__ = ("name", "active", "counters", "cleanup", "lock")

    def __init__(self, name: str, generic: FunctionVersion):
        self.name = name
        self.active = generic
        self.counters = Counters()
        self.cleanup: CleanupHook | None = None
        self.lock = threading.Lock()


class Trampoline:
    """Stable entry point of one handler; always calls the active version."""

    __slots__ = ("_runtime", "name")

    def __init__(self, runtime: "SpecRuntime", name: str):
        self._runtime = runtime
        self.name = name

    def __call__(self, *args) -> Value:
        return self._runtime.invoke(self.name, args)

    @property
    def active(self) -> FunctionVersion:
        return self._runtime._state(self.name).active

    def __repr__(self):
        return f"Trampoline({self.name!r}, version={self.active.version_id})"


class SpecRuntime:
    """Owns the generic module, host bindings, profiles and every handler's versions."""

    def __init__(
        self,
        backend: Backend = "compiled",
        pipeline: PassPipeline | None = None,
        profile_capacity: int = DEFAULT_PROFILE_CAPACITY,
        histogram_max_buckets: int = HISTOGRAM_MAX_BUCKETS,
    ):
        if backend not in BACKENDS:
            choices = ", ".join(BACKENDS)
            raise ValueError(f"unknown backend '{backend}' (choose from {choices})")
        self.backend = backend
        self.pipeline = pipeline if pipeline is not None else default_pipeline()
        self.registry = CustomGeneratorRegistry()
        self.profiles = ProfileStore(profile_capacity, histogram_max_buckets)
        self.module: HandlerModule | None = None
        self.host: HostState | None = None
        self._generic: FunctionVersion | None = None
        self._handlers: dict[str, _HandlerState] = {}
        self._trampolines: dict[str, Trampoline] = {}
        self._next_version = GENERIC_VERSION + 1
        self._install_lock = threading.Lock()

    # -- loading -----------------------------------------------------------------

    def load(self, m: HandlerModule, host: HostState) -> "SpecRuntime":
        check_module(m)
        check_bindings(m, host)
        image, compile_ms = self._build(m)
        self.module = m
        self.host = host
        self._generic = FunctionVersion(
            GENERIC_VERSION,
            "*",
            image,
            EMPTY_CONFIG.config_id,
            time.monotonic(),
            None,
            compile_ms,
        )
        self._handlers = {
            fn.name: _HandlerState(fn.name, self._generic) for fn in m.functions
        }
        self._trampolines = {name: Trampoline(self, name) for name in self._handlers}
        logger.info(
            "loaded %d handlers on the %s backend", len(self._handlers), self.backend
        )
        return self

    @property
    def loaded(self) -> bool:
        return self.module is not None

    def _require_loaded(self) -> HandlerModule:
        if self.module is None:
            raise RuntimeStateError("runtime has no module loaded")
        return self.module

    def _state(self, name: str) -> _HandlerState:
        self._require_loaded()
        state = self._handlers.get(name)
        if state is None:
            raise UnknownHandlerError(name)
        return state

    def _build(self, m: HandlerModule) -> tuple[Image, float]:
        started = time.perf_counter()
        image = compile_module(m) if self.backend == "compiled" else InterpreterImage(m)
        return image, (time.perf_counter() - started) * 1000

    @property
    def handler_names(self) -> tuple[str, ...]:
        return tuple(self._handlers)

    def handler(self, name: str) -> Trampoline:
        self._state(name)
        return self._trampolines[name]

    # -- versions ----------------------------------------------------------------

    def install(self, name: str, sm: SpecializedModule) -> int:
        return self.install_all(sm, [name])

    def install_all(
        self, sm: SpecializedModule, names: Iterable[str] | None = None
    ) -> int:
        """Install `sm` for the named handlers (default all); returns the version id."""
        module = self._require_loaded()
        names = list(names) if names is not None else list(self._handlers)
        for name in names:
            self._state(name)
        if sm.module.function_names != module.function_names:
            raise SpecializationError(
                "specialized module does not match the loaded function set"
            )
        for a, b in zip(sm.module.functions, module.functions):
            if (a.params, a.ret) != (b.params, b.ret):
                message = f"specialized '{a.name}' changed its signature"
                raise SpecializationError(message)
        check_module(sm.module)
        image, compile_ms = self._build(sm.module)
        with self._install_lock:
            version_id = self._next_version
            self._next_version += 1
            now = time.monotonic()
            for name in names:
                state = self._handlers[name]
                state.active = FunctionVersion(
                    version_id, name, image, sm.config.config_id, now, sm, compile_ms
                )
        logger.info(
            "installed version %d for %s: config %s (%s), compiled in %.1f ms",
            version_id,
            ",".join(names),
            sm.config.config_id,
            sm.config.text or "<generic>",
            compile_ms,
        )
        return version_id

    def active_version(self, name: str) -> FunctionVersion:
        return self._state(name).active

    def reset_to_generic(self, name: str | None = None):
        names = [name] if name is not None else list(self._handlers)
        with self._install_lock:
            for n in names:
                self._state(n).active = self._generic
        logger.info("reset %s to the generic version", ",".join(names))

    # -- invocation --------------------------------------------------------------

    def invoke(self, name: str, args: Iterable) -> Value:
        """Run the active version; a guard failure falls back to the generic version."""
        state = self._state(name)
        version = state.active
        args = tuple(args)
        check_args(self.module.function(name), args, self.host)
        ctx = ExecContext(self.host, self.profiles)
        failed = False
        try:
            try:
                value = version.image.call(name, args, ctx)
            except GuardFailure as failure:
                failed = True
                logger.debug("%s: %s, falling back to generic", name, failure)
                self._run_cleanup(state, args, failure)
                value = self._generic.image.call(name, args, ctx)
        finally:
            with state.lock:
                c = state.counters
                c.invocations += 1
                c.ops_executed += ctx.ops
                if failed:
                    c.guard_failures += 1
                elif not version.is_generic:
                    c.specialized_hits += 1
        return value

    def _run_cleanup(self, state: _HandlerState, args: tuple, failure: GuardFailure):
        hook = state.cleanup
        if hook is None:
            return
        try:
            hook(state.name, args, failure)
        except Exception:
            logger.warning("cleanup hook of '%s' failed", state.name, exc_info=True)

    def register_cleanup(self, name: str, hook: CleanupHook | None):
        self._state(name).cleanup = hook

    def count_events(self, name: str, n: int):
        """Add `n` application-level completions to the handler's counters."""
        state = self._state(name)
        with state.lock:
            state.counters.events += n

    def stats(self, name: str) -> Counters:
        state = self._state(name)
        with state.lock:
            return state.counters.snapshot()

    def reset_stats(self, name: str | None = None):
        for n in [name] if name is not None else list(self._handlers):
            state = self._state(n)
            with state.lock:
                state.counters = Counters()

    def evaluate_generic(
        self, name: str, args: Iterable, host: HostState | None = None
    ) -> InterpretResult:
        """Interpret the generic module without touching counters or profiles."""
        module = self._require_loaded()
        host = host if host is not None else self.host
        return interpret(module, name, list(args), host, ProfileStore())

    def evaluate_function(self, fn: Function, args: Iterable) -> Value:
        """Interpret a standalone variant of a loaded function against the live host."""
        module = self._require_loaded().replace_function(fn)
        return interpret(module, fn.name, list(args), self.host, ProfileStore()).value

    # -- specialization ----------------------------------------------------------

    def spec_space(self) -> SpecSpace:
        module = self._require_loaded()
        return collect_spec_points(module).with_profiles(self.profiles.snapshot())

    def add_custom_spec(self, kind: str, gen: Generator):
        self.registry.register(kind, gen)

    def customize_opts(self, passes: PassPipeline | str):
        if isinstance(passes, str):
            passes = PassPipeline.parse(passes)
        self.pipeline = passes

    def build(self, c: SpecConfig) -> SpecializedModule:
        """Specialize the loaded module for `c` and run the optimization pipeline."""
        module = self._require_loaded()
        sm = specialize(module, c, self.registry, self.profiles.snapshot())
        return run_pipeline(sm, self.pipeline)

    def specialize(self, c: SpecConfig) -> int:
        """Specialize, optimize and install `c` for every handler.

        Nothing changes when any step fails. Profiles of the labels `c`
        instruments are restarted so they only hold samples from this version.
        """
        sm = self.build(c)
        version_id = self.install_all(sm)
        if c.instrument:
            self.profiles.reset(c.instrument)
        return version_id
