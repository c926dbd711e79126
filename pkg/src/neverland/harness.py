"""Attack scenarios run against a booted, locked-down machine.

Exploit primitives grant the attacker what a kernel bug would: raw physical
writes, page-table corruption, supervisor CSR writes, MMIO writes and hijacked
control flow. They bypass software and page permissions but go through the
permission table and register locks like any other access.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from .asm import AsmError, assemble, evaluate
from .isa import CSR_NAMES, Op, encode
from .kernel_sim import (
    STANDARD_KERNEL_ASM,
    KDATA_HOOK,
    KDATA_PROCLIST,
    BootConfig,
    BootStats,
    ModuleBlob,
    build_kernel,
    standard_kernel,
    standard_modules,
    standard_user,
    user_from_asm,
    load_and_boot,
)
from .machine import PAGE_SHIFT, BusError, Machine, MachineConfig, Mode, PageEntry, RunResult, TrapCause
from .perm_table import AccessVerdict

Expr = str | int


class ScenarioInvalid(ValueError):
    pass


def _u64(value: int) -> bytes:
    return (value & (2**64 - 1)).to_bytes(8, "little")


# Exploit primitives and scenario steps ---------------------------------------


@dataclass(frozen=True)
class ArbitraryPhysWrite:
    """Write ``bytes`` (hex) or one 64-bit ``u64`` value at a physical address."""

    paddr: Expr
    bytes: str | None = None
    u64: Expr | None = None


@dataclass(frozen=True)
class PteCorrupt:
    """Rewrite the page-map entry for ``vaddr`` (or ``vpn``); unset fields keep their value."""

    vaddr: Expr | None = None
    vpn: Expr | None = None
    paddr: Expr | None = None
    pfn: Expr | None = None
    r: bool | None = None
    w: bool | None = None
    x: bool | None = None
    u: bool | None = None


@dataclass(frozen=True)
class CsrWriteAsSupervisor:
    csr: Expr
    value: Expr


@dataclass(frozen=True)
class MmioWrite:
    offset: Expr
    value: Expr


@dataclass(frozen=True)
class JumpSupervisor:
    """Force Supervisor mode at ``vaddr`` and run, modelling a hijacked transfer."""

    vaddr: Expr
    max_steps: int = 10_000


@dataclass(frozen=True)
class RunUser:
    """Restart the user program at its entry point and run it."""

    max_steps: int = 10_000


STEP_TYPES = {cls.__name__: cls for cls in (ArbitraryPhysWrite, PteCorrupt, CsrWriteAsSupervisor, MmioWrite, JumpSupervisor, RunUser)}


# Expectations ----------------------------------------------------------------


@dataclass(frozen=True)
class TrapIs:
    cause: str
    step: int | None = None


@dataclass(frozen=True)
class VerdictIs:
    verdict: str
    step: int | None = None


@dataclass(frozen=True)
class CsrEquals:
    csr: Expr
    value: Expr


@dataclass(frozen=True)
class MemEquals:
    paddr: Expr
    bytes: str | None = None
    u64: Expr | None = None


@dataclass(frozen=True)
class TableUnchanged:
    pass


@dataclass(frozen=True)
class RunsToHalt:
    step: int | None = None


EXPECT_TYPES = {cls.__name__: cls for cls in (TrapIs, VerdictIs, CsrEquals, MemEquals, TableUnchanged, RunsToHalt)}


def _to_dict(obj, tag: str) -> dict:
    d = {tag: type(obj).__name__}
    d.update({k: v for k, v in asdict(obj).items() if v is not None})
    return d


def _from_dict(d: dict, tag: str, registry: dict):
    d = dict(d)
    name = d.pop(tag, None)
    if name not in registry:
        raise ScenarioInvalid(f"unknown {tag} {name!r}")
    cls = registry[name]
    allowed = {f.name for f in fields(cls)}
    unknown = set(d) - allowed
    if unknown:
        raise ScenarioInvalid(f"{name}: unknown keys {sorted(unknown)}")
    try:
        return cls(**d)
    except TypeError as exc:
        raise ScenarioInvalid(f"{name}: {exc}") from None


# Scenario --------------------------------------------------------------------


@dataclass
class BootSpec:
    preset: str = "standard"
    table_size: int = 8
    pool_size: int = 2 << 20
    jit_size: int | None = None
    defrag: bool = True
    heap_size: int = 64 << 10
    flush_tlb: bool = True
    arm_enforce: bool = True
    lock_stvec: bool = True
    seal_spare: bool = True

    def config(self) -> BootConfig:
        return BootConfig(
            pool_size=self.pool_size,
            jit_size=self.jit_size,
            defrag_enabled=self.defrag,
            heap_size=self.heap_size,
            flush_tlb=self.flush_tlb,
            arm_enforce=self.arm_enforce,
            lock_stvec=self.lock_stvec,
            seal_spare=self.seal_spare,
        )


@dataclass
class KernelSpec:
    """Kernel segments; unset fields fall back to the boot preset."""

    asm: str | None = None
    syscalls: list[str] | None = None
    rodata: str | None = None
    config_flags: str | None = None
    data: str | None = None
    data_words: list[Expr] | None = None


STANDARD_SYSCALLS = ["sys_getflag", "sys_put", "sys_get", "sys_hook"]

_PRESET_KERNELS = {
    "standard": KernelSpec(
        asm=STANDARD_KERNEL_ASM,
        syscalls=STANDARD_SYSCALLS,
        rodata=standard_kernel().rodata.hex(),
        config_flags=standard_kernel().config_flags.hex(),
        data="",
        data_words=["0", "trap_return", "0x1000"],
    ),
    "custom": KernelSpec(syscalls=[], rodata="", config_flags="", data="", data_words=[]),
}


@dataclass
class ModuleSpec:
    name: str
    text: str | None = None
    asm: str | None = None
    data: str = ""
    load_frames: list[int] | None = None


@dataclass
class Scenario:
    name: str
    expectations: list
    boot: BootSpec = field(default_factory=BootSpec)
    kernel: KernelSpec | None = None
    modules: list[ModuleSpec] | None = None
    user_program: str | None = None
    kernel_program: str | None = None
    exploit_steps: list = field(default_factory=list)
    description: str = ""

    def validate(self) -> None:
        if not self.expectations:
            raise ScenarioInvalid(f"{self.name}: expectations must be non-empty")
        if self.boot.preset not in ("standard", "custom"):
            raise ScenarioInvalid(f"{self.name}: unknown preset {self.boot.preset!r}")
        if self.boot.preset == "custom" and self.kernel_program is None and (self.kernel is None or self.kernel.asm is None):
            raise ScenarioInvalid(f"{self.name}: custom preset needs kernel assembly")
        for exp in self.expectations:
            step = getattr(exp, "step", None)
            if step is not None and not 0 <= step < len(self.exploit_steps):
                raise ScenarioInvalid(f"{self.name}: expectation refers to missing step {step}")

    def to_dict(self) -> dict:
        d: dict = {"name": self.name}
        if self.description:
            d["description"] = self.description
        d["boot"] = {k: v for k, v in asdict(self.boot).items() if v is not None}
        if self.kernel is not None:
            d["kernel"] = {k: v for k, v in asdict(self.kernel).items() if v is not None}
        if self.modules is not None:
            d["modules"] = [{k: v for k, v in asdict(m).items() if v is not None} for m in self.modules]
        programs = {}
        if self.user_program is not None:
            programs["user"] = self.user_program
        if self.kernel_program is not None:
            programs["kernel"] = self.kernel_program
        if programs:
            d["programs"] = programs
        d["exploit_steps"] = [_to_dict(s, "op") for s in self.exploit_steps]
        d["expect"] = [_to_dict(e, "kind") for e in self.expectations]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> Scenario:
        try:
            programs = d.get("programs", {})
            s = cls(
                name=d["name"],
                description=d.get("description", ""),
                boot=BootSpec(**d.get("boot", {})),
                kernel=KernelSpec(**d["kernel"]) if "kernel" in d else None,
                modules=[ModuleSpec(**m) for m in d["modules"]] if "modules" in d else None,
                user_program=programs.get("user"),
                kernel_program=programs.get("kernel"),
                exploit_steps=[_from_dict(x, "op", STEP_TYPES) for x in d.get("exploit_steps", [])],
                expectations=[_from_dict(x, "kind", EXPECT_TYPES) for x in d.get("expect", [])],
            )
        except (KeyError, TypeError) as exc:
            raise ScenarioInvalid(f"malformed scenario: {exc}") from None
        s.validate()
        return s


# Reports ---------------------------------------------------------------------


@dataclass
class ExpectationResult:
    kind: str
    expected: str
    observed: str
    passed: bool

    def to_dict(self) -> dict:
        return {"kind": self.kind, "expected": self.expected, "observed": self.observed, "pass": self.passed}

    @classmethod
    def from_dict(cls, d: dict) -> ExpectationResult:
        return cls(d["kind"], d["expected"], d["observed"], d["pass"])


@dataclass
class ScenarioReport:
    scenario: str
    expectations: list[ExpectationResult]
    counters: dict[str, int]
    passed: bool

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "expectations": [e.to_dict() for e in self.expectations],
            "counters": dict(self.counters),
            "pass": self.passed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ScenarioReport:
        return cls(d["scenario"], [ExpectationResult.from_dict(e) for e in d["expectations"]], dict(d["counters"]), d["pass"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> ScenarioReport:
        return cls.from_dict(json.loads(text))

    def to_text(self) -> str:
        lines = [f"{'PASS' if self.passed else 'FAIL'} {self.scenario}"]
        for e in self.expectations:
            mark = "ok " if e.passed else "BAD"
            lines.append(f"  [{mark}] {e.kind}: expected {e.expected}, observed {e.observed}")
        return "\n".join(lines)


# Runner ----------------------------------------------------------------------


def _hex(text: str) -> bytes:
    try:
        return bytes.fromhex(text.replace(" ", ""))
    except ValueError:
        raise ScenarioInvalid(f"bad hex string {text[:32]!r}") from None


def build_images(s: Scenario):
    """(kernel, modules, user) images for a scenario."""
    try:
        base = _PRESET_KERNELS[s.boot.preset]
        over = s.kernel or KernelSpec()

        def pick(name):
            value = getattr(over, name)
            return getattr(base, name) if value is None else value

        kernel = build_kernel(
            s.kernel_program or pick("asm"),
            pick("syscalls"),
            rodata=_hex(pick("rodata")),
            config_flags=_hex(pick("config_flags")),
            data=_hex(pick("data")),
            data_words=[str(w) for w in pick("data_words")],
        )
        if s.modules is None:
            modules = standard_modules() if s.boot.preset == "standard" else []
        else:
            modules = []
            for spec in s.modules:
                text = assemble(spec.asm).code if spec.asm is not None else _hex(spec.text or "")
                modules.append(ModuleBlob(spec.name, text, _hex(spec.data), spec.load_frames))
        user = user_from_asm(s.user_program) if s.user_program is not None else standard_user()
    except AsmError as exc:
        raise ScenarioInvalid(f"{s.name}: {exc}") from None
    except KeyError as exc:
        raise ScenarioInvalid(f"{s.name}: unresolved kernel symbol {exc}") from None
    return kernel, modules, user


class _Env:
    def __init__(self, s: Scenario, m: Machine, stats: BootStats):
        self.s = s
        self.m = m
        self.stats = stats
        self.symbols = stats.layout.symbols()
        self.symbols.update(CSR_NAMES)

    def expr(self, value: Expr) -> int:
        if isinstance(value, bool):
            raise ScenarioInvalid(f"{self.s.name}: expected an expression, got {value!r}")
        if isinstance(value, int):
            return value
        try:
            return evaluate(str(value), self.symbols)
        except KeyError as exc:
            raise ScenarioInvalid(f"{self.s.name}: unresolvable symbol {exc.args[0]!r}") from None
        except ValueError as exc:
            raise ScenarioInvalid(f"{self.s.name}: {exc}") from None

    def payload(self, obj) -> bytes:
        if (obj.bytes is None) == (obj.u64 is None):
            raise ScenarioInvalid(f"{self.s.name}: {type(obj).__name__} needs exactly one of bytes/u64")
        return _hex(obj.bytes) if obj.bytes is not None else _u64(self.expr(obj.u64))


def _validate_refs(env: _Env) -> None:
    """Resolve every expression up front so a bad scenario fails before it runs."""
    for item in [*env.s.exploit_steps, *env.s.expectations]:
        for f in fields(item):
            value = getattr(item, f.name)
            if f.name in ("bytes", "max_steps", "step", "cause", "verdict", "r", "w", "x", "u") or value is None:
                continue
            env.expr(value)
        if isinstance(item, (ArbitraryPhysWrite, MemEquals)):
            env.payload(item)
        if isinstance(item, PteCorrupt) and (item.vaddr is None) == (item.vpn is None):
            raise ScenarioInvalid(f"{env.s.name}: PteCorrupt needs exactly one of vaddr/vpn")
        if isinstance(item, TrapIs):
            try:
                TrapCause.parse(item.cause)
            except ValueError as exc:
                raise ScenarioInvalid(str(exc)) from None
        if isinstance(item, VerdictIs):
            try:
                AccessVerdict.parse(item.verdict)
            except ValueError as exc:
                raise ScenarioInvalid(str(exc)) from None


@dataclass
class StepObservation:
    op: str
    verdict: AccessVerdict | None = None
    run: RunResult | None = None


def _apply(env: _Env, step) -> StepObservation:
    m = env.m
    obs = StepObservation(type(step).__name__)
    if isinstance(step, ArbitraryPhysWrite):
        try:
            obs.verdict = m.physical_write(env.expr(step.paddr), env.payload(step), privileged=True)
        except BusError as exc:
            raise ScenarioInvalid(f"{env.s.name}: {exc}") from None
    elif isinstance(step, PteCorrupt):
        vpn = env.expr(step.vaddr) >> PAGE_SHIFT if step.vaddr is not None else env.expr(step.vpn)
        old = m.page_map.get(vpn)
        if step.paddr is not None:
            pfn = env.expr(step.paddr) >> PAGE_SHIFT
        elif step.pfn is not None:
            pfn = env.expr(step.pfn)
        elif old is not None:
            pfn = old.pfn
        else:
            raise ScenarioInvalid(f"{env.s.name}: PteCorrupt of unmapped vpn {vpn:#x} needs a frame")

        def pick(new, attr, default):
            if new is not None:
                return new
            return getattr(old, attr) if old is not None else default

        entry = PageEntry(
            pfn,
            readable=pick(step.r, "readable", True),
            writable=pick(step.w, "writable", False),
            executable=pick(step.x, "executable", False),
            user=pick(step.u, "user", False),
        )
        try:
            m.map_page(vpn, entry)
        except BusError as exc:
            raise ScenarioInvalid(f"{env.s.name}: {exc}") from None
        m.flush_tlb()
    elif isinstance(step, CsrWriteAsSupervisor):
        m.csr_write(env.expr(step.csr), env.expr(step.value))
    elif isinstance(step, MmioWrite):
        obs.verdict = m.physical_store(m.config.mmio_base + env.expr(step.offset), env.expr(step.value), privileged=True)
    elif isinstance(step, JumpSupervisor):
        m.mode = Mode.SUPERVISOR
        m.pc = env.expr(step.vaddr)
        obs.run = m.run(step.max_steps)
    elif isinstance(step, RunUser):
        m.mode = Mode.USER
        m.pc = env.user_entry
        obs.run = m.run(step.max_steps)
    return obs


def _pick(observations: list[StepObservation], step: int | None, attr: str):
    if step is not None:
        return getattr(observations[step], attr)
    for obs in reversed(observations):
        if getattr(obs, attr) is not None:
            return getattr(obs, attr)
    return None


def _evaluate(env: _Env, exp, observations: list[StepObservation], table_before: tuple) -> ExpectationResult:
    m = env.m
    kind = type(exp).__name__
    if isinstance(exp, TrapIs):
        run = _pick(observations, exp.step, "run")
        got = run.last_trap.label if run is not None and run.last_trap is not None else "none"
        expected = TrapCause.parse(exp.cause).label
        return ExpectationResult(kind, expected, got, got == expected)
    if isinstance(exp, VerdictIs):
        verdict = _pick(observations, exp.step, "verdict")
        expected = str(AccessVerdict.parse(exp.verdict))
        got = str(verdict) if verdict is not None else "none"
        return ExpectationResult(kind, expected, got, got == expected)
    if isinstance(exp, RunsToHalt):
        run = _pick(observations, exp.step, "run")
        got = run.status if run is not None else "none"
        return ExpectationResult(kind, "halted", got, got == "halted")
    if isinstance(exp, CsrEquals):
        number, want = env.expr(exp.csr), env.expr(exp.value)
        got = m.csr_read(number)
        return ExpectationResult(kind, f"{number:#x}={want:#x}", f"{number:#x}={got:#x}", got == want)
    if isinstance(exp, MemEquals):
        paddr, want = env.expr(exp.paddr), env.payload(exp)
        got = m.mem.read(paddr, len(want))
        return ExpectationResult(kind, f"{paddr:#x}:{want.hex()}", f"{paddr:#x}:{got.hex()}", got == want)
    if isinstance(exp, TableUnchanged):
        after = m.table.snapshot()
        starts, ends, flags, armed, locked = table_before
        changed = [i for i in range(len(starts)) if (starts[i], ends[i], flags[i]) != (after[0][i], after[1][i], after[2][i])]
        diffs = [f"entry {i}" for i in changed]
        if (armed, locked) != after[3:]:
            diffs.append("enforce")
        observed = "changed: " + ", ".join(diffs) if diffs else "unchanged"
        return ExpectationResult(kind, "unchanged", observed, not diffs)
    raise ScenarioInvalid(f"unknown expectation {kind}")


def run_scenario(
    s: Scenario,
    table_size: int | None = None,
    boot_overrides: dict | None = None,
    machine_config: MachineConfig | None = None,
) -> ScenarioReport:
    """Boot, apply the scenario steps in order and evaluate its expectations.

    Boot failures (``BootError``) propagate; a scenario that cannot be resolved
    raises :class:`ScenarioInvalid`.
    """
    s.validate()
    spec = s.boot
    if boot_overrides:
        spec = BootSpec(**{**asdict(spec), **boot_overrides})
    config = machine_config or MachineConfig()
    config.table_capacity = table_size or spec.table_size
    m = Machine(config)
    kernel, modules, user = build_images(Scenario(**{**s.__dict__, "boot": spec}))
    stats = load_and_boot(m, kernel, modules, spec.config(), user)
    env = _Env(s, m, stats)
    env.user_entry = user.entry
    _validate_refs(env)

    table_before = m.table.snapshot()
    observations = [_apply(env, step) for step in s.exploit_steps]
    results = [_evaluate(env, exp, observations, table_before) for exp in s.expectations]
    counters = {**m.counters(), "entries_used": stats.entries_used, "permission_writes": stats.permission_writes}
    return ScenarioReport(s.name, results, counters, all(r.passed for r in results))


# Standard suite --------------------------------------------------------------

HALT_HEX = encode(Op.HALT).to_bytes(4, "little").hex()

#: Lockdown steps that a mutation run switches off, one at a time.
MUTATIONS = ("arm_enforce", "lock_stvec", "seal_spare")

_HOOK_USER_ASM = """\
; Calls the syscall that jumps through the runtime-updatable pointer.
_start:
    li   r1, 3
    ecall
    halt
attack:
    halt
"""


def _standard_suite_dicts() -> list[dict]:
    text_head = standard_kernel().text[:16].hex()
    wp = "Deny(WriteProtected)"
    return [
        {
            "name": "syscall_table_hook",
            "description": "overwrite a syscall table slot with a user-space address",
            "exploit_steps": [
                {"op": "ArbitraryPhysWrite", "paddr": "pa.syscall_table", "u64": "user.attack"},
                {"op": "ArbitraryPhysWrite", "paddr": "pa.syscall_table+8", "u64": "user.attack"},
                {"op": "RunUser"},
            ],
            "expect": [
                {"kind": "VerdictIs", "verdict": wp, "step": 0},
                {"kind": "VerdictIs", "verdict": wp, "step": 1},
                {"kind": "MemEquals", "paddr": "pa.syscall_table", "u64": "sys_getflag"},
                {"kind": "RunsToHalt", "step": 2},
                {"kind": "MemEquals", "paddr": "pa.user_data", "u64": 0x5A5A},
            ],
        },
        {
            "name": "trap_vector_hijack",
            "description": "point stvec at user code, after trying to clear the lock",
            "exploit_steps": [
                {"op": "CsrWriteAsSupervisor", "csr": "stvec", "value": "user.attack"},
                {"op": "CsrWriteAsSupervisor", "csr": "lockctl", "value": 0},
                {"op": "CsrWriteAsSupervisor", "csr": "stvec", "value": "user.attack"},
                {"op": "RunUser"},
            ],
            "expect": [
                {"kind": "CsrEquals", "csr": "stvec", "value": "trap_entry"},
                {"kind": "CsrEquals", "csr": "lockctl", "value": 1},
                {"kind": "RunsToHalt", "step": 3},
                {"kind": "MemEquals", "paddr": "pa.user_data", "u64": 0x5A5A},
            ],
        },
        {
            "name": "text_patching",
            "description": "patch kernel and module text, also after trying to unlock the entry",
            "exploit_steps": [
                {"op": "ArbitraryPhysWrite", "paddr": "pa.kernel_text+sys_getflag-va.kernel_text", "bytes": HALT_HEX},
                {"op": "ArbitraryPhysWrite", "paddr": "pa.module_text", "bytes": HALT_HEX},
                {"op": "MmioWrite", "offset": "mmio.e0.flags", "value": 0xF},
                {"op": "ArbitraryPhysWrite", "paddr": "pa.kernel_text", "bytes": HALT_HEX},
                {"op": "RunUser"},
            ],
            "expect": [
                {"kind": "VerdictIs", "verdict": wp, "step": 0},
                {"kind": "VerdictIs", "verdict": wp, "step": 1},
                {"kind": "VerdictIs", "verdict": wp, "step": 3},
                {"kind": "TableUnchanged"},
                {"kind": "MemEquals", "paddr": "pa.kernel_text", "bytes": text_head},
                {"kind": "RunsToHalt", "step": 4},
            ],
        },
        {
            "name": "code_pointer_hook",
            "description": "redirect a writable kernel function pointer",
            "programs": {"user": _HOOK_USER_ASM},
            "exploit_steps": [
                {"op": "ArbitraryPhysWrite", "paddr": f"pa.kdata+{KDATA_HOOK}", "u64": "k_shutdown"},
                {"op": "RunUser"},
                {"op": "ArbitraryPhysWrite", "paddr": f"pa.kdata+{KDATA_HOOK}", "u64": "user.attack"},
                {"op": "RunUser"},
                {"op": "JumpSupervisor", "vaddr": "k_shutdown"},
                {"op": "JumpSupervisor", "vaddr": "user.attack"},
            ],
            "expect": [
                {"kind": "VerdictIs", "verdict": "Allow", "step": 0},
                {"kind": "RunsToHalt", "step": 1},
                {"kind": "TrapIs", "cause": "TableFaultFetch", "step": 3},
                {"kind": "RunsToHalt", "step": 4},
                {"kind": "TrapIs", "cause": "TableFaultFetch", "step": 5},
                {"kind": "MemEquals", "paddr": "pa.kdata", "u64": 0xD1E},
            ],
        },
        {
            "name": "dkom",
            "description": "unlink the process list; try to clear the signing flag",
            "exploit_steps": [
                {"op": "ArbitraryPhysWrite", "paddr": f"pa.kdata+{KDATA_PROCLIST}", "u64": 0},
                {"op": "ArbitraryPhysWrite", "paddr": "pa.config", "u64": 0},
                {"op": "RunUser"},
            ],
            "expect": [
                {"kind": "VerdictIs", "verdict": "Allow", "step": 0},
                {"kind": "MemEquals", "paddr": f"pa.kdata+{KDATA_PROCLIST}", "u64": 0},
                {"kind": "VerdictIs", "verdict": wp, "step": 1},
                {"kind": "MemEquals", "paddr": "pa.config", "u64": 1},
                {"kind": "RunsToHalt", "step": 2},
                {"kind": "MemEquals", "paddr": "pa.user_data", "u64": 0x5A5A},
            ],
        },
        {
            "name": "malicious_driver",
            "description": "load code into a free frame, claim a spare entry, map and run it",
            "exploit_steps": [
                {"op": "CsrWriteAsSupervisor", "csr": "sum", "value": 1},
                {"op": "ArbitraryPhysWrite", "paddr": "pa.free_frame", "bytes": HALT_HEX},
                {"op": "MmioWrite", "offset": "mmio.e7.start", "value": "pa.free_frame"},
                {"op": "MmioWrite", "offset": "mmio.e7.end", "value": "pa.free_frame+4096"},
                {"op": "MmioWrite", "offset": "mmio.e7.flags", "value": 0xF},
                {"op": "MmioWrite", "offset": "mmio.enforce", "value": 0},
                {"op": "PteCorrupt", "vaddr": "va.scratch", "paddr": "pa.free_frame", "r": True, "w": False, "x": True, "u": False},
                {"op": "JumpSupervisor", "vaddr": "va.scratch"},
            ],
            "expect": [
                {"kind": "VerdictIs", "verdict": "Allow", "step": 1},
                {"kind": "MemEquals", "paddr": "pa.free_frame", "bytes": HALT_HEX},
                {"kind": "TableUnchanged"},
                {"kind": "TrapIs", "cause": "TableFaultFetch", "step": 7},
            ],
        },
        {
            "name": "ret2usr",
            "description": "make a user page supervisor-executable and jump to it",
            "exploit_steps": [
                {"op": "PteCorrupt", "vaddr": "user.attack", "x": True, "u": False},
                {"op": "JumpSupervisor", "vaddr": "user.attack"},
            ],
            "expect": [
                {"kind": "TrapIs", "cause": "TableFaultFetch", "step": 1},
            ],
        },
        {
            "name": "jit_region",
            "description": "the JIT region stays writable and executable; text does not",
            "boot": {"jit_size": 16 << 10},
            "exploit_steps": [
                {"op": "ArbitraryPhysWrite", "paddr": "pa.jit", "bytes": HALT_HEX},
                {"op": "JumpSupervisor", "vaddr": "va.jit"},
                {"op": "ArbitraryPhysWrite", "paddr": "pa.kernel_text", "bytes": HALT_HEX},
                {"op": "JumpSupervisor", "vaddr": "user.attack"},
            ],
            "expect": [
                {"kind": "VerdictIs", "verdict": "Allow", "step": 0},
                {"kind": "RunsToHalt", "step": 1},
                {"kind": "VerdictIs", "verdict": wp, "step": 2},
                {"kind": "TrapIs", "cause": "TableFaultFetch", "step": 3},
            ],
        },
    ]


def standard_suite() -> list[Scenario]:
    """The eight attack scenarios, each expected to pass on a locked-down boot."""
    return [Scenario.from_dict(d) for d in _standard_suite_dicts()]


def run_suite(
    scenarios: list[Scenario] | None = None,
    table_size: int | None = None,
    boot_overrides: dict | None = None,
) -> list[ScenarioReport]:
    return [run_scenario(s, table_size, boot_overrides) for s in scenarios or standard_suite()]


def mutation_matrix(scenarios: list[Scenario] | None = None) -> dict[str, list[str]]:
    """Names of the scenarios that fail with each lockdown step disabled."""
    scenarios = scenarios or standard_suite()
    return {
        flag: [r.scenario for r in run_suite(scenarios, boot_overrides={flag: False}) if not r.passed]
        for flag in MUTATIONS
    }
