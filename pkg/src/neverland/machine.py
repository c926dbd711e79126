"""Single-core toy CPU with paging, a lockable CSR file and the permission table.

Every instruction fetch, load and store is translated through the page map
(TLB first) and then checked against :class:`~neverland.perm_table.PermissionTable`
using the resulting physical address. Page faults are reported before table
faults. The table's MMIO window is reachable only in Supervisor mode and is
itself exempt from table checks; its own lock bits guard it.
"""

from __future__ import annotations

import enum
import os
from collections import Counter
from dataclasses import dataclass, field

from . import isa
from .isa import MASK64, Op
from .perm_table import (
    DEFAULT_CAPACITY,
    DEFAULT_MMIO_BASE,
    WINDOW_SIZE,
    AccessKind,
    AccessVerdict,
    DenyCause,
    MmioContractError,
    PermissionTable,
    check_range,
)

PAGE_SHIFT = 12
PAGE_SIZE = 1 << PAGE_SHIFT
PAGE_MASK = PAGE_SIZE - 1
TLB_SLOTS = 16

DEFAULT_RAM_BASE = 0x8000_0000
DEFAULT_RAM_SIZE = 16 << 20
DEFAULT_LOW_SIZE = 64 << 10


class Mode(enum.IntEnum):
    USER = 0
    SUPERVISOR = 1


class TrapCause(enum.IntEnum):
    SYSCALL = 0
    PAGE_FAULT_FETCH = 1
    PAGE_FAULT_LOAD = 2
    PAGE_FAULT_STORE = 3
    TABLE_FAULT_FETCH = 4
    TABLE_FAULT_LOAD = 5
    TABLE_FAULT_STORE = 6
    ILLEGAL_INSTRUCTION = 7

    @property
    def label(self) -> str:
        return "".join(part.capitalize() for part in self.name.split("_"))

    @classmethod
    def parse(cls, text: str) -> TrapCause:
        for cause in cls:
            if cause.label == text or cause.name == text:
                return cause
        raise ValueError(f"unknown trap cause {text!r}")


_PAGE_FAULT = {
    AccessKind.FETCH: TrapCause.PAGE_FAULT_FETCH,
    AccessKind.LOAD: TrapCause.PAGE_FAULT_LOAD,
    AccessKind.STORE: TrapCause.PAGE_FAULT_STORE,
}
_TABLE_FAULT = {
    AccessKind.FETCH: TrapCause.TABLE_FAULT_FETCH,
    AccessKind.LOAD: TrapCause.TABLE_FAULT_LOAD,
    AccessKind.STORE: TrapCause.TABLE_FAULT_STORE,
}


class StepKind(enum.Enum):
    CONTINUE = "Continue"
    HALTED = "Halted"
    TRAPPED = "Trapped"
    DOUBLE_FAULT = "DoubleFault"


@dataclass(frozen=True)
class StepOutcome:
    kind: StepKind
    cause: TrapCause | None = None

    def __str__(self) -> str:
        return f"{self.kind.value}({self.cause.label})" if self.cause is not None else self.kind.value


CONTINUE = StepOutcome(StepKind.CONTINUE)
HALTED = StepOutcome(StepKind.HALTED)


class Trap(Exception):
    """Architectural fault raised inside the interpreter."""

    def __init__(self, cause: TrapCause, verdict: AccessVerdict | None = None):
        super().__init__(cause.label)
        self.cause = cause
        self.verdict = verdict


class PageFault(Trap):
    pass


class BusError(Exception):
    """Physical address not backed by memory."""


@dataclass(frozen=True)
class PageEntry:
    pfn: int
    readable: bool = True
    writable: bool = False
    executable: bool = False
    user: bool = False

    def permits(self, kind: AccessKind, mode: Mode) -> bool:
        if mode == Mode.USER and not self.user:
            return False
        if kind == AccessKind.FETCH:
            return self.executable
        if kind == AccessKind.LOAD:
            return self.readable
        return self.writable


class PageMap(dict):
    """vpn -> :class:`PageEntry`. Stands in for the OS-managed page tables."""

    def map(self, vpn: int, entry: PageEntry) -> None:
        self[vpn] = entry

    def unmap(self, vpn: int) -> None:
        self.pop(vpn, None)


class Tlb:
    """Direct-mapped translation cache. Hits return the record cached at fill time."""

    def __init__(self, slots: int = TLB_SLOTS):
        self.slots: list[tuple[int, PageEntry] | None] = [None] * slots
        self.hits = self.misses = self.flushes = 0

    def lookup(self, vpn: int) -> PageEntry | None:
        slot = self.slots[vpn % len(self.slots)]
        if slot is not None and slot[0] == vpn:
            self.hits += 1
            return slot[1]
        self.misses += 1
        return None

    def fill(self, vpn: int, entry: PageEntry) -> None:
        self.slots[vpn % len(self.slots)] = (vpn, entry)

    def flush(self) -> None:
        self.slots = [None] * len(self.slots)
        self.flushes += 1


class UnknownCsr(KeyError):
    pass


class CsrFile:
    def __init__(self) -> None:
        self.reset()

    def reset(self) -> None:
        self.stvec = 0
        self.sepc = 0
        self.scause = 0
        self.sum = 0
        self.lockctl = 0

    def read(self, number: int) -> int:
        name = isa.CSR_BY_NUMBER.get(number)
        if name is None:
            raise UnknownCsr(number)
        return getattr(self, name)

    def write(self, number: int, value: int) -> None:
        value &= MASK64
        if number == isa.CSR_STVEC:
            if not self.lockctl & isa.LOCKCTL_STVEC:
                self.stvec = value
        elif number == isa.CSR_LOCKCTL:
            self.lockctl |= value
        elif number == isa.CSR_SUM:
            self.sum = value & 1
        elif number == isa.CSR_SEPC:
            self.sepc = value
        elif number == isa.CSR_SCAUSE:
            self.scause = value
        else:
            raise UnknownCsr(number)

    def snapshot(self) -> dict[str, int]:
        return {name: getattr(self, name) for name in isa.CSR_NAMES}


class PhysicalMemory:
    """Byte-addressed RAM regions: a low peripheral region and main RAM."""

    def __init__(self, ram_base: int, ram_size: int, low_size: int):
        self.regions = [(0, bytearray(low_size)), (ram_base, bytearray(ram_size))]

    def _locate(self, paddr: int, size: int) -> tuple[bytearray, int]:
        for base, buf in self.regions:
            if base <= paddr and paddr + size <= base + len(buf):
                return buf, paddr - base
        raise BusError(f"no memory at {paddr:#x}+{size}")

    def contains(self, paddr: int, size: int = 1) -> bool:
        return any(base <= paddr and paddr + size <= base + len(buf) for base, buf in self.regions)

    def read(self, paddr: int, size: int) -> bytes:
        buf, off = self._locate(paddr, size)
        return bytes(buf[off : off + size])

    def write(self, paddr: int, data: bytes) -> None:
        buf, off = self._locate(paddr, len(data))
        buf[off : off + len(data)] = data

    def clear(self) -> None:
        for _, buf in self.regions:
            buf[:] = bytes(len(buf))


def _default_mmio_base() -> int:
    env = os.environ.get("NEVERLAND_TABLE_BASE")
    return int(env, 16) if env else DEFAULT_MMIO_BASE


@dataclass
class MachineConfig:
    ram_base: int = DEFAULT_RAM_BASE
    ram_size: int = DEFAULT_RAM_SIZE
    low_size: int = DEFAULT_LOW_SIZE
    table_capacity: int = DEFAULT_CAPACITY
    mmio_base: int = field(default_factory=_default_mmio_base)


@dataclass(frozen=True)
class TrapRecord:
    cause: TrapCause
    pc: int
    double: bool


@dataclass
class RunResult:
    status: str  # "halted", "double_fault" or "step_limit"
    steps: int
    traps: list[TrapRecord]

    @property
    def last_trap(self) -> TrapCause | None:
        return self.traps[-1].cause if self.traps else None


class Machine:
    def __init__(self, config: MachineConfig | None = None):
        self.config = config or MachineConfig()
        c = self.config
        if c.mmio_base % 8:
            raise ValueError("MMIO base must be 8-byte aligned")
        self.mem = PhysicalMemory(c.ram_base, c.ram_size, c.low_size)
        self.table = PermissionTable(c.table_capacity)
        self.csr = CsrFile()
        self.page_map = PageMap()
        self.tlb = Tlb()
        self.gpr = [0] * isa.NUM_REGS
        self._reset_core()

    def _reset_core(self) -> None:
        self.gpr[:] = [0] * isa.NUM_REGS
        self.pc = 0
        self.mode = Mode.SUPERVISOR
        self.halted = False
        self.csr.reset()
        self.table.reset()
        self.tlb = Tlb()
        self.cycle_count = 0
        self.instret = 0
        self.lookup_count = 0
        self.translation_count = 0
        self.host_lookups = 0
        self.denial_counts: Counter[str] = Counter()
        self.trap_log: list[TrapRecord] = []

    def reset(self, cold: bool = False) -> None:
        """Reboot: the only way to clear table and CSR locks. Warm keeps RAM."""
        self._reset_core()
        if cold:
            self.mem.clear()
            self.page_map.clear()

    # registers

    def reg(self, index: int) -> int:
        return self.gpr[index]

    def set_reg(self, index: int, value: int) -> None:
        if index:
            self.gpr[index] = value & MASK64

    def csr_read(self, number: int) -> int:
        return self.csr.read(number)

    def csr_write(self, number: int, value: int) -> None:
        self.csr.write(number, value)

    # paging

    def flush_tlb(self) -> None:
        self.tlb.flush()

    def map_page(self, vpn: int, entry: PageEntry) -> None:
        frame = entry.pfn << PAGE_SHIFT
        device = frame < self.config.mmio_base + WINDOW_SIZE and self.config.mmio_base < frame + PAGE_SIZE
        if not device and not self.mem.contains(frame, PAGE_SIZE):
            raise BusError(f"pfn {entry.pfn:#x} outside physical memory")
        self.page_map.map(vpn, entry)

    def translate(self, vaddr: int, kind: AccessKind) -> int:
        vaddr &= MASK64
        vpn = vaddr >> PAGE_SHIFT
        entry = self.tlb.lookup(vpn)
        if entry is None:
            entry = self.page_map.get(vpn)
            if entry is None:
                raise PageFault(_PAGE_FAULT[kind])
            self.tlb.fill(vpn, entry)
        if not entry.permits(kind, self.mode):
            raise PageFault(_PAGE_FAULT[kind])
        self.translation_count += 1
        return entry.pfn << PAGE_SHIFT | vaddr & PAGE_MASK

    def read_virtual(self, vaddr: int, size: int) -> bytes:
        """Host debug read through the current translation, no table check."""
        out = bytearray()
        while size > 0:
            chunk = min(size, PAGE_SIZE - (vaddr & PAGE_MASK))
            vpn = vaddr >> PAGE_SHIFT
            entry = self.tlb.lookup(vpn) or self.page_map.get(vpn)
            if entry is None:
                raise PageFault(TrapCause.PAGE_FAULT_LOAD)
            out += self.mem.read(entry.pfn << PAGE_SHIFT | vaddr & PAGE_MASK, chunk)
            vaddr += chunk
            size -= chunk
        return bytes(out)

    # table checks

    def in_mmio(self, paddr: int, size: int = 1) -> bool:
        base = self.config.mmio_base
        return base <= paddr and paddr + size <= base + WINDOW_SIZE

    def table_verdict(self, paddr: int, size: int, kind: AccessKind, privileged: bool) -> AccessVerdict:
        """Most restrictive verdict over every byte of ``[paddr, paddr + size)``."""
        codes = check_range(self.table, paddr, paddr + size, kind, privileged, bool(self.csr.sum))
        for code in codes:
            if code:
                return AccessVerdict.from_code(code)
        return AccessVerdict.from_code(0)

    def _mmio_read(self, offset: int) -> int:
        try:
            return self.table.mmio_read(offset)
        except MmioContractError:
            return 0

    def _mmio_write(self, offset: int, value: int) -> None:
        try:
            self.table.mmio_write(offset, value)
        except MmioContractError:
            pass

    # interpreter memory path

    def _access(self, vaddr: int, size: int, kind: AccessKind) -> tuple[int, bool]:
        if vaddr % size:
            raise PageFault(_PAGE_FAULT[kind])
        paddr = self.translate(vaddr, kind)
        self.lookup_count += 1
        privileged = self.mode == Mode.SUPERVISOR
        if self.in_mmio(paddr, size):
            if kind == AccessKind.FETCH:
                raise Trap(_TABLE_FAULT[kind], AccessVerdict(DenyCause.PRIV_FETCH_DENIED))
            if not privileged:
                raise Trap(_TABLE_FAULT[kind], AccessVerdict(DenyCause.USER_ACCESS_TO_PRIV_DENIED))
            return paddr, True
        verdict = self.table_verdict(paddr, size, kind, privileged)
        if not verdict.allowed:
            self.denial_counts[verdict.cause.label] += 1
            raise Trap(_TABLE_FAULT[kind], verdict)
        if not self.mem.contains(paddr, size):
            raise PageFault(_PAGE_FAULT[kind])
        return paddr, False

    def check_virtual(self, vaddr: int, size: int, kind: AccessKind) -> AccessVerdict:
        """Translate and check as the interpreter would, without touching memory.

        Page-map violations still raise :class:`PageFault`.
        """
        try:
            self._access(vaddr, size, kind)
        except PageFault:
            raise
        except Trap as trap:
            return trap.verdict
        return AccessVerdict()

    def _fetch32(self, vaddr: int) -> int:
        paddr, _ = self._access(vaddr, isa.WORD, AccessKind.FETCH)
        return int.from_bytes(self.mem.read(paddr, isa.WORD), "little")

    def load64(self, vaddr: int) -> int:
        paddr, mmio = self._access(vaddr, 8, AccessKind.LOAD)
        if mmio:
            return self._mmio_read(paddr - self.config.mmio_base)
        return int.from_bytes(self.mem.read(paddr, 8), "little")

    def store64(self, vaddr: int, value: int) -> None:
        paddr, mmio = self._access(vaddr, 8, AccessKind.STORE)
        if mmio:
            self._mmio_write(paddr - self.config.mmio_base, value)
        else:
            self.mem.write(paddr, (value & MASK64).to_bytes(8, "little"))

    # host-side physical path (boot code and exploit primitives)

    def _host_privileged(self, privileged: bool | None) -> bool:
        return self.mode == Mode.SUPERVISOR if privileged is None else privileged

    def physical_write(self, paddr: int, data: bytes, privileged: bool | None = None) -> AccessVerdict:
        """Store bypassing paging but not the table. Returns the table verdict."""
        priv = self._host_privileged(privileged)
        self.host_lookups += 1
        if self.in_mmio(paddr, len(data)):
            if not priv:
                return AccessVerdict(DenyCause.USER_ACCESS_TO_PRIV_DENIED)
            if len(data) != 8 or paddr % 8:
                raise MmioContractError(f"MMIO writes are aligned 64-bit words ({paddr:#x}+{len(data)})")
            self._mmio_write(paddr - self.config.mmio_base, int.from_bytes(data, "little"))
            return AccessVerdict()
        verdict = self.table_verdict(paddr, len(data), AccessKind.STORE, priv)
        if verdict.allowed:
            self.mem.write(paddr, data)
        return verdict

    def physical_read(self, paddr: int, size: int, privileged: bool | None = None) -> tuple[AccessVerdict, bytes | None]:
        priv = self._host_privileged(privileged)
        self.host_lookups += 1
        if self.in_mmio(paddr, size):
            if not priv:
                return AccessVerdict(DenyCause.USER_ACCESS_TO_PRIV_DENIED), None
            if size != 8 or paddr % 8:
                raise MmioContractError(f"MMIO reads are aligned 64-bit words ({paddr:#x}+{size})")
            return AccessVerdict(), self._mmio_read(paddr - self.config.mmio_base).to_bytes(8, "little")
        verdict = self.table_verdict(paddr, size, AccessKind.LOAD, priv)
        if not verdict.allowed:
            return verdict, None
        return verdict, self.mem.read(paddr, size)

    def physical_store(self, paddr: int, value: int, privileged: bool | None = None) -> AccessVerdict:
        return self.physical_write(paddr, (value & MASK64).to_bytes(8, "little"), privileged)

    def physical_load(self, paddr: int, privileged: bool | None = None) -> tuple[AccessVerdict, int | None]:
        verdict, data = self.physical_read(paddr, 8, privileged)
        return verdict, None if data is None else int.from_bytes(data, "little")

    # execution

    def _take_trap(self, cause: TrapCause, pc: int) -> StepOutcome:
        double = self.mode == Mode.SUPERVISOR
        self.trap_log.append(TrapRecord(cause, pc, double))
        if double:
            self.halted = True
            return StepOutcome(StepKind.DOUBLE_FAULT, cause)
        self.csr.sepc = pc
        self.csr.scause = int(cause)
        self.mode = Mode.SUPERVISOR
        self.pc = self.csr.stvec
        return StepOutcome(StepKind.TRAPPED, cause)

    def step(self) -> StepOutcome:
        if self.halted:
            return HALTED
        self.cycle_count += 1
        pc = self.pc
        try:
            word = self._fetch32(pc)
            op, a, b, c = isa.fields(word)
            x = self.gpr
            if op == Op.LI:
                lo = self._fetch32(pc + 4)
                hi = self._fetch32(pc + 8)
                self.set_reg(a, hi << 32 | lo)
                self.pc = pc + isa.LI_SIZE
            elif op == Op.ADD:
                self.set_reg(a, x[b] + x[c])
                self.pc = pc + 4
            elif op == Op.ADDI:
                self.set_reg(a, x[b] + isa.imm16(word))
                self.pc = pc + 4
            elif op == Op.LW:
                self.set_reg(a, self.load64(x[b] + isa.imm16(word)))
                self.pc = pc + 4
            elif op == Op.SW:
                self.store64(x[b] + isa.imm16(word), x[a])
                self.pc = pc + 4
            elif op == Op.BEQ:
                self.pc = (pc + isa.imm16(word)) & MASK64 if x[a] == x[b] else pc + 4
            elif op == Op.BNE:
                self.pc = (pc + isa.imm16(word)) & MASK64 if x[a] != x[b] else pc + 4
            elif op == Op.JAL:
                self.set_reg(a, pc + 4)
                self.pc = (pc + isa.imm20(word)) & MASK64
            elif op == Op.JALR:
                target = (x[b] + isa.imm16(word)) & MASK64
                self.set_reg(a, pc + 4)
                self.pc = target
            elif op == Op.ECALL:
                self.instret += 1
                return self._take_trap(TrapCause.SYSCALL, pc)
            elif op == Op.SRET:
                if self.mode != Mode.SUPERVISOR:
                    raise Trap(TrapCause.ILLEGAL_INSTRUCTION)
                self.mode = Mode.USER
                self.pc = self.csr.sepc
            elif op in (Op.CSRR, Op.CSRW):
                if self.mode != Mode.SUPERVISOR:
                    raise Trap(TrapCause.ILLEGAL_INSTRUCTION)
                number = isa.csr_field(word)
                try:
                    if op == Op.CSRR:
                        self.set_reg(a, self.csr.read(number))
                    else:
                        self.csr.write(number, x[b])
                except UnknownCsr:
                    raise Trap(TrapCause.ILLEGAL_INSTRUCTION) from None
                self.pc = pc + 4
            elif op == Op.HALT:
                self.halted = True
                self.instret += 1
                return HALTED
            else:
                raise Trap(TrapCause.ILLEGAL_INSTRUCTION)
        except Trap as trap:
            return self._take_trap(trap.cause, pc)
        self.instret += 1
        return CONTINUE

    def run(self, max_steps: int = 100_000) -> RunResult:
        """Step until halt, double fault or ``max_steps``. Resumes a halted machine."""
        self.halted = False
        first_trap = len(self.trap_log)
        steps = 0
        status = "step_limit"
        while steps < max_steps:
            outcome = self.step()
            steps += 1
            if outcome.kind == StepKind.HALTED:
                status = "halted"
                break
            if outcome.kind == StepKind.DOUBLE_FAULT:
                status = "double_fault"
                break
        return RunResult(status, steps, self.trap_log[first_trap:])

    def counters(self) -> dict[str, int]:
        return {
            "cycles": self.cycle_count,
            "instret": self.instret,
            "lookups": self.lookup_count,
            "translations": self.translation_count,
            "host_lookups": self.host_lookups,
            "tlb_flushes": self.tlb.flushes,
            "denials": sum(self.denial_counts.values()),
        }


# Function-style entry points mirroring the machine operations.

def step(m: Machine) -> StepOutcome:
    return m.step()


def translate(m: Machine, vaddr: int, kind: AccessKind) -> int:
    return m.translate(vaddr, kind)


def csr_write(m: Machine, number: int, value: int) -> None:
    m.csr_write(number, value)


def csr_read(m: Machine, number: int) -> int:
    return m.csr_read(number)


def physical_store(m: Machine, paddr: int, value: int, privileged: bool | None = None) -> AccessVerdict:
    return m.physical_store(paddr, value, privileged)


def physical_load(m: Machine, paddr: int, privileged: bool | None = None) -> tuple[AccessVerdict, int | None]:
    return m.physical_load(paddr, privileged)


def reset_machine(m: Machine, cold: bool = False) -> None:
    m.reset(cold)
