"""Trusted boot layer: load the kernel and modules, pack module text, lock down.

``load_and_boot`` runs host-side before any user code. It places the kernel
segments, loads every module at scattered frames, moves module text into one
physically contiguous pool (so a single table entry covers it), programs the
permission table over MMIO, seals spare entries, locks ``stvec``, arms
enforcement and drops to User mode.
"""

from __future__ import annotations

import heapq
from dataclasses import asdict, dataclass, field, replace

from .asm import assemble, evaluate
from .isa import CSR_LOCKCTL, CSR_STVEC, LOCKCTL_STVEC, MASK64
from .machine import PAGE_SHIFT, PAGE_SIZE, Machine, Mode, PageEntry
from .perm_table import (
    ENFORCE_ARM,
    ENFORCE_LOCK,
    ENFORCE_OFFSET,
    FIELD_END,
    FIELD_FLAGS,
    FIELD_START,
    FLAG_L,
    FLAG_P,
    FLAG_V,
    FLAG_W,
    FLAG_X,
    entry_offset,
    lookup_latency_cycles,
)

# Kernel virtual layout. Physical placement is packed; these slots are fixed.
KTEXT_VA = 0xC000_0000
KRODATA_VA = 0xC040_0000
KSYSCALL_VA = 0xC060_0000
KCONFIG_VA = 0xC070_0000
KDATA_VA = 0xC080_0000
JIT_VA = 0xC0C0_0000
SCRATCH_VA = 0xC0F0_0000
MODULE_VA = 0xD000_0000
USER_TEXT_VA = 0x0001_0000
USER_DATA_VA = 0x0004_0000


class BootError(Exception):
    pass


class TableBudgetExceeded(BootError):
    pass


class PoolTooSmall(BootError):
    pass


class AllocatorError(Exception):
    pass


class DoubleFree(AllocatorError):
    pass


def pages_for(size: int) -> int:
    return -(-size // PAGE_SIZE)


def pad_to_pages(data: bytes, minimum: int = 0) -> bytes:
    n = max(pages_for(len(data)), minimum)
    return data + bytes(n * PAGE_SIZE - len(data))


class FrameAllocator:
    """Free list of physical frame numbers over a fixed managed range."""

    def __init__(self, frames):
        self._managed = frozenset(frames)
        self._free = set(self._managed)
        self._heap = sorted(self._free)
        self.allocations = 0
        self.frees = 0
        self._scatter_cursor: int | None = None

    @property
    def free_count(self) -> int:
        return len(self._free)

    def is_free(self, frame: int) -> bool:
        return frame in self._free

    def free_frames(self) -> list[int]:
        return sorted(self._free)

    def alloc(self) -> int:
        while self._heap:
            frame = heapq.heappop(self._heap)
            if frame in self._free:
                self._free.discard(frame)
                self.allocations += 1
                return frame
        raise AllocatorError("out of frames")

    def alloc_specific(self, frames) -> list[int]:
        frames = list(frames)
        if len(set(frames)) != len(frames):
            raise AllocatorError("duplicate frame in request")
        missing = [f for f in frames if f not in self._free]
        if missing:
            raise AllocatorError(f"frames not free: {missing[:4]}")
        for f in frames:
            self._free.discard(f)
        self.allocations += len(frames)
        return frames

    def alloc_contiguous(self, count: int) -> int:
        """First frame of the lowest free run of ``count`` frames."""
        if count <= 0:
            raise ValueError("count must be positive")
        run_start, run_len, prev = None, 0, None
        for f in sorted(self._free):
            if prev is not None and f == prev + 1:
                run_len += 1
            else:
                run_start, run_len = f, 1
            prev = f
            if run_len == count:
                self.alloc_specific(range(run_start, run_start + count))
                return run_start
        raise AllocatorError(f"no contiguous run of {count} frames")

    def alloc_scattered(self, count: int, stride: int = 2) -> list[int]:
        """Non-adjacent frames walking down from the top of memory.

        A cursor persists across calls, so successive requests keep leaving
        ``stride - 1`` frame gaps instead of filling earlier holes.
        """
        if self._scatter_cursor is None:
            self._scatter_cursor = max(self._managed, default=0)
        picked = []
        frame = self._scatter_cursor
        floor = min(self._managed, default=0)
        while len(picked) < count and frame >= floor:
            if frame in self._free:
                picked.append(frame)
            frame -= stride
        if len(picked) < count:
            raise AllocatorError("out of frames for a scattered allocation")
        self._scatter_cursor = frame
        return self.alloc_specific(picked)

    def free(self, frame: int) -> None:
        if frame not in self._managed:
            raise AllocatorError(f"frame {frame:#x} not managed by this allocator")
        if frame in self._free:
            raise DoubleFree(f"frame {frame:#x} freed twice")
        self._free.add(frame)
        heapq.heappush(self._heap, frame)
        self.frees += 1


@dataclass
class KernelImage:
    text: bytes
    syscall_table: list[int]
    rodata: bytes = b""
    data: bytes = b""
    config_flags: bytes = b""
    entry_point: int = KTEXT_VA
    trap_vector: int = KTEXT_VA
    symbols: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        end = KTEXT_VA + len(self.text)
        for handler in self.syscall_table:
            if not KTEXT_VA <= handler < end:
                raise BootError(f"syscall handler {handler:#x} outside kernel text")


@dataclass
class ModuleBlob:
    name: str
    text: bytes
    data: bytes = b""
    load_frames: list[int] | None = None

    def __post_init__(self) -> None:
        if not self.text:
            raise BootError(f"module {self.name!r} has no text")
        self.text = pad_to_pages(self.text)
        self.data = pad_to_pages(self.data)
        if self.load_frames is not None and len(self.load_frames) != self.text_pages:
            raise BootError(f"module {self.name!r}: {len(self.load_frames)} frames for {self.text_pages} text pages")

    @property
    def text_pages(self) -> int:
        return len(self.text) // PAGE_SIZE


@dataclass
class UserImage:
    text: bytes
    data: bytes = b""
    data_pages: int = 4
    entry: int = USER_TEXT_VA
    symbols: dict[str, int] = field(default_factory=dict)


@dataclass
class BootConfig:
    table_entries: int | None = None
    pool_size: int = 2 << 20
    jit_size: int | None = None
    defrag_enabled: bool = True
    heap_size: int = 64 << 10
    flush_tlb: bool = True
    # Lockdown steps; switching one off is only meant for negative tests.
    arm_enforce: bool = True
    lock_stvec: bool = True
    seal_spare: bool = True


@dataclass
class LoadedModule:
    name: str
    text_va: int
    text_vpns: list[int]
    text_frames: list[int]
    data_va: int
    data_frames: list[int]


@dataclass
class ModuleDefragStats:
    name: str
    pages_copied: int
    pte_rewrites: int
    tlb_flushes: int


@dataclass
class DefragStats:
    pages_copied: int = 0
    pte_rewrites: int = 0
    tlb_flushes: int = 0
    frames_freed: int = 0
    pool_frames_freed: int = 0
    pool_first_frame: int = 0
    pool_frames_used: int = 0
    per_module: list[ModuleDefragStats] = field(default_factory=list)


@dataclass(frozen=True)
class Region:
    name: str
    pa: int
    size: int
    va: int | None = None

    @property
    def pa_end(self) -> int:
        return self.pa + self.size


@dataclass
class BootLayout:
    regions: dict[str, Region] = field(default_factory=dict)
    modules: list[LoadedModule] = field(default_factory=list)
    kernel_symbols: dict[str, int] = field(default_factory=dict)
    user_symbols: dict[str, int] = field(default_factory=dict)
    entries: list[tuple[str, int, int, int]] = field(default_factory=list)
    free_frame: int | None = None
    mmio_base: int = 0
    allocator: FrameAllocator | None = field(default=None, compare=False, repr=False)

    def symbols(self) -> dict[str, int]:
        """Flat namespace used by scenario expressions."""
        out = dict(self.kernel_symbols)
        out.update({f"user.{k}": v for k, v in self.user_symbols.items()})
        for r in self.regions.values():
            out[f"pa.{r.name}"] = r.pa
            out[f"size.{r.name}"] = r.size
            if r.va is not None:
                out[f"va.{r.name}"] = r.va
        for mod in self.modules:
            out[f"va.module.{mod.name}"] = mod.text_va
            out[f"pa.module.{mod.name}"] = mod.text_frames[0] << PAGE_SHIFT
        if self.free_frame is not None:
            out["pa.free_frame"] = self.free_frame << PAGE_SHIFT
        out["va.scratch"] = SCRATCH_VA
        out["mmio.base"] = self.mmio_base
        out["mmio.enforce"] = ENFORCE_OFFSET
        for i in range(64):
            out[f"mmio.e{i}.start"] = entry_offset(i, FIELD_START)
            out[f"mmio.e{i}.end"] = entry_offset(i, FIELD_END)
            out[f"mmio.e{i}.flags"] = entry_offset(i, FIELD_FLAGS)
        return out


@dataclass
class BootStats:
    permission_writes: int = 0
    pages_copied: int = 0
    pte_rewrites: int = 0
    tlb_flushes: int = 0
    frames_freed: int = 0
    pool_frames_freed: int = 0
    entries_used: int = 0
    table_capacity: int = 0
    lookup_latency_cycles: int = 0
    layout: BootLayout = field(default_factory=BootLayout, repr=False)

    def to_dict(self) -> dict[str, int]:
        d = asdict(self)
        d.pop("layout")
        return d


def _map_range(m: Machine, va: int, pa: int, size: int, **perms) -> None:
    for i in range(pages_for(size)):
        m.map_page((va >> PAGE_SHIFT) + i, PageEntry((pa >> PAGE_SHIFT) + i, **perms))


def load_modules(m: Machine, modules: list[ModuleBlob], alloc: FrameAllocator, heap: FrameAllocator) -> list[LoadedModule]:
    """Load modules the regular way: text at scattered frames, data in the kernel heap."""
    loaded = []
    va = MODULE_VA
    for mod in modules:
        n = mod.text_pages
        frames = alloc.alloc_specific(mod.load_frames) if mod.load_frames is not None else alloc.alloc_scattered(n)
        vpn0 = va >> PAGE_SHIFT
        for i, frame in enumerate(frames):
            m.mem.write(frame << PAGE_SHIFT, mod.text[i * PAGE_SIZE : (i + 1) * PAGE_SIZE])
            m.map_page(vpn0 + i, PageEntry(frame, readable=True, executable=True))
        data_va = va + len(mod.text)
        data_frames = []
        for i in range(len(mod.data) // PAGE_SIZE):
            try:
                frame = heap.alloc()
            except AllocatorError:
                raise BootError(f"kernel heap exhausted loading {mod.name!r}") from None
            m.mem.write(frame << PAGE_SHIFT, mod.data[i * PAGE_SIZE : (i + 1) * PAGE_SIZE])
            m.map_page((data_va >> PAGE_SHIFT) + i, PageEntry(frame, readable=True, writable=True))
            data_frames.append(frame)
        loaded.append(LoadedModule(mod.name, va, list(range(vpn0, vpn0 + n)), list(frames), data_va, data_frames))
        va = data_va + len(mod.data) + PAGE_SIZE  # guard page between modules
    return loaded


def defragment(
    m: Machine,
    modules: list[LoadedModule],
    pool_first: int,
    pool_frames: int,
    alloc: FrameAllocator,
    flush_tlb: bool = True,
) -> DefragStats:
    """Pack module text into the contiguous pool ``[pool_first, pool_first + pool_frames)``.

    Per module: copy each text page into the next pool frame, repoint its
    PTE, flush the TLB, free the old frames. Afterwards the unused pool tail
    goes back to ``alloc``. Virtual addresses do not change.
    """
    needed = sum(len(mod.text_frames) for mod in modules)
    if needed > pool_frames:
        raise PoolTooSmall(f"module text needs {needed} frames, pool has {pool_frames}")
    stats = DefragStats(pool_first_frame=pool_first)
    cursor = pool_first
    for mod in modules:
        copied = rewrites = flushes = 0
        old_frames = mod.text_frames
        new_frames = list(range(cursor, cursor + len(old_frames)))
        for vpn, old, new in zip(mod.text_vpns, old_frames, new_frames):
            m.mem.write(new << PAGE_SHIFT, m.mem.read(old << PAGE_SHIFT, PAGE_SIZE))
            copied += 1
            m.page_map[vpn] = replace(m.page_map[vpn], pfn=new)
            rewrites += 1
        if flush_tlb:
            m.flush_tlb()
            flushes += 1
        for old in old_frames:
            alloc.free(old)
            stats.frames_freed += 1
        mod.text_frames = new_frames
        cursor += len(old_frames)
        stats.pages_copied += copied
        stats.pte_rewrites += rewrites
        stats.tlb_flushes += flushes
        stats.per_module.append(ModuleDefragStats(mod.name, copied, rewrites, flushes))
    for frame in range(cursor, pool_first + pool_frames):
        alloc.free(frame)
        stats.pool_frames_freed += 1
    stats.pool_frames_used = cursor - pool_first
    return stats


def _runs(frames: list[int]) -> list[tuple[int, int]]:
    """Coalesce frame numbers into (first, count) runs."""
    runs: list[tuple[int, int]] = []
    for f in sorted(frames):
        if runs and runs[-1][0] + runs[-1][1] == f:
            runs[-1] = (runs[-1][0], runs[-1][1] + 1)
        else:
            runs.append((f, 1))
    return runs


def _table_locked(m: Machine) -> bool:
    return m.table.enforce_locked or any(f & FLAG_L for f in m.table.flags)


def load_and_boot(
    m: Machine,
    image: KernelImage,
    modules: list[ModuleBlob] | None = None,
    cfg: BootConfig | None = None,
    user: UserImage | None = None,
) -> BootStats:
    cfg = cfg or BootConfig()
    modules = modules or []
    if _table_locked(m) or m.table.enforce_armed:
        raise BootError("permission table already configured; reset the machine first")

    capacity = m.table.capacity
    budget = capacity if cfg.table_entries is None else min(cfg.table_entries, capacity)
    layout = BootLayout(kernel_symbols=dict(image.symbols), mmio_base=m.config.mmio_base)
    stats = BootStats(table_capacity=capacity, lookup_latency_cycles=lookup_latency_cycles(capacity), layout=layout)

    # Kernel segments, packed from the bottom of RAM.
    pa = m.config.ram_base
    ram_end = m.config.ram_base + m.config.ram_size
    syscall_bytes = b"".join(h.to_bytes(8, "little") for h in image.syscall_table)
    segments = [
        ("kernel_text", image.text, KTEXT_VA, dict(executable=True)),
        ("rodata", image.rodata, KRODATA_VA, {}),
        ("syscall_table", syscall_bytes, KSYSCALL_VA, {}),
        ("config", image.config_flags, KCONFIG_VA, {}),
    ]
    for name, content, va, perms in segments:
        padded = pad_to_pages(content, minimum=1)
        if pa + len(padded) > ram_end:
            raise BootError("kernel image does not fit in RAM")
        m.mem.write(pa, padded)
        _map_range(m, va, pa, len(padded), readable=True, **perms)
        layout.regions[name] = Region(name, pa, len(padded), va)
        pa += len(padded)

    data = pad_to_pages(image.data, minimum=1)
    heap_pages = pages_for(cfg.heap_size)
    kdata_size = len(data) + heap_pages * PAGE_SIZE
    if pa + kdata_size > ram_end:
        raise BootError("kernel data does not fit in RAM")
    m.mem.write(pa, data)
    _map_range(m, KDATA_VA, pa, len(data), readable=True, writable=True)
    layout.regions["kdata"] = Region("kdata", pa, kdata_size, KDATA_VA)
    heap = FrameAllocator(range((pa + len(data)) >> PAGE_SHIFT, (pa + kdata_size) >> PAGE_SHIFT))
    pa += kdata_size

    if cfg.jit_size:
        jit_size = pages_for(cfg.jit_size) * PAGE_SIZE
        _map_range(m, JIT_VA, pa, jit_size, readable=True, writable=True, executable=True)
        layout.regions["jit"] = Region("jit", pa, jit_size, JIT_VA)
        pa += jit_size

    alloc = FrameAllocator(range(pa >> PAGE_SHIFT, ram_end >> PAGE_SHIFT))

    # Step 1: reserve the contiguous pool before any module is loaded.
    pool_first = pool_frames = 0
    total_text = sum(mod.text_pages for mod in modules)
    if cfg.defrag_enabled:
        pool_frames = pages_for(cfg.pool_size)
        if total_text > pool_frames:
            raise PoolTooSmall(f"module text needs {total_text} pages, pool holds {pool_frames}")
        try:
            pool_first = alloc.alloc_contiguous(pool_frames)
        except AllocatorError:
            raise PoolTooSmall(f"cannot reserve a contiguous pool of {pool_frames} frames") from None

    loaded = load_modules(m, modules, alloc, heap)
    layout.modules = loaded
    if cfg.defrag_enabled:
        ds = defragment(m, loaded, pool_first, pool_frames, alloc, flush_tlb=cfg.flush_tlb)
        stats.pages_copied = ds.pages_copied
        stats.pte_rewrites = ds.pte_rewrites
        stats.tlb_flushes = ds.tlb_flushes
        stats.frames_freed = ds.frames_freed
        stats.pool_frames_freed = ds.pool_frames_freed
        module_runs = [(pool_first, ds.pool_frames_used)]
    else:
        module_runs = _runs([f for mod in loaded for f in mod.text_frames]) or [(0, 0)]
    first, count = module_runs[0]
    layout.regions["module_text"] = Region("module_text", first << PAGE_SHIFT, count << PAGE_SHIFT)

    if user is not None:
        text = pad_to_pages(user.text, minimum=1)
        for i in range(len(text) // PAGE_SIZE):
            frame = alloc.alloc()
            m.mem.write(frame << PAGE_SHIFT, text[i * PAGE_SIZE : (i + 1) * PAGE_SIZE])
            m.map_page((USER_TEXT_VA >> PAGE_SHIFT) + i, PageEntry(frame, readable=True, executable=True, user=True))
            if i == 0:
                layout.regions["user_text"] = Region("user_text", frame << PAGE_SHIFT, len(text), USER_TEXT_VA)
        data = pad_to_pages(user.data, minimum=user.data_pages)
        for i in range(len(data) // PAGE_SIZE):
            frame = alloc.alloc()
            m.mem.write(frame << PAGE_SHIFT, data[i * PAGE_SIZE : (i + 1) * PAGE_SIZE])
            m.map_page((USER_DATA_VA >> PAGE_SHIFT) + i, PageEntry(frame, readable=True, writable=True, user=True))
            if i == 0:
                layout.regions["user_data"] = Region("user_data", frame << PAGE_SHIFT, len(data), USER_DATA_VA)
        layout.user_symbols = dict(user.symbols)

    # Protected-region catalog, in table order.
    r = layout.regions
    ro_locked = FLAG_P | FLAG_V | FLAG_L
    catalog = [
        ("kernel_text", r["kernel_text"].pa, r["kernel_text"].pa_end, ro_locked | FLAG_X),
        ("rodata", r["rodata"].pa, r["rodata"].pa_end, ro_locked),
        ("syscall_table", r["syscall_table"].pa, r["syscall_table"].pa_end, ro_locked),
        ("config", r["config"].pa, r["config"].pa_end, ro_locked),
    ]
    for first, count in module_runs:
        start = first << PAGE_SHIFT
        catalog.append(("module_text", start, start + (count << PAGE_SHIFT), ro_locked | FLAG_X))
    catalog.append(("kdata", r["kdata"].pa, r["kdata"].pa_end, ro_locked | FLAG_W))
    if "jit" in r:
        catalog.append(("jit", r["jit"].pa, r["jit"].pa_end, ro_locked | FLAG_W | FLAG_X))
    if len(catalog) > budget:
        raise TableBudgetExceeded(f"protected-region catalog needs {len(catalog)} entries, table budget is {budget}")

    base = m.config.mmio_base

    def mmio(offset: int, value: int) -> None:
        m.physical_store(base + offset, value, privileged=True)
        stats.permission_writes += 1

    for index, (name, start, end, flags) in enumerate(catalog):
        mmio(entry_offset(index, FIELD_START), start)
        mmio(entry_offset(index, FIELD_END), end)
        mmio(entry_offset(index, FIELD_FLAGS), flags)
        layout.entries.append((name, start, end, flags))
    stats.entries_used = len(catalog)
    if cfg.seal_spare:
        for index in range(len(catalog), capacity):
            mmio(entry_offset(index, FIELD_FLAGS), FLAG_L)

    m.csr_write(CSR_STVEC, image.trap_vector)
    if cfg.lock_stvec:
        m.csr_write(CSR_LOCKCTL, LOCKCTL_STVEC)
    if cfg.arm_enforce:
        mmio(ENFORCE_OFFSET, ENFORCE_ARM | ENFORCE_LOCK)

    free = alloc.free_frames()
    layout.free_frame = free[-1] if free else None
    layout.allocator = alloc
    m.flush_tlb()
    m.mode = Mode.USER
    m.pc = user.entry if user is not None else 0
    return stats


# Standard preset ------------------------------------------------------------

#: Kernel data words: a counter, a function pointer the OS updates at runtime,
#: and a process-list head (the DKOM target).
KDATA_COUNTER = 0
KDATA_HOOK = 8
KDATA_PROCLIST = 16

SYS_GETFLAG, SYS_PUT, SYS_GET, SYS_HOOK = range(4)

STANDARD_KERNEL_ASM = """\
; Trap entry: stvec points here. r1 carries the syscall number.
trap_entry:
    csrr r13, scause
    bne  r13, r0, k_panic
    li   r14, SYSCALL_TABLE
    add  r15, r1, r1
    add  r15, r15, r15
    add  r15, r15, r15
    add  r14, r14, r15
    lw   r14, 0(r14)
    jalr r0, r14, 0
trap_return:
    csrr r13, sepc
    addi r13, r13, 4
    csrw sepc, r13
    sret
k_panic:
    halt

sys_getflag:                ; r2 <- driver signature enforcement flag
    li   r14, CONFIG_FLAGS
    lw   r2, 0(r14)
    jal  r0, trap_return
sys_put:                    ; kdata.counter <- r2
    li   r14, KDATA
    sw   r2, 0(r14)
    jal  r0, trap_return
sys_get:                    ; r2 <- kdata.counter
    li   r14, KDATA
    lw   r2, 0(r14)
    jal  r0, trap_return
sys_hook:                   ; call through the runtime-updatable pointer
    li   r14, KDATA
    lw   r14, 8(r14)
    jalr r0, r14, 0

k_shutdown:                 ; existing kernel routine: record and stop
    li   r14, KDATA
    li   r13, 0xD1E
    sw   r13, 0(r14)
    halt
"""

STANDARD_USER_ASM = """\
; Syscall round trip through the locked trap vector and syscall table.
_start:
    li   r1, 0
    ecall
    li   r3, 1
    bne  r2, r3, fail
    li   r1, 1
    li   r2, 0x5A5A
    ecall
    li   r2, 0
    li   r1, 2
    ecall
    li   r4, USER_DATA
    sw   r2, 0(r4)
    halt
fail:
    li   r4, USER_DATA
    li   r5, 0xBAD
    sw   r5, 0(r4)
    halt
attack:                     ; "injected" code living in a user page
    halt
"""

# (name, text pages, data pages) for the three preset modules.
STANDARD_MODULES = (("netdrv", 3, 1), ("blkdrv", 5, 1), ("fsmod", 2, 1))


def kernel_asm_symbols() -> dict[str, int]:
    return {
        "SYSCALL_TABLE": KSYSCALL_VA,
        "CONFIG_FLAGS": KCONFIG_VA,
        "KDATA": KDATA_VA,
        "JIT_BASE": JIT_VA,
        "USER_DATA": USER_DATA_VA,
    }


def build_kernel(
    asm_text: str,
    syscalls: list[str],
    rodata: bytes = b"",
    config_flags: bytes = b"",
    data: bytes | None = None,
    data_words: list[str] | None = None,
) -> KernelImage:
    """Assemble kernel text at the kernel base and derive the syscall table.

    ``data_words`` are expressions (labels allowed) packed as 64-bit words and
    prepended to ``data``.
    """
    prog = assemble(asm_text, KTEXT_VA, kernel_asm_symbols())
    symbols = {**kernel_asm_symbols(), **prog.symbols}
    body = b"".join((evaluate(w, symbols) & MASK64).to_bytes(8, "little") for w in data_words or [])
    return KernelImage(
        text=prog.code,
        syscall_table=[prog.symbols[name] for name in syscalls],
        rodata=rodata,
        data=body + (data or b""),
        config_flags=config_flags,
        entry_point=KTEXT_VA,
        trap_vector=prog.symbols.get("trap_entry", KTEXT_VA),
        symbols=prog.symbols,
    )


def standard_kernel() -> KernelImage:
    return build_kernel(
        STANDARD_KERNEL_ASM,
        ["sys_getflag", "sys_put", "sys_get", "sys_hook"],
        rodata=b"neverland-kernel\x00".ljust(64, b"\x00"),
        config_flags=(1).to_bytes(8, "little"),
        data_words=["0", "trap_return", "0x1000"],
    )


def _module_text(name: str, pages: int) -> bytes:
    # Recognisable per-page contents so copies can be verified byte for byte.
    stub = assemble("entry:\n    addi r2, r2, 1\n    jalr r0, r15, 0\n").code
    body = bytearray(pad_to_pages(stub, minimum=pages))
    tag = name.encode()
    for page in range(pages):
        off = page * PAGE_SIZE + 64
        body[off : off + len(tag) + 2] = tag + bytes([page & 0xFF, 0xA5])
    return bytes(body)


def standard_modules() -> list[ModuleBlob]:
    return [
        ModuleBlob(name, _module_text(name, text_pages), bytes(data_pages * PAGE_SIZE))
        for name, text_pages, data_pages in STANDARD_MODULES
    ]


def user_from_asm(asm_text: str, data: bytes = b"", data_pages: int = 4) -> UserImage:
    prog = assemble(asm_text, USER_TEXT_VA, {"USER_DATA": USER_DATA_VA})
    return UserImage(prog.code, data, data_pages, prog.symbols.get("_start", USER_TEXT_VA), prog.symbols)


def standard_user() -> UserImage:
    return user_from_asm(STANDARD_USER_ASM)
