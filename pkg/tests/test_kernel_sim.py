import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from defrag_util import random_modules, run_trial
from neverland.isa import CSR_LOCKCTL, CSR_STVEC
from neverland.kernel_sim import (
    KTEXT_VA,
    MODULE_VA,
    BootConfig,
    BootError,
    DoubleFree,
    AllocatorError,
    FrameAllocator,
    ModuleBlob,
    PoolTooSmall,
    TableBudgetExceeded,
    defragment,
    load_and_boot,
    load_modules,
    standard_kernel,
    standard_modules,
    standard_user,
)
from neverland.machine import PAGE_SHIFT, PAGE_SIZE, Machine, MachineConfig, Mode
from neverland.perm_table import (
    ENFORCE_OFFSET,
    FLAG_L,
    FLAG_P,
    FLAG_V,
    FLAG_W,
    FLAG_X,
    AccessKind,
    check_range,
)


def boot(modules=None, cfg=None, capacity=8, user=True):
    m = Machine(MachineConfig(table_capacity=capacity))
    mods = standard_modules() if modules is None else modules
    stats = load_and_boot(m, standard_kernel(), mods, cfg or BootConfig(), standard_user() if user else None)
    return m, stats


def test_standard_boot_locks_everything():
    m, stats = boot()
    assert stats.entries_used <= 8
    assert all(e.locked for e in m.table.entries)
    assert m.table.enforce_armed and m.table.enforce_locked
    assert m.csr_read(CSR_LOCKCTL) & 1 and m.csr_read(CSR_STVEC) == standard_kernel().trap_vector
    assert m.mode == Mode.USER and m.pc == standard_user().entry
    assert stats.pages_copied == stats.pte_rewrites == 10
    assert stats.tlb_flushes == 3
    assert stats.frames_freed == 10
    assert stats.lookup_latency_cycles == 2


def test_user_program_round_trip():
    m, stats = boot()
    result = m.run(10_000)
    assert result.status == "halted"
    assert [t.cause.label for t in result.traps] == ["Syscall"] * 3
    user_data = stats.layout.regions["user_data"].pa
    assert m.mem.read(user_data, 8) == (0x5A5A).to_bytes(8, "little")
    assert m.lookup_count == m.translation_count


@given(st.lists(st.tuples(st.integers(0, 0x1000 // 8), st.integers(0, 2**64 - 1)), max_size=30))
def test_post_boot_mmio_writes_change_nothing(writes):
    m, _ = boot(user=False)
    before = m.table.snapshot()
    base = m.config.mmio_base
    for slot, value in [*writes, (ENFORCE_OFFSET // 8, 0)]:
        offset = slot * 8
        if offset < 8 * 32 or offset == ENFORCE_OFFSET:
            m.physical_store(base + offset, value, privileged=True)
    assert m.table.snapshot() == before


def test_zero_modules_uses_six_entries():
    m, stats = boot(modules=[])
    assert stats.entries_used == 6
    assert stats.pages_copied == 0
    assert stats.pool_frames_freed == BootConfig().pool_size // PAGE_SIZE
    sealed = m.table.entries[6:]
    assert all(e.locked and not e.valid for e in sealed)


def test_jit_region_adds_an_entry():
    m, stats = boot(cfg=BootConfig(jit_size=8192))
    assert stats.entries_used == 7
    jit = stats.layout.regions["jit"]
    name, start, end, flags = stats.layout.entries[-1]
    assert (name, start, end) == ("jit", jit.pa, jit.pa_end)
    assert flags == FLAG_P | FLAG_W | FLAG_X | FLAG_V | FLAG_L


def test_table_budget():
    with pytest.raises(TableBudgetExceeded):
        boot(capacity=4)
    with pytest.raises(TableBudgetExceeded):
        boot(cfg=BootConfig(table_entries=5))


def test_without_defrag_scattered_text_overflows_table():
    with pytest.raises(TableBudgetExceeded):
        boot(cfg=BootConfig(defrag_enabled=False))
    m, stats = boot(modules=[ModuleBlob("one", b"\x0e" * 4)], cfg=BootConfig(defrag_enabled=False))
    assert stats.pages_copied == 0 and stats.entries_used == 6


def test_pool_too_small():
    with pytest.raises(PoolTooSmall):
        boot(cfg=BootConfig(pool_size=4 * PAGE_SIZE))


def test_boot_requires_fresh_table():
    m, _ = boot(user=False)
    with pytest.raises(BootError):
        load_and_boot(m, standard_kernel(), [], BootConfig())
    m.reset(cold=True)
    load_and_boot(m, standard_kernel(), [], BootConfig())


def test_catalog_coverage():
    m, stats = boot(cfg=BootConfig(jit_size=4096))
    r = stats.layout.regions
    t = m.table

    def all_codes(region, kind, priv):
        return set(check_range(t, r[region].pa, r[region].pa_end, kind, priv))

    for region in ("kernel_text", "module_text"):
        assert all_codes(region, AccessKind.FETCH, True) == {0}
        assert all_codes(region, AccessKind.STORE, True) == {1}
    for region in ("rodata", "syscall_table", "config"):
        assert all_codes(region, AccessKind.STORE, True) == {1}
        assert all_codes(region, AccessKind.LOAD, False) == {5}
        assert all_codes(region, AccessKind.LOAD, True) == {0}
    assert all_codes("kdata", AccessKind.STORE, True) == {0}
    assert all_codes("kdata", AccessKind.FETCH, True) == {2}

    allowed = [(r[n].pa, r[n].pa_end) for n in ("kernel_text", "module_text", "jit")]
    for e in t.entries:
        if e.valid and e.priv and e.exec and e.start < e.end:
            assert any(lo <= e.start and e.end <= hi for lo, hi in allowed)


def test_boot_is_deterministic():
    a, sa = boot()
    b, sb = boot()
    assert sa == sb
    assert a.table.snapshot() == b.table.snapshot()
    assert dict(a.page_map) == dict(b.page_map)
    assert a.mem.regions == b.mem.regions
    assert (a.pc, a.mode, a.csr.snapshot()) == (b.pc, b.mode, b.csr.snapshot())


def test_module_text_virtually_unchanged_after_boot():
    m, stats = boot()
    for blob, mod in zip(standard_modules(), stats.layout.modules):
        assert m.read_virtual(mod.text_va, len(blob.text)) == blob.text
    frames = [f for mod in stats.layout.modules for f in mod.text_frames]
    assert frames == list(range(frames[0], frames[0] + len(frames)))
    assert stats.layout.modules[0].text_va == MODULE_VA


def test_zero_module_defrag():
    t = run_trial([], slack=16)
    assert t.ok_bytes and t.contiguous and t.accounting
    assert t.stats.pages_copied == 0 and t.stats.pool_frames_freed == 16


def test_interleaved_three_modules():
    rng = random.Random(3)
    t = run_trial(random_modules(rng, 3, 6), rng)
    assert t.ok_bytes and t.contiguous and t.accounting


@pytest.mark.parametrize("kib", [128, 256, 512, 1024])
def test_single_module_counts(kib):
    t = run_trial([ModuleBlob("big", bytes(kib << 10))])
    pages = (kib << 10) // PAGE_SIZE
    assert (t.stats.pages_copied, t.stats.pte_rewrites, t.stats.tlb_flushes) == (pages, pages, 1)


@given(st.integers(0, 2**32))
def test_random_module_sets(seed):
    rng = random.Random(seed)
    t = run_trial(random_modules(rng, rng.randint(1, 6), 8), rng, slack=rng.randint(0, 4))
    assert t.ok_bytes and t.contiguous and t.accounting


def test_no_flush_leaves_stale_translations():
    m = Machine()
    alloc = FrameAllocator(range(0x80100, 0x80400))
    heap = FrameAllocator(range(0x80000, 0x80020))
    pool = alloc.alloc_contiguous(16)
    loaded = load_modules(m, standard_modules(), alloc, heap)
    old = m.translate(loaded[0].text_va, AccessKind.LOAD)
    defragment(m, loaded, pool, 16, alloc, flush_tlb=False)
    assert m.translate(loaded[0].text_va, AccessKind.LOAD) == old
    m.flush_tlb()
    assert m.translate(loaded[0].text_va, AccessKind.LOAD) == pool << PAGE_SHIFT


def test_allocator():
    a = FrameAllocator(range(10, 20))
    assert a.alloc_contiguous(3) == 10
    assert a.alloc() == 13
    a.free(13)
    with pytest.raises(DoubleFree):
        a.free(13)
    with pytest.raises(AllocatorError):
        a.free(99)
    with pytest.raises(AllocatorError):
        a.alloc_contiguous(20)
    assert a.alloc_scattered(2) == [19, 17]
    assert a.alloc_scattered(2) == [15, 13]
    assert a.free_count == 10 - 3 - 4


def test_kernel_image_validation():
    from neverland.kernel_sim import KernelImage

    with pytest.raises(BootError):
        KernelImage(text=b"\0" * 8, syscall_table=[KTEXT_VA + 0x100])
    with pytest.raises(BootError):
        ModuleBlob("empty", b"")
    with pytest.raises(BootError):
        ModuleBlob("bad", bytes(PAGE_SIZE), load_frames=[1, 2])
