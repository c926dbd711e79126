from array import array

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracle
from neverland.perm_table import (
    ENFORCE_ARM,
    ENFORCE_LOCK,
    ENFORCE_OFFSET,
    FIELD_END,
    FIELD_FLAGS,
    FIELD_RESERVED,
    FIELD_START,
    FLAG_L,
    FLAG_P,
    FLAG_V,
    FLAG_W,
    FLAG_X,
    AccessKind,
    AccessVerdict,
    DenyCause,
    MmioContractError,
    PermissionEntry,
    PermissionTable,
    check_access,
    check_range,
    entry_offset,
    lookup_latency_cycles,
    mmio_read,
    mmio_write,
    reset,
    zero_overhead,
)

KINDS = list(AccessKind)
SPAN = 0x400


def program(table, index, start, end, flags):
    mmio_write(table, entry_offset(index, FIELD_START), start)
    mmio_write(table, entry_offset(index, FIELD_END), end)
    mmio_write(table, entry_offset(index, FIELD_FLAGS), flags)


def arm(table, lock=False):
    mmio_write(table, ENFORCE_OFFSET, ENFORCE_ARM | (ENFORCE_LOCK if lock else 0))


def table_of(entries, capacity=16, armed=True):
    t = PermissionTable(capacity)
    for i, (s, e, f) in enumerate(entries):
        program(t, i, s, e, f)
    if armed:
        arm(t)
    return t


entry_st = st.tuples(
    st.integers(0, SPAN), st.integers(0, SPAN), st.integers(0, 0x1F)
).map(lambda t: (min(t[0], t[1]), max(t[0], t[1]), t[2]))
entries_st = st.lists(entry_st, max_size=16)
access_st = st.tuples(st.integers(0, SPAN + 8), st.sampled_from(KINDS), st.booleans(), st.booleans())


def deny(cause):
    return AccessVerdict(cause)


class TestExamples:
    def test_kernel_text_store_is_write_protected(self):
        t = table_of([(0x8000_0000, 0x8020_0000, FLAG_P | FLAG_X | FLAG_V | FLAG_L)])
        assert check_access(t, 0x8000_1000, AccessKind.STORE, True, False) == deny(DenyCause.WRITE_PROTECTED)

    def test_unarmed_allows_everything(self):
        t = table_of([(0, 0x100, FLAG_V)], armed=False)
        for kind in KINDS:
            for priv in (False, True):
                assert check_access(t, 0x10, kind, priv).allowed

    def test_unmatched_privileged_fetch(self):
        t = table_of([])
        assert check_access(t, 0x5000, AccessKind.FETCH, True) == deny(DenyCause.PRIV_FETCH_DENIED)

    def test_overlap_is_most_restrictive(self):
        t = table_of([
            (0x1000, 0x3000, FLAG_P | FLAG_W | FLAG_X | FLAG_V),
            (0x2000, 0x4000, FLAG_P | FLAG_V),
        ])
        assert check_access(t, 0x1800, AccessKind.FETCH, True).allowed
        assert check_access(t, 0x2800, AccessKind.FETCH, True) == deny(DenyCause.EXEC_DENIED)
        assert check_access(t, 0x2800, AccessKind.STORE, True) == deny(DenyCause.WRITE_PROTECTED)

    def test_sum_override_applies_to_data(self):
        t = table_of([(0x9000_0000, 0x9001_0000, FLAG_W | FLAG_V)])
        assert check_access(t, 0x9000_0010, AccessKind.LOAD, True, True).allowed
        assert check_access(t, 0x9000_0010, AccessKind.LOAD, True, False) == deny(DenyCause.PRIV_DATA_DENIED)
        assert check_access(t, 0x9000_0010, AccessKind.FETCH, True, True) == deny(DenyCause.PRIV_FETCH_DENIED)

    def test_user_access_to_privileged_region(self):
        t = table_of([(0x1000, 0x2000, FLAG_P | FLAG_W | FLAG_X | FLAG_V)])
        for kind in KINDS:
            assert check_access(t, 0x1000, kind, False) == deny(DenyCause.USER_ACCESS_TO_PRIV_DENIED)
        assert check_access(t, 0x2000, AccessKind.LOAD, False).allowed

    def test_half_open_and_empty_ranges(self):
        t = table_of([(0x100, 0x100, FLAG_P | FLAG_X | FLAG_V), (0x200, 0x210, FLAG_P | FLAG_X | FLAG_V)])
        assert not check_access(t, 0x100, AccessKind.FETCH, True).allowed
        assert check_access(t, 0x20F, AccessKind.FETCH, True).allowed
        assert not check_access(t, 0x210, AccessKind.FETCH, True).allowed

    def test_invalid_entry_matches_nothing(self):
        t = table_of([(0, 0x1000, FLAG_P | FLAG_X)])
        assert check_access(t, 0x10, AccessKind.FETCH, True) == deny(DenyCause.PRIV_FETCH_DENIED)

    def test_verdict_text_round_trip(self):
        for v in [AccessVerdict(), *(deny(c) for c in DenyCause)]:
            assert AccessVerdict.parse(str(v)) == v
        assert str(deny(DenyCause.WRITE_PROTECTED)) == "Deny(WriteProtected)"
        with pytest.raises(ValueError):
            AccessVerdict.parse("Deny(Nope)")


class TestMmio:
    def test_locked_entry_ignores_writes(self):
        t = PermissionTable()
        program(t, 3, 0x1000, 0x2000, FLAG_P | FLAG_V | FLAG_L)
        mmio_write(t, entry_offset(3, FIELD_START), 0x9999)
        assert mmio_read(t, entry_offset(3, FIELD_START)) == 0x1000

    def test_unlocked_write_reads_back(self):
        t = PermissionTable()
        program(t, 1, 0x4000, 0x5000, FLAG_P | FLAG_X | FLAG_V)
        assert t[1] == PermissionEntry(0x4000, 0x5000, priv=True, write=False, exec=True, valid=True, locked=False)

    def test_sealed_entry_stays_invalid(self):
        t = PermissionTable()
        mmio_write(t, entry_offset(5, FIELD_FLAGS), FLAG_L)
        mmio_write(t, entry_offset(5, FIELD_FLAGS), FLAG_V)
        assert mmio_read(t, entry_offset(5, FIELD_FLAGS)) == FLAG_L

    def test_flag_word_masks_unknown_bits(self):
        t = PermissionTable()
        mmio_write(t, entry_offset(0, FIELD_FLAGS), 0xFFE0 | FLAG_V)
        assert mmio_read(t, entry_offset(0, FIELD_FLAGS)) == FLAG_V

    def test_reserved_field(self):
        t = PermissionTable()
        mmio_write(t, entry_offset(0, FIELD_RESERVED), 0x1234)
        assert mmio_read(t, entry_offset(0, FIELD_RESERVED)) == 0

    def test_enforce_read_after_arm_and_lock(self):
        t = PermissionTable()
        arm(t, lock=True)
        assert mmio_read(t, ENFORCE_OFFSET) == ENFORCE_ARM | ENFORCE_LOCK
        mmio_write(t, ENFORCE_OFFSET, 0)
        assert t.enforce_armed and t.enforce_locked

    def test_unlocked_enforce_can_be_disarmed(self):
        t = PermissionTable()
        arm(t)
        mmio_write(t, ENFORCE_OFFSET, 0)
        assert not t.enforce_armed

    def test_contract_errors(self):
        t = PermissionTable(4)
        with pytest.raises(MmioContractError):
            mmio_write(t, 3, 0)
        with pytest.raises(MmioContractError):
            mmio_read(t, entry_offset(4))

    def test_reset(self):
        t = PermissionTable()
        program(t, 0, 1, 2, FLAG_V | FLAG_L)
        arm(t, lock=True)
        reset(t)
        assert all(mmio_read(t, entry_offset(0, f)) == 0 for f in (FIELD_START, FIELD_END, FIELD_FLAGS))
        assert mmio_read(t, ENFORCE_OFFSET) == 0
        program(t, 0, 0x10, 0x20, FLAG_V)
        assert mmio_read(t, entry_offset(0, FIELD_START)) == 0x10
        snap = t.snapshot()
        reset(t)
        first = t.snapshot()
        reset(t)
        assert t.snapshot() == first != snap

    def test_capacity_fixed(self):
        for n in (4, 8, 16):
            assert PermissionTable(n).capacity == len(PermissionTable(n).entries) == n
        with pytest.raises(ValueError):
            PermissionTable(0)


class TestTiming:
    @pytest.mark.parametrize("n, cycles", [(0, 0), (1, 1), (6, 1), (7, 2), (8, 2), (16, 3), (24, 4), (25, 5)])
    def test_latency(self, n, cycles):
        assert lookup_latency_cycles(n) == cycles

    def test_zero_overhead_up_to_24(self):
        assert all(zero_overhead(n) for n in range(25))
        assert not zero_overhead(25)

    def test_monotone(self):
        values = [lookup_latency_cycles(n) for n in range(200)]
        assert values == sorted(values)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            lookup_latency_cycles(-1)


@given(entries_st, access_st)
def test_matches_oracle(entries, access):
    addr, kind, priv, sum_ = access
    t = table_of(entries)
    expected = oracle.verdict(entries, True, addr, int(kind), priv, sum_)
    assert check_access(t, addr, kind, priv, sum_).code == expected


@given(entries_st, st.integers(0, SPAN), st.sampled_from(KINDS), st.booleans(), st.booleans())
def test_range_matches_pointwise(entries, lo, kind, priv, sum_):
    t = table_of(entries)
    codes = check_range(t, lo, lo + 32, kind, priv, sum_)
    assert list(codes) == [check_access(t, a, kind, priv, sum_).code for a in range(lo, lo + 32)]


@pytest.fixture(scope="module", params=["cython", "python"])
def kernel_module(request):
    import importlib

    name = "neverland._kernel" if request.param == "cython" else "neverland._kernel_py"
    try:
        return importlib.import_module(name)
    except ImportError:
        pytest.skip("compiled kernel not built")


@given(entries=entries_st, access=access_st, armed=st.booleans())
def test_backends_agree(kernel_module, entries, access, armed):
    addr, kind, priv, sum_ = access
    starts = array("Q", [s for s, _, _ in entries])
    ends = array("Q", [e for _, e, _ in entries])
    flags = array("B", [f for _, _, f in entries])
    assert kernel_module.check(starts, ends, flags, armed, addr, int(kind), priv, sum_) == oracle.verdict(
        entries, armed, addr, int(kind), priv, sum_
    )
    assert list(kernel_module.check_range(starts, ends, flags, armed, addr, addr + 4, int(kind), priv, sum_)) == [
        oracle.verdict(entries, armed, a, int(kind), priv, sum_) for a in range(addr, addr + 4)
    ]


@given(entries_st, st.lists(st.tuples(st.integers(0, 0x1008 // 8), st.integers(0, 2**64 - 1)), max_size=40))
def test_lock_monotonicity(entries, writes):
    t = table_of(entries, armed=False)
    mmio_write(t, entry_offset(0, FIELD_FLAGS), t.flags[0] | FLAG_L)
    locked = {i: t[i] for i in range(t.capacity) if t.flags[i] & FLAG_L}
    for slot, value in writes:
        offset = slot * 8
        if offset < t.capacity * 32 or offset == ENFORCE_OFFSET:
            mmio_write(t, offset, value)
    for i, entry in locked.items():
        assert t[i] == entry


@given(entries_st, entry_st, access_st)
def test_adding_entry_never_relaxes_matched_address(entries, extra, access):
    addr, kind, priv, sum_ = access
    before = oracle.effective_bits(entries, addr)
    matched = any(f & FLAG_V and s <= addr < e for s, e, f in entries)
    v0 = check_access(table_of(entries), addr, kind, priv, sum_)
    v1 = check_access(table_of([*entries, extra]), addr, kind, priv, sum_)
    if matched and not v0.allowed:
        assert not v1.allowed, before


@given(entries_st, access_st)
def test_unarmed_transparent(entries, access):
    addr, kind, priv, sum_ = access
    assert check_access(table_of(entries, armed=False), addr, kind, priv, sum_).allowed


@given(entries_st, access_st)
def test_deterministic(entries, access):
    t = table_of(entries)
    assert check_access(t, *access) == check_access(t, *access)
