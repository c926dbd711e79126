"""Physical memory permission table.

A small fixed-capacity array of address ranges with privileged/write/execute
bits, programmed through an MMIO window and consulted on every access.
Entries and the enforce control word can be locked; a locked register ignores
writes until :meth:`PermissionTable.reset`.

MMIO layout (offsets from the window base, all words 64-bit little-endian)::

    entry i    base + 32*i   +0 start  +8 end  +16 flags  +24 reserved
    ENFORCE    base + 0x1000  bit0 arm, bit1 lock

Flag word bits: P=bit0, W=bit1, X=bit2, V=bit3, L=bit4.
"""

from __future__ import annotations

import enum
import math
from array import array
from dataclasses import dataclass

from . import _backend

FLAG_P = 1 << 0
FLAG_W = 1 << 1
FLAG_X = 1 << 2
FLAG_V = 1 << 3
FLAG_L = 1 << 4
FLAG_MASK = FLAG_P | FLAG_W | FLAG_X | FLAG_V | FLAG_L

ENTRY_STRIDE = 32
FIELD_START, FIELD_END, FIELD_FLAGS, FIELD_RESERVED = 0, 8, 16, 24
ENFORCE_OFFSET = 0x1000
ENFORCE_ARM = 1 << 0
ENFORCE_LOCK = 1 << 1
WINDOW_SIZE = ENFORCE_OFFSET + 8
DEFAULT_MMIO_BASE = 0xF000_0000

SUPPORTED_CAPACITIES = (4, 8, 16)
DEFAULT_CAPACITY = 8

#: Cycles available during the L1 tag-compare / data-select stage.
CACHE_TAG_WINDOW = 4
_COMPARATORS_PER_CYCLE = 6

_U64 = (1 << 64) - 1


class AccessKind(enum.IntEnum):
    FETCH = 0
    LOAD = 1
    STORE = 2


class DenyCause(enum.IntEnum):
    """Denial causes; the integer values are the kernel's verdict codes."""

    WRITE_PROTECTED = 1
    EXEC_DENIED = 2
    PRIV_FETCH_DENIED = 3
    PRIV_DATA_DENIED = 4
    USER_ACCESS_TO_PRIV_DENIED = 5

    @property
    def label(self) -> str:
        return _CAUSE_LABELS[self]


_CAUSE_LABELS = {
    DenyCause.WRITE_PROTECTED: "WriteProtected",
    DenyCause.EXEC_DENIED: "ExecDenied",
    DenyCause.PRIV_FETCH_DENIED: "PrivFetchDenied",
    DenyCause.PRIV_DATA_DENIED: "PrivDataDenied",
    DenyCause.USER_ACCESS_TO_PRIV_DENIED: "UserAccessToPrivDenied",
}
_LABEL_CAUSES = {v: k for k, v in _CAUSE_LABELS.items()}


@dataclass(frozen=True)
class AccessVerdict:
    """``Allow`` when ``cause`` is None, otherwise ``Deny(cause)``."""

    cause: DenyCause | None = None

    @property
    def allowed(self) -> bool:
        return self.cause is None

    @classmethod
    def from_code(cls, code: int) -> AccessVerdict:
        return ALLOW if code == 0 else _DENY[code]

    @property
    def code(self) -> int:
        return 0 if self.cause is None else int(self.cause)

    def __str__(self) -> str:
        return "Allow" if self.cause is None else f"Deny({self.cause.label})"

    @classmethod
    def parse(cls, text: str) -> AccessVerdict:
        text = text.strip()
        if text == "Allow":
            return ALLOW
        if text.startswith("Deny(") and text.endswith(")"):
            label = text[5:-1]
            if label in _LABEL_CAUSES:
                return cls(_LABEL_CAUSES[label])
        raise ValueError(f"not a verdict: {text!r}")


ALLOW = AccessVerdict()
_DENY = {int(c): AccessVerdict(c) for c in DenyCause}


@dataclass(frozen=True)
class PermissionEntry:
    start: int = 0
    end: int = 0
    priv: bool = False
    write: bool = False
    exec: bool = False
    valid: bool = False
    locked: bool = False

    @property
    def flags(self) -> int:
        return (
            FLAG_P * self.priv
            | FLAG_W * self.write
            | FLAG_X * self.exec
            | FLAG_V * self.valid
            | FLAG_L * self.locked
        )

    @classmethod
    def from_words(cls, start: int, end: int, flags: int) -> PermissionEntry:
        return cls(
            start,
            end,
            bool(flags & FLAG_P),
            bool(flags & FLAG_W),
            bool(flags & FLAG_X),
            bool(flags & FLAG_V),
            bool(flags & FLAG_L),
        )

    def contains(self, addr: int) -> bool:
        return self.valid and self.start <= addr < self.end


class MmioContractError(ValueError):
    """Misaligned or out-of-window MMIO offset."""


class PermissionTable:
    """Fixed-capacity permission table with lockable entries.

    Storage is three flat arrays so the compiled kernel can read them without
    copying.
    """

    def __init__(self, capacity: int = DEFAULT_CAPACITY):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self._capacity = capacity
        self.starts = array("Q", bytes(8 * capacity))
        self.ends = array("Q", bytes(8 * capacity))
        self.flags = array("B", bytes(capacity))
        self.enforce_armed = False
        self.enforce_locked = False

    @property
    def capacity(self) -> int:
        return self._capacity

    def __len__(self) -> int:
        return self._capacity

    def __getitem__(self, index: int) -> PermissionEntry:
        return PermissionEntry.from_words(self.starts[index], self.ends[index], self.flags[index])

    @property
    def entries(self) -> list[PermissionEntry]:
        return [self[i] for i in range(self._capacity)]

    def snapshot(self) -> tuple:
        """Hashable image of the full table state, for before/after comparisons."""
        return (
            tuple(self.starts),
            tuple(self.ends),
            tuple(self.flags),
            self.enforce_armed,
            self.enforce_locked,
        )

    def reset(self) -> None:
        for i in range(self._capacity):
            self.starts[i] = 0
            self.ends[i] = 0
            self.flags[i] = 0
        self.enforce_armed = False
        self.enforce_locked = False

    def _decode(self, offset: int) -> tuple[int | None, int]:
        if offset % 8:
            raise MmioContractError(f"unaligned MMIO offset {offset:#x}")
        if offset == ENFORCE_OFFSET:
            return None, 0
        index, field = divmod(offset, ENTRY_STRIDE)
        if not 0 <= index < self._capacity:
            raise MmioContractError(f"MMIO offset {offset:#x} outside the table window")
        return index, field

    def mmio_write(self, offset: int, value: int) -> None:
        index, field = self._decode(offset)
        value &= _U64
        if index is None:
            if not self.enforce_locked:
                self.enforce_armed = bool(value & ENFORCE_ARM)
                self.enforce_locked = bool(value & ENFORCE_LOCK)
            return
        if self.flags[index] & FLAG_L:
            return
        if field == FIELD_START:
            self.starts[index] = value
        elif field == FIELD_END:
            self.ends[index] = value
        elif field == FIELD_FLAGS:
            self.flags[index] = value & FLAG_MASK

    def mmio_read(self, offset: int) -> int:
        index, field = self._decode(offset)
        if index is None:
            return ENFORCE_ARM * self.enforce_armed | ENFORCE_LOCK * self.enforce_locked
        if field == FIELD_START:
            return self.starts[index]
        if field == FIELD_END:
            return self.ends[index]
        if field == FIELD_FLAGS:
            return self.flags[index]
        return 0

    def check(self, addr: int, kind: AccessKind, privileged_mode: bool, sum_enabled: bool = False) -> AccessVerdict:
        return check_access(self, addr, kind, privileged_mode, sum_enabled)


def entry_offset(index: int, field: int = FIELD_START) -> int:
    """MMIO offset of ``field`` within entry ``index``."""
    return index * ENTRY_STRIDE + field


def check_access(
    table: PermissionTable,
    addr: int,
    kind: AccessKind,
    privileged_mode: bool,
    sum_enabled: bool = False,
) -> AccessVerdict:
    """Decide one physical access against the table.

    Unmatched addresses default to a non-privileged, writable, non-executable
    region once the table is armed. Overlapping valid entries combine by
    bitwise AND. ``sum_enabled`` lets privileged *data* accesses reach
    non-privileged memory; it never affects fetches.
    """
    code = _backend.check(
        table.starts,
        table.ends,
        table.flags,
        table.enforce_armed,
        addr,
        int(kind),
        privileged_mode,
        sum_enabled,
    )
    return AccessVerdict.from_code(code)


def check_range(
    table: PermissionTable,
    lo: int,
    hi: int,
    kind: AccessKind,
    privileged_mode: bool,
    sum_enabled: bool = False,
) -> bytearray:
    """Verdict codes (see :class:`DenyCause`, 0 = allow) for every address in ``[lo, hi)``."""
    return _backend.check_range(
        table.starts,
        table.ends,
        table.flags,
        table.enforce_armed,
        lo,
        hi,
        int(kind),
        privileged_mode,
        sum_enabled,
    )


def mmio_write(table: PermissionTable, offset: int, value: int) -> None:
    table.mmio_write(offset, value)


def mmio_read(table: PermissionTable, offset: int) -> int:
    return table.mmio_read(offset)


def reset(table: PermissionTable) -> None:
    table.reset()


def lookup_latency_cycles(n_entries: int) -> int:
    """Cycles to search ``n_entries`` with a bank of six comparators per cycle."""
    if n_entries < 0:
        raise ValueError("n_entries must be non-negative")
    return math.ceil(n_entries / _COMPARATORS_PER_CYCLE)


def zero_overhead(n_entries: int, window: int = CACHE_TAG_WINDOW) -> bool:
    """True when the lookup fits inside the cache tag-compare window."""
    return lookup_latency_cycles(n_entries) <= window
