# cython: boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled permission-check kernel.

Same contract as ``_kernel_py``: tables are passed as three parallel buffers
(``uint64`` starts, ``uint64`` ends, ``uint8`` flag words) plus the armed bit.
Verdict codes: 0 allow, 1 write-protected, 2 exec denied, 3 privileged fetch
denied, 4 privileged data denied, 5 user access to privileged region.
"""

from libc.stdint cimport uint8_t, uint64_t

cdef enum:
    F_P = 1
    F_W = 2
    F_X = 4
    F_V = 8

cdef enum:
    FETCH = 0
    STORE = 2


cdef inline int _check(const uint64_t[:] starts, const uint64_t[:] ends,
                       const uint8_t[:] flags, Py_ssize_t n, uint64_t addr,
                       int kind, bint priv, bint sum_) noexcept nogil:
    cdef Py_ssize_t i
    cdef int eff = F_P | F_W | F_X
    cdef bint matched = False
    for i in range(n):
        if (flags[i] & F_V) and starts[i] <= addr and addr < ends[i]:
            eff &= flags[i]
            matched = True
    if not matched:
        eff = F_W

    if kind == STORE and not (eff & F_W):
        return 1
    if kind != FETCH:
        if priv:
            if not (eff & F_P) and not sum_:
                return 4
            return 0
        return 5 if eff & F_P else 0
    if priv:
        if not (eff & F_P):
            return 3
        if not (eff & F_X):
            return 2
        return 0
    return 5 if eff & F_P else 0


def check(const uint64_t[:] starts, const uint64_t[:] ends, const uint8_t[:] flags,
          bint armed, uint64_t addr, int kind, bint priv, bint sum_):
    if not armed:
        return 0
    return _check(starts, ends, flags, flags.shape[0], addr, kind, priv, sum_)


def check_range(const uint64_t[:] starts, const uint64_t[:] ends, const uint8_t[:] flags,
                bint armed, uint64_t lo, uint64_t hi, int kind, bint priv, bint sum_):
    """Verdict codes for every address in ``[lo, hi)`` as a bytearray."""
    cdef Py_ssize_t count = <Py_ssize_t>(hi - lo) if hi > lo else 0
    out = bytearray(count)
    if not armed or count == 0:
        return out
    cdef uint8_t[:] view = out
    cdef Py_ssize_t n = flags.shape[0]
    cdef Py_ssize_t j
    with nogil:
        for j in range(count):
            view[j] = <uint8_t>_check(starts, ends, flags, n, lo + <uint64_t>j, kind, priv, sum_)
    return out
