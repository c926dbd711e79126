"""Pure-Python permission-check kernel, used when the compiled one is absent."""

F_P, F_W, F_X, F_V = 1, 2, 4, 8
FETCH, LOAD, STORE = 0, 1, 2


def check(starts, ends, flags, armed, addr, kind, priv, sum_):
    if not armed:
        return 0
    eff = F_P | F_W | F_X
    matched = False
    for start, end, f in zip(starts, ends, flags):
        if f & F_V and start <= addr < end:
            eff &= f
            matched = True
    if not matched:
        eff = F_W

    if kind == STORE and not eff & F_W:
        return 1
    if kind != FETCH:
        if priv:
            return 4 if not eff & F_P and not sum_ else 0
        return 5 if eff & F_P else 0
    if priv:
        if not eff & F_P:
            return 3
        return 0 if eff & F_X else 2
    return 5 if eff & F_P else 0


def check_range(starts, ends, flags, armed, lo, hi, kind, priv, sum_):
    if not armed or hi <= lo:
        return bytearray(max(hi - lo, 0))
    # Tables are tiny; snapshot once so the per-address loop stays in Python lists.
    starts, ends, flags = list(starts), list(ends), list(flags)
    return bytearray(check(starts, ends, flags, True, a, kind, priv, sum_) for a in range(lo, hi))
