"""Compare the compiled and pure-Python permission-check kernels.

    python benchmarks/bench_check.py [--tables N] [--window BYTES]
"""

import argparse
import importlib
import random
import time
from array import array


def random_table(rng, window, entries=16):
    starts, ends, flags = array("Q"), array("Q"), array("B")
    for _ in range(entries):
        a, b = sorted(rng.randrange(window) for _ in range(2))
        starts.append(a)
        ends.append(b)
        flags.append(rng.randrange(32))
    return starts, ends, flags


def bench(kernel, tables, window, calls):
    start = time.perf_counter()
    for starts, ends, flags in tables:
        kernel.check_range(starts, ends, flags, True, 0, window, 0, True, False)
    sweep = time.perf_counter() - start

    starts, ends, flags = tables[0]
    start = time.perf_counter()
    for addr in range(calls):
        kernel.check(starts, ends, flags, True, addr, 1, True, False)
    single = time.perf_counter() - start
    return len(tables) * window / sweep, calls / single


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--tables", type=int, default=4)
    parser.add_argument("--window", type=int, default=1 << 16)
    parser.add_argument("--calls", type=int, default=100_000)
    args = parser.parse_args()

    rng = random.Random(0)
    tables = [random_table(rng, args.window) for _ in range(args.tables)]
    results = {}
    for name in ("_kernel", "_kernel_py"):
        try:
            kernel = importlib.import_module(f"neverland.{name}")
        except ImportError:
            print(f"{name}: not available")
            continue
        results[name] = bench(kernel, tables, args.window, args.calls)
        sweep, single = results[name]
        print(f"{name:11} check_range {sweep / 1e6:8.2f} M addr/s   check {single / 1e6:6.2f} M calls/s")
    if len(results) == 2:
        fast, slow = results["_kernel"], results["_kernel_py"]
        print(f"speedup     check_range x{fast[0] / slow[0]:.0f}   check x{fast[1] / slow[1]:.1f}")


if __name__ == "__main__":
    main()
