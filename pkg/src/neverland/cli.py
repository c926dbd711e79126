"""``neverland`` command-line front end."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .asm import AsmError, assemble
from .harness import ScenarioInvalid, ScenarioReport, run_scenario, standard_suite
from .isa import disassemble
from .kernel_sim import BootConfig, BootError, load_and_boot, standard_kernel, standard_modules, standard_user
from .machine import Machine, MachineConfig
from .scenario_file import dump_scenario, load_scenario

EXIT_OK, EXIT_MISMATCH, EXIT_ERROR = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_ERROR)


def _emit(reports: list[ScenarioReport], fmt: str, single: bool) -> None:
    if fmt == "json":
        payload = reports[0].to_dict() if single else [r.to_dict() for r in reports]
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for r in reports:
            print(r.to_text())
        if not single:
            print(f"{sum(r.passed for r in reports)}/{len(reports)} scenarios passed")


def cmd_run(args) -> int:
    report = run_scenario(load_scenario(args.scenario), table_size=args.table_size)
    _emit([report], args.report, single=True)
    return EXIT_OK if report.passed else EXIT_MISMATCH


def cmd_suite(args) -> int:
    scenarios = standard_suite()
    if args.only:
        known = {s.name for s in scenarios}
        missing = sorted(set(args.only) - known)
        if missing:
            raise ScenarioInvalid(f"unknown scenario(s) {missing}; known: {sorted(known)}")
        scenarios = [s for s in scenarios if s.name in args.only]
    if args.dump:
        out = Path(args.dump)
        out.mkdir(parents=True, exist_ok=True)
        for s in scenarios:
            (out / f"{s.name}.json").write_text(dump_scenario(s))
    sizes = [args.table_size] * len(scenarios)
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            reports = list(pool.map(run_scenario, scenarios, sizes))
    else:
        reports = [run_scenario(s, n) for s, n in zip(scenarios, sizes)]
    reports.sort(key=lambda r: r.scenario)
    _emit(reports, args.report, single=False)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_MISMATCH


def cmd_asm(args) -> int:
    path = Path(args.file)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioInvalid(f"cannot read {path}: {exc.strerror}") from None
    prog = assemble(text, args.base)
    listing = disassemble(prog.code, prog.base)
    for i, (addr, line) in enumerate(listing):
        end = listing[i + 1][0] if i + 1 < len(listing) else prog.end
        raw = prog.code[addr - prog.base : end - prog.base].hex()
        print(f"{addr:#010x}  {raw:<24}  {line}")
    for name, addr in sorted(prog.symbols.items(), key=lambda kv: kv[1]):
        print(f"{name} = {addr:#x}")
    return EXIT_OK


def cmd_boot_demo(args) -> int:
    m = Machine(MachineConfig(table_capacity=args.table_size))
    user = standard_user()
    stats = load_and_boot(m, standard_kernel(), standard_modules(), BootConfig(), user)
    result = m.run(args.max_steps)
    if args.report == "json":
        print(json.dumps({"boot": stats.to_dict(), "run": {"status": result.status, "steps": result.steps}}, indent=2))
    else:
        for key, value in stats.to_dict().items():
            print(f"{key:24} {value}")
        print(f"{'user_run':24} {result.status} after {result.steps} steps")
    return EXIT_OK if result.status == "halted" else EXIT_MISMATCH


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="neverland", description="Permission-table enforcement simulator and attack harness.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def table_size(sp):
        sp.add_argument("--table-size", type=int, default=None, metavar="N", help="permission table entries")

    r = sub.add_parser("run", help="run one scenario file")
    r.add_argument("scenario")
    r.add_argument("--report", choices=("json", "text"), default="text")
    table_size(r)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("suite", help="run the standard attack suite")
    s.add_argument("--only", action="append", metavar="NAME", help="run only this scenario (repeatable)")
    s.add_argument("--report", choices=("json", "text"), default="text")
    s.add_argument("--jobs", type=int, default=1, help="worker processes")
    s.add_argument("--dump", metavar="DIR", help="also write the scenarios as JSON files into DIR")
    table_size(s)
    s.set_defaults(func=cmd_suite)

    a = sub.add_parser("asm", help="assemble a file and print a listing")
    a.add_argument("file")
    a.add_argument("--base", type=lambda v: int(v, 0), default=0)
    a.set_defaults(func=cmd_asm)

    b = sub.add_parser("boot-demo", help="boot the standard preset and print boot statistics")
    b.add_argument("--table-size", type=int, default=8, metavar="N")
    b.add_argument("--report", choices=("json", "text"), default="text")
    b.add_argument("--max-steps", type=int, default=10_000)
    b.set_defaults(func=cmd_boot_demo)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except (ScenarioInvalid, AsmError, BootError, ValueError) as exc:
        print(f"neverland: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
