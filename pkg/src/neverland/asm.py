"""Two-pass assembler for the toy ISA.

Syntax, one statement per line::

    label:                     ; labels may share a line with an instruction
        li   r1, SYMBOL+8      ; comments start with ';' or '#'
        lw   r2, 8(r1)
        beq  r1, r2, label     ; branch/jump operands are target addresses
        .word  0x1234          ; 32-bit datum
        .dword label           ; 64-bit datum

Immediates are integers (decimal, 0x hex, negative), symbols, or ``+``/``-``
chains of those. Predefined symbols can be passed in by the caller.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .isa import CSR_NAMES, LI_SIZE, MASK64, NUM_REGS, WORD, Op, encode, fits_signed

_LABEL = re.compile(r"^([A-Za-z_.][\w.]*)\s*:")
_TERM = re.compile(r"\s*([+-]?)\s*([A-Za-z_.][\w.]*|0[xX][0-9a-fA-F_]+|\d[\d_]*)\s*")
_MEM = re.compile(r"^(.*)\((r\d+)\)$")


class AsmError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class Program:
    base: int
    code: bytes
    symbols: dict[str, int] = field(default_factory=dict)

    @property
    def words(self) -> list[int]:
        return [int.from_bytes(self.code[i : i + WORD], "little") for i in range(0, len(self.code), WORD)]

    @property
    def end(self) -> int:
        return self.base + len(self.code)


def evaluate(expr: str, symbols: dict[str, int]) -> int:
    """Evaluate a ``+``/``-`` chain of integers and symbol names."""
    expr = expr.strip()
    if not expr:
        raise KeyError("empty expression")
    pos, total, first = 0, 0, True
    while pos < len(expr):
        m = _TERM.match(expr, pos)
        if not m or (not first and not m.group(1)):
            raise ValueError(f"malformed expression {expr!r}")
        sign, tok = m.groups()
        if tok[0].isdigit():
            value = int(tok.replace("_", ""), 0)
        elif tok in symbols:
            value = symbols[tok]
        else:
            raise KeyError(tok)
        total += -value if sign == "-" else value
        pos, first = m.end(), False
    return total


def _split_operands(text: str) -> list[str]:
    return [p.strip() for p in text.split(",")] if text.strip() else []


def _reg(tok: str, line: int) -> int:
    tok = tok.strip().lower()
    if tok.startswith("r") and tok[1:].isdigit() and 0 <= int(tok[1:]) < NUM_REGS:
        return int(tok[1:])
    raise AsmError(f"bad register {tok!r}", line)


def _size(mnemonic: str) -> int:
    if mnemonic == "li":
        return LI_SIZE
    if mnemonic == ".dword":
        return 8
    return WORD


_ARITY = {
    "li": 2, "add": 3, "addi": 3, "lw": 2, "sw": 2, "beq": 3, "bne": 3,
    "jal": 2, "jalr": 3, "ecall": 0, "sret": 0, "halt": 0, "csrr": 2, "csrw": 2,
    ".word": 1, ".dword": 1,
}


def _parse(text: str) -> list[tuple[int, list[str], str | None, list[str]]]:
    """(line number, labels, mnemonic, operands) per statement."""
    stmts = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = re.split(r"[;#]", raw, maxsplit=1)[0].strip()
        labels = []
        while (m := _LABEL.match(line)) is not None:
            labels.append(m.group(1))
            line = line[m.end() :].strip()
        if not line:
            if labels:
                stmts.append((lineno, labels, None, []))
            continue
        mnemonic, _, rest = line.partition(" ")
        mnemonic = mnemonic.lower()
        if mnemonic not in _ARITY:
            raise AsmError(f"unknown mnemonic {mnemonic!r}", lineno)
        ops = _split_operands(rest)
        if len(ops) != _ARITY[mnemonic]:
            raise AsmError(f"{mnemonic} takes {_ARITY[mnemonic]} operands, got {len(ops)}", lineno)
        stmts.append((lineno, labels, mnemonic, ops))
    return stmts


def assemble(text: str, base: int = 0, symbols: dict[str, int] | None = None) -> Program:
    """Assemble ``text`` for load address ``base``."""
    if base % WORD:
        raise AsmError(f"base {base:#x} is not word aligned")
    stmts = _parse(text)

    table = dict(symbols or {})
    local: dict[str, int] = {}
    addr = base
    for lineno, labels, mnemonic, _ in stmts:
        for name in labels:
            if name in local:
                raise AsmError(f"label {name!r} defined twice", lineno)
            local[name] = addr
        if mnemonic is not None:
            addr += _size(mnemonic)
    table.update(local)

    out = bytearray()
    addr = base
    for lineno, _, mnemonic, ops in stmts:
        if mnemonic is None:
            continue

        def val(expr: str) -> int:
            try:
                return evaluate(expr, table)
            except KeyError as exc:
                raise AsmError(f"undefined symbol {exc.args[0]!r}", lineno) from None
            except ValueError as exc:
                raise AsmError(str(exc), lineno) from None

        def imm(expr: str, bits: int = 16) -> int:
            v = val(expr)
            if not fits_signed(v, bits):
                raise AsmError(f"immediate {v} out of range", lineno)
            return v

        def mem(tok: str) -> tuple[int, int]:
            m = _MEM.match(tok.replace(" ", ""))
            if not m:
                raise AsmError(f"expected offset(reg), got {tok!r}", lineno)
            return imm(m.group(1) or "0"), _reg(m.group(2), lineno)

        def csr(tok: str) -> int:
            tok = tok.strip().lower()
            return CSR_NAMES[tok] if tok in CSR_NAMES else val(tok)

        try:
            if mnemonic == ".word":
                out += (val(ops[0]) & 0xFFFF_FFFF).to_bytes(4, "little")
            elif mnemonic == ".dword":
                out += (val(ops[0]) & MASK64).to_bytes(8, "little")
            elif mnemonic == "li":
                out += encode(Op.LI, _reg(ops[0], lineno)).to_bytes(4, "little")
                out += (val(ops[1]) & MASK64).to_bytes(8, "little")
            else:
                op = Op[mnemonic.upper()]
                if op == Op.ADD:
                    word = encode(op, *(_reg(o, lineno) for o in ops))
                elif op in (Op.ADDI, Op.JALR):
                    word = encode(op, _reg(ops[0], lineno), _reg(ops[1], lineno), imm=imm(ops[2]))
                elif op in (Op.LW, Op.SW):
                    offset, rs1 = mem(ops[1])
                    word = encode(op, _reg(ops[0], lineno), rs1, imm=offset)
                elif op in (Op.BEQ, Op.BNE):
                    word = encode(op, _reg(ops[0], lineno), _reg(ops[1], lineno), imm=imm(f"{ops[2]}-{addr}"))
                elif op == Op.JAL:
                    word = encode(op, _reg(ops[0], lineno), imm=imm(f"{ops[1]}-{addr}", 20))
                elif op == Op.CSRR:
                    word = encode(op, _reg(ops[0], lineno), imm=csr(ops[1]))
                elif op == Op.CSRW:
                    word = encode(op, b=_reg(ops[1], lineno), imm=csr(ops[0]))
                else:
                    word = encode(op)
                out += word.to_bytes(4, "little")
        except AsmError:
            raise
        except ValueError as exc:
            raise AsmError(str(exc), lineno) from None
        addr += _size(mnemonic)

    return Program(base, bytes(out), local)
