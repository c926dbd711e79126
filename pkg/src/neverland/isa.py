"""Toy 64-bit ISA: opcodes, CSR numbers and 32-bit instruction word layout.

Word layout (little-endian, 4-byte aligned)::

    [7:0]  opcode
    [11:8] field a   (rd, or rs1 for branches, or the source of sw)
    [15:12] field b  (rs1, or rs2 for branches)
    [19:16] field c  (rs2 of add)
    [31:16] imm16    (addi/lw/sw/jalr offset, beq/bne byte offset from the branch)
    [31:12] imm20    (jal byte offset from the jump)
    [31:20] csr      (csrr/csrw)

``li`` is followed by a 64-bit little-endian literal, so it is 12 bytes long.
Opcode 0 is deliberately illegal so zeroed memory traps instead of running.
"""

from __future__ import annotations

import enum

WORD = 4
LI_SIZE = 12
NUM_REGS = 16
MASK64 = (1 << 64) - 1


class Op(enum.IntEnum):
    LI = 0x01
    ADD = 0x02
    ADDI = 0x03
    LW = 0x04
    SW = 0x05
    BEQ = 0x06
    BNE = 0x07
    JAL = 0x08
    JALR = 0x09
    ECALL = 0x0A
    SRET = 0x0B
    CSRR = 0x0C
    CSRW = 0x0D
    HALT = 0x0E


MNEMONICS = {op.name.lower(): op for op in Op}

CSR_STVEC = 0x105
CSR_SEPC = 0x141
CSR_SCAUSE = 0x142
CSR_SUM = 0x180
CSR_LOCKCTL = 0x7C0

CSR_NAMES = {
    "stvec": CSR_STVEC,
    "sepc": CSR_SEPC,
    "scause": CSR_SCAUSE,
    "sum": CSR_SUM,
    "lockctl": CSR_LOCKCTL,
}
CSR_BY_NUMBER = {v: k for k, v in CSR_NAMES.items()}

LOCKCTL_STVEC = 1 << 0


def sext(value: int, bits: int) -> int:
    value &= (1 << bits) - 1
    return value - (1 << bits) if value >> (bits - 1) else value


def fits_signed(value: int, bits: int) -> bool:
    return -(1 << (bits - 1)) <= value < (1 << (bits - 1))


def encode(op: Op, a: int = 0, b: int = 0, c: int = 0, imm: int = 0) -> int:
    """Pack one instruction word. ``imm`` is interpreted per opcode format."""
    word = int(op) | (a & 0xF) << 8 | (b & 0xF) << 12
    if op == Op.ADD:
        word |= (c & 0xF) << 16
    elif op in (Op.ADDI, Op.LW, Op.SW, Op.JALR, Op.BEQ, Op.BNE):
        if not fits_signed(imm, 16):
            raise ValueError(f"immediate {imm} does not fit in 16 bits")
        word |= (imm & 0xFFFF) << 16
    elif op == Op.JAL:
        if not fits_signed(imm, 20):
            raise ValueError(f"jump offset {imm} does not fit in 20 bits")
        word |= (imm & 0xFFFFF) << 12
    elif op in (Op.CSRR, Op.CSRW):
        if not 0 <= imm < 1 << 12:
            raise ValueError(f"csr number {imm:#x} out of range")
        word |= imm << 20
    return word


def fields(word: int) -> tuple[int, int, int, int]:
    """(opcode, a, b, c) of an instruction word."""
    return word & 0xFF, (word >> 8) & 0xF, (word >> 12) & 0xF, (word >> 16) & 0xF


def imm16(word: int) -> int:
    return sext(word >> 16, 16)


def imm20(word: int) -> int:
    return sext(word >> 12, 20)


def csr_field(word: int) -> int:
    return (word >> 20) & 0xFFF


def disassemble(code: bytes, base: int = 0) -> list[tuple[int, str]]:
    """Listing of ``code`` loaded at ``base``; undecodable words become ``.word``."""
    out = []
    pos = 0
    while pos + WORD <= len(code):
        addr = base + pos
        word = int.from_bytes(code[pos : pos + WORD], "little")
        op, a, b, c = fields(word)
        try:
            op = Op(op)
        except ValueError:
            out.append((addr, f".word {word:#x}"))
            pos += WORD
            continue
        if op == Op.LI:
            if pos + LI_SIZE > len(code):
                out.append((addr, f".word {word:#x}"))
                pos += WORD
                continue
            literal = int.from_bytes(code[pos + 4 : pos + 12], "little")
            out.append((addr, f"li r{a}, {literal:#x}"))
            pos += LI_SIZE
            continue
        name = op.name.lower()
        if op == Op.ADD:
            text = f"add r{a}, r{b}, r{c}"
        elif op in (Op.ADDI, Op.JALR):
            text = f"{name} r{a}, r{b}, {imm16(word)}"
        elif op == Op.LW:
            text = f"lw r{a}, {imm16(word)}(r{b})"
        elif op == Op.SW:
            text = f"sw r{a}, {imm16(word)}(r{b})"
        elif op in (Op.BEQ, Op.BNE):
            text = f"{name} r{a}, r{b}, {addr + imm16(word):#x}"
        elif op == Op.JAL:
            text = f"jal r{a}, {addr + imm20(word):#x}"
        elif op == Op.CSRR:
            text = f"csrr r{a}, {CSR_BY_NUMBER.get(csr_field(word), hex(csr_field(word)))}"
        elif op == Op.CSRW:
            text = f"csrw {CSR_BY_NUMBER.get(csr_field(word), hex(csr_field(word)))}, r{b}"
        else:
            text = name
        out.append((addr, text))
        pos += WORD
    return out
