import pytest
from hypothesis import given
from hypothesis import strategies as st

from neverland.asm import AsmError, assemble, evaluate
from neverland.isa import LI_SIZE, Op, disassemble, encode, fields, imm16, imm20
from neverland.machine import Machine, Mode, PageEntry, StepKind, TrapCause


def test_halt_is_one_word():
    prog = assemble("halt")
    assert prog.words == [int(Op.HALT)]


def test_self_branch_has_zero_offset():
    prog = assemble("loop: beq r1, r2, loop")
    assert imm16(prog.words[0]) == 0
    assert prog.symbols == {"loop": 0}


def test_li_literal_and_labels():
    prog = assemble("start:\n li r3, end+8\n halt\nend:", base=0x1000)
    assert len(prog.code) == LI_SIZE + 4
    assert int.from_bytes(prog.code[4:12], "little") == 0x1000 + LI_SIZE + 4 + 8
    assert prog.symbols["end"] == prog.end


def test_branch_and_jump_offsets_are_relative():
    prog = assemble("a: halt\n halt\n bne r1, r0, a\n jal r15, a", base=0x2000)
    assert imm16(prog.words[2]) == -8
    assert imm20(prog.words[3]) == -12


def test_memory_operands_and_csrs():
    prog = assemble("lw r2, -8(r4)\nsw r5, 16(r6)\ncsrr r1, stvec\ncsrw lockctl, r2")
    assert fields(prog.words[0])[:3] == (Op.LW, 2, 4) and imm16(prog.words[0]) == -8
    assert fields(prog.words[1])[:3] == (Op.SW, 5, 6) and imm16(prog.words[1]) == 16
    assert prog.words[2] >> 20 == 0x105
    assert prog.words[3] >> 20 == 0x7C0 and fields(prog.words[3])[2] == 2


def test_data_directives():
    prog = assemble("x: .word 0x12345678\n.dword x")
    assert prog.code == bytes.fromhex("78563412") + (0).to_bytes(8, "little")


@pytest.mark.parametrize(
    "text, line",
    [
        ("halt\nfrob r1", 2),
        ("jal r0, nowhere", 1),
        ("a: halt\na: halt", 2),
        ("addi r1, r2", 1),
        ("add r1, r2, r16", 1),
        ("addi r1, r1, 40000", 1),
    ],
)
def test_errors_carry_line_numbers(text, line):
    with pytest.raises(AsmError) as info:
        assemble(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_evaluate():
    assert evaluate("a+0x10-2", {"a": 100}) == 114
    with pytest.raises(KeyError):
        evaluate("b", {})
    with pytest.raises(ValueError):
        evaluate("1 2", {})


def test_deterministic():
    text = "l: li r1, l\n addi r1, r1, 4\n bne r1, r0, l\n halt"
    assert assemble(text, 0x40) == assemble(text, 0x40)


reg = st.integers(0, 15).map(lambda r: f"r{r}")
imm = st.integers(-(2**15), 2**15 - 1)
line_st = st.one_of(
    st.tuples(reg, reg, reg).map(lambda t: f"add {t[0]}, {t[1]}, {t[2]}"),
    st.tuples(reg, reg, imm).map(lambda t: f"addi {t[0]}, {t[1]}, {t[2]}"),
    st.tuples(reg, reg, imm).map(lambda t: f"jalr {t[0]}, {t[1]}, {t[2]}"),
    st.tuples(reg, imm, reg).map(lambda t: f"lw {t[0]}, {t[1]}({t[2]})"),
    st.tuples(reg, imm, reg).map(lambda t: f"sw {t[0]}, {t[1]}({t[2]})"),
    st.tuples(reg, st.integers(0, 2**64 - 1)).map(lambda t: f"li {t[0]}, {hex(t[1])}"),
    st.sampled_from(["ecall", "sret", "halt", "csrr r1, sepc", "csrw sum, r3"]),
)


@given(st.lists(line_st, min_size=1, max_size=20))
def test_disassembly_round_trip(lines):
    prog = assemble("\n".join(lines))
    listing = [text for _, text in disassemble(prog.code)]
    assert assemble("\n".join(listing)).code == prog.code
    assert [t.split()[0] for t in listing] == [line.split()[0] for line in lines]


def test_disassemble_unknown_word():
    assert disassemble((0xFF).to_bytes(4, "little")) == [(0, ".word 0xff")]


def test_encode_range_checks():
    with pytest.raises(ValueError):
        encode(Op.JAL, imm=1 << 20)
    with pytest.raises(ValueError):
        encode(Op.CSRR, imm=0x1000)


def test_syscall_stub_traps_on_unbooted_machine():
    m = Machine()
    prog = assemble("li r1, 0\necall\nhalt", base=0x10000)
    m.mem.write(0x8000_0000, prog.code)
    m.map_page(0x10, PageEntry(0x80000, executable=True, user=True))
    m.mode = Mode.USER
    m.pc = 0x10000
    assert m.step().kind == StepKind.CONTINUE
    outcome = m.step()
    assert outcome.kind == StepKind.TRAPPED and outcome.cause == TrapCause.SYSCALL
    assert m.mode == Mode.SUPERVISOR
